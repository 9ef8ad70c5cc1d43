#include "sqz/twa.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "sqz/binary_io.hpp"

namespace sqz::twa {

void PropagationConfig::validate() const {
  if (nz < 2 || (nz & (nz - 1)) != 0) throw InvalidArgument("nz must be a power of two >= 2");
  if (!(z_extent > 0.0)) throw InvalidArgument("z_extent must be positive");
  if (n_traj < 1) throw InvalidArgument("n_traj must be >= 1");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidArgument("t_final must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!std::isfinite(beta2) || !std::isfinite(chi_e) || !std::isfinite(vg))
    throw InvalidArgument("propagation coefficients must be finite");
  const double ratio = t_final / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
    throw InvalidArgument("t_final must be an integer multiple of dt");
}

std::size_t PropagationConfig::steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }

double CField::norm() const {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return s * dz;
}

std::vector<cplx> flat_shape(std::size_t nz, double z_extent) {
  return std::vector<cplx>(nz, cplx(1.0 / std::sqrt(z_extent), 0.0));
}

std::vector<cplx> gaussian_shape(std::size_t nz, double z_extent, double center, double width) {
  if (!(width > 0.0)) throw InvalidArgument("pulse width must be positive");
  const double dz = z_extent / static_cast<double>(nz);
  std::vector<cplx> out(nz);
  double norm = 0.0;
  for (std::size_t i = 0; i < nz; ++i) {
    // Periodic distance so the envelope is smooth across the boundary.
    double d = static_cast<double>(i) * dz - center;
    d -= z_extent * std::round(d / z_extent);
    const double v = std::exp(-0.25 * d * d / (width * width));
    out[i] = v;
    norm += v * v * dz;
  }
  for (auto& v : out) v /= std::sqrt(norm);
  return out;
}

TrajectoryEnsemble init_ensemble(const CoherentPulse& pulse, const PropagationConfig& config) {
  config.validate();
  if (pulse.shape.size() != config.nz) throw InvalidArgument("pulse shape length differs from nz");
  if (!(pulse.n_photons >= 0.0) || !std::isfinite(pulse.n_photons))
    throw InvalidArgument("photon number must be finite and >= 0");
  const double dz = config.dz();
  double shape_norm = 0.0;
  for (const auto& v : pulse.shape) shape_norm += std::norm(v) * dz;
  if (std::abs(shape_norm - 1.0) > 1e-9)
    throw InvalidArgument("pulse shape is not normalized (sum |phi|^2 dz = " + format_double(shape_norm) + ")");

  TrajectoryEnsemble ens;
  ens.config = config;
  ens.fields.resize(config.n_traj);
  const double amp = std::sqrt(pulse.n_photons);
  // Independent point noise with E|eta(z)|^2 = 1/(2 dz) is unitarily
  // equivalent to variance 1/2 in every plane-wave mode.
  const double sd = std::sqrt(0.25 / dz);
  parallel_for(config.n_traj, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      auto rng = make_engine(config.seed, {0x747761ULL, t});
      std::normal_distribution<double> normal(0.0, sd);
      CField f;
      f.dz = dz;
      f.psi.resize(config.nz);
      for (std::size_t z = 0; z < config.nz; ++z) {
        const double re = normal(rng);
        const double im = normal(rng);
        f.psi[z] = amp * pulse.shape[z] + cplx(re, im);
      }
      ens.fields[t] = std::move(f);
    }
  });
  return ens;
}

double max_stable_dt(const PropagationConfig& config, double max_abs2) {
  const double k1 = 2.0 * kPi / config.z_extent;
  const double nonlinear_rate = 2.0 * std::abs(config.chi_e) * std::max(max_abs2, 1.0 / config.dz());
  const double dispersive_rate = 0.5 * std::abs(config.beta2) * k1 * k1;
  const double rate = std::max(nonlinear_rate, dispersive_rate);
  return rate > 0.0 ? 0.1 / rate : std::numeric_limits<double>::infinity();
}

namespace {

std::vector<double> wavenumbers(std::size_t nz, double z_extent) {
  std::vector<double> k(nz);
  for (std::size_t i = 0; i < nz; ++i) {
    const long j = i < nz / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(nz);
    k[i] = 2.0 * kPi * static_cast<double>(j) / z_extent;
  }
  return k;
}

class Stepper {
 public:
  explicit Stepper(const PropagationConfig& c) : cfg_(c), dz_(c.dz()) {
    const auto k = wavenumbers(c.nz, c.z_extent);
    half_linear_.resize(c.nz);
    for (std::size_t i = 0; i < c.nz; ++i) half_linear_[i] = std::polar(1.0, -0.5 * c.beta2 * k[i] * k[i] * 0.5 * c.dt);
    spec_.resize(c.nz);
  }

  void step(std::vector<cplx>& psi) {
    if (cfg_.beta2 != 0.0) linear_half(psi);
    if (cfg_.chi_e != 0.0) {
      const double g = 2.0 * cfg_.chi_e * cfg_.dt;
      const double vac = 1.0 / dz_;
      for (auto& v : psi) v *= std::polar(1.0, -g * (std::norm(v) - vac));
    }
    if (cfg_.beta2 != 0.0) linear_half(psi);
  }

 private:
  void linear_half(std::vector<cplx>& psi) {
    fft_.fwd(spec_, psi);
    for (std::size_t i = 0; i < spec_.size(); ++i) spec_[i] *= half_linear_[i];
    fft_.inv(psi, spec_);
  }

  const PropagationConfig& cfg_;
  double dz_;
  std::vector<cplx> half_linear_;
  std::vector<cplx> spec_;
  Eigen::FFT<double> fft_;
};

void check_ensemble(const TrajectoryEnsemble& ens, const PropagationConfig& config) {
  config.validate();
  if (ens.fields.size() != config.n_traj) throw InvalidArgument("ensemble size differs from n_traj");
  for (const auto& f : ens.fields)
    if (f.psi.size() != config.nz) throw InvalidArgument("ensemble field length differs from nz");
  double max_abs2 = 0.0;
  for (const auto& f : ens.fields)
    for (const auto& v : f.psi) max_abs2 = std::max(max_abs2, std::norm(v));
  const double limit = max_stable_dt(config, max_abs2);
  if (config.dt > limit)
    throw InvalidArgument("dt = " + format_double(config.dt) + " exceeds the stable step " + format_double(limit));
}

}  // namespace

void propagate_observed(TrajectoryEnsemble& ensemble, const PropagationConfig& config,
                        std::span<const std::size_t> snapshot_steps, const SnapshotObserver& observer) {
  check_ensemble(ensemble, config);
  const std::size_t steps = config.steps();
  for (auto s : snapshot_steps)
    if (s > steps) throw InvalidArgument("snapshot step beyond the final step");

  parallel_for(config.n_traj, [&](std::size_t begin, std::size_t end) {
    Stepper stepper(config);
    for (std::size_t t = begin; t < end; ++t) {
      CField& f = ensemble.fields[t];
      auto notify = [&](std::size_t step) {
        if (!observer) return;
        for (std::size_t si = 0; si < snapshot_steps.size(); ++si)
          if (snapshot_steps[si] == step) observer(t, si, f);
      };
      notify(0);
      double norm = f.norm();
      for (std::size_t s = 1; s <= steps; ++s) {
        stepper.step(f.psi);
        const double next = f.norm();
        if (!std::isfinite(next) || std::abs(next - norm) > 1e-6 * std::max(norm, 1e-300))
          throw NumericalFailure("norm drift in trajectory " + std::to_string(t) + " at step " + std::to_string(s) +
                                 ": " + format_double(norm) + " -> " + format_double(next));
        norm = next;
        notify(s);
      }
    }
  });
  ensemble.config = config;
}

TrajectoryEnsemble propagate(TrajectoryEnsemble ensemble, const PropagationConfig& config) {
  propagate_observed(ensemble, config, {}, {});
  return ensemble;
}

OneBodyDensityMatrix one_body_density_matrix(const TrajectoryEnsemble& ensemble) {
  if (ensemble.fields.empty()) throw InvalidArgument("empty ensemble");
  const std::size_t nz = ensemble.fields.front().psi.size();
  const double dz = ensemble.fields.front().dz;
  const double inv_n = 1.0 / static_cast<double>(ensemble.fields.size());
  OneBodyDensityMatrix out;
  out.dz = dz;
  out.rho_zz = Eigen::MatrixXcd::Zero(nz, nz);
  parallel_for(nz, [&](std::size_t begin, std::size_t end) {
    for (std::size_t z = begin; z < end; ++z) {
      for (const auto& f : ensemble.fields) {
        const cplx a = std::conj(f.psi[z]);
        for (std::size_t w = 0; w < nz; ++w) out.rho_zz(z, w) += a * f.psi[w];
      }
    }
  });
  out.rho_zz *= inv_n;
  out.rho_zz.diagonal().array() -= 0.5 / dz;
  const Eigen::MatrixXcd herm = 0.5 * (out.rho_zz + out.rho_zz.adjoint());
  out.rho_zz = herm;
  return out;
}

void ModeSet::validate(double tol) const {
  if (phi.cols() == 0) throw InvalidArgument("mode set is empty");
  const Eigen::MatrixXcd gram = phi.adjoint() * phi * dz;
  const double err = (gram - Eigen::MatrixXcd::Identity(phi.cols(), phi.cols())).cwiseAbs().maxCoeff();
  if (err > tol) throw InvalidArgument("modes are not orthonormal (max Gram error " + format_double(err) + ")");
}

ModeSet plane_wave_modes(std::size_t nz, double z_extent, const std::vector<int>& indices) {
  ModeSet m;
  m.dz = z_extent / static_cast<double>(nz);
  m.phi.resize(static_cast<Eigen::Index>(nz), static_cast<Eigen::Index>(indices.size()));
  const double amp = 1.0 / std::sqrt(z_extent);
  for (std::size_t c = 0; c < indices.size(); ++c) {
    for (std::size_t z = 0; z < nz; ++z) {
      // Phase reduced modulo nz so large indices stay exact.
      const auto jz = (static_cast<long long>(indices[c]) * static_cast<long long>(z)) % static_cast<long long>(nz);
      m.phi(z, c) = std::polar(amp, 2.0 * kPi * static_cast<double>(jz) / static_cast<double>(nz));
    }
  }
  return m;
}

Eigen::VectorXcd project(const CField& field, const ModeSet& modes) {
  if (field.psi.size() != modes.nz()) throw InvalidArgument("mode/grid size mismatch");
  const Eigen::Map<const Eigen::VectorXcd> psi(field.psi.data(), static_cast<Eigen::Index>(field.psi.size()));
  return modes.phi.adjoint() * psi * modes.dz;
}

ModeQuadratures mode_quadratures(const TrajectoryEnsemble& ensemble, const ModeSet& modes) {
  modes.validate();
  const auto n_traj = static_cast<Eigen::Index>(ensemble.fields.size());
  const auto n_modes = static_cast<Eigen::Index>(modes.count());
  ModeQuadratures q{Eigen::MatrixXd(n_modes, n_traj), Eigen::MatrixXd(n_modes, n_traj)};
  parallel_for(ensemble.fields.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const Eigen::VectorXcd a = project(ensemble.fields[t], modes);
      for (Eigen::Index m = 0; m < n_modes; ++m) {
        q.x(m, static_cast<Eigen::Index>(t)) = kSqrt2 * a(m).real();
        q.p(m, static_cast<Eigen::Index>(t)) = kSqrt2 * a(m).imag();
      }
    }
  });
  return q;
}

double effective_single_mode_chi(double chi_e, std::span<const cplx> mode, double dz) {
  double s = 0.0;
  for (const auto& v : mode) s += std::norm(v) * std::norm(v);
  return chi_e * s * dz;
}

void save_ensemble(const std::string& path_prefix, const TrajectoryEnsemble& ensemble) {
  const auto& c = ensemble.config;
  Manifest m{{"format", "sqz-ensemble-1"},
             {"nz", std::to_string(c.nz)},
             {"dz", format_double(c.dz())},
             {"z_extent", format_double(c.z_extent)},
             {"n_traj", std::to_string(ensemble.fields.size())},
             {"seed", std::to_string(c.seed)},
             {"dt", format_double(c.dt)},
             {"t_final", format_double(c.t_final)},
             {"vg", format_double(c.vg)},
             {"beta2", format_double(c.beta2)},
             {"chi_e", format_double(c.chi_e)},
             {"byte_order", "little"},
             {"layout", "trajectory,z,(re,im)"}};
  save_manifest(path_prefix + ".manifest", m);
  std::ofstream os(path_prefix + ".bin", std::ios::binary);
  if (!os) throw IoError("cannot write " + path_prefix + ".bin");
  for (const auto& f : ensemble.fields)
    write_f64_le(os, std::span<const double>(reinterpret_cast<const double*>(f.psi.data()), 2 * f.psi.size()));
}

TrajectoryEnsemble load_ensemble(const std::string& path_prefix) {
  const auto m = load_manifest(path_prefix + ".manifest");
  if (manifest_get(m, "format") != "sqz-ensemble-1") throw InvalidArgument("unknown ensemble format");
  TrajectoryEnsemble ens;
  auto& c = ens.config;
  c.nz = parse_u64(manifest_get(m, "nz"));
  c.z_extent = parse_double(manifest_get(m, "z_extent"));
  c.n_traj = parse_u64(manifest_get(m, "n_traj"));
  c.seed = parse_u64(manifest_get(m, "seed"));
  c.dt = parse_double(manifest_get(m, "dt"));
  c.t_final = parse_double(manifest_get(m, "t_final"));
  c.vg = parse_double(manifest_get(m, "vg"));
  c.beta2 = parse_double(manifest_get(m, "beta2"));
  c.chi_e = parse_double(manifest_get(m, "chi_e"));
  std::ifstream is(path_prefix + ".bin", std::ios::binary);
  if (!is) throw IoError("cannot read " + path_prefix + ".bin");
  ens.fields.resize(c.n_traj);
  for (auto& f : ens.fields) {
    f.dz = c.dz();
    f.psi.resize(c.nz);
    read_f64_le(is, std::span<double>(reinterpret_cast<double*>(f.psi.data()), 2 * c.nz));
  }
  return ens;
}

}  // namespace sqz::twa
