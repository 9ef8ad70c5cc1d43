#include "sqz/synth.hpp"

#include <algorithm>
#include <cmath>

#include "sqz/special.hpp"

namespace sqz::synth {

namespace {

constexpr std::size_t kTablePoints = 4096;

struct MarginalTable {
  std::vector<double> x;
  std::vector<double> cdf;  // normalized, cdf.front() = 0, cdf.back() = 1

  double quantile(double u) const {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.begin()) return x.front();
    if (it == cdf.end()) return x.back();
    const auto i = static_cast<std::size_t>(it - cdf.begin());
    const double c0 = cdf[i - 1], c1 = cdf[i];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return x[i - 1] + w * (x[i] - x[i - 1]);
  }
};

// Per-mode Fock-basis tables shared by every cell of that mode.
struct KerrModeTables {
  std::vector<double> xs;
  Eigen::MatrixXd hermite;                // (x, n)
  std::vector<Eigen::VectorXcd> amps;     // per tau
};

MarginalTable make_table(const KerrModeTables& k, const Eigen::VectorXcd& c, double phi) {
  const auto n = c.size();
  Eigen::VectorXcd rotated(n);
  for (Eigen::Index j = 0; j < n; ++j) rotated(j) = c(j) * std::polar(1.0, -static_cast<double>(j) * phi);
  const Eigen::VectorXd re = k.hermite * rotated.real();
  const Eigen::VectorXd im = k.hermite * rotated.imag();
  MarginalTable t;
  t.x = k.xs;
  t.cdf.assign(k.xs.size(), 0.0);
  const double h = k.xs[1] - k.xs[0];
  double prev = re(0) * re(0) + im(0) * im(0);
  for (std::size_t i = 1; i < k.xs.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double cur = re(ii) * re(ii) + im(ii) * im(ii);
    t.cdf[i] = t.cdf[i - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  const double total = t.cdf.back();
  if (!(total > 0.0)) throw InternalDefect("Kerr marginal has zero weight");
  for (double& v : t.cdf) v /= total;
  return t;
}

}  // namespace

void GaussianState::validate() const {
  for (double v : {v1, v2, theta, d1, d2})
    if (!std::isfinite(v)) throw InvalidArgument("Gaussian state parameters must be finite");
  if (!(v1 > 0.0) || !(v2 > 0.0)) throw InvalidArgument("Gaussian variances must be positive");
  if (v1 * v2 < 0.25 * (1.0 - 1e-12))
    throw InvalidArgument("Gaussian state violates the uncertainty bound: v1*v2 = " + format_double(v1 * v2));
}

Eigen::Matrix2d GaussianState::covariance() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r.transpose() * Eigen::Vector2d(v1, v2).asDiagonal() * r;
}

Eigen::Vector2d GaussianState::mean() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r.transpose() * Eigen::Vector2d(d1, d2);
}

void StateSpec::validate(std::size_t n_tau) const {
  if (mode_labels.empty()) throw InvalidArgument("state spec needs at least one mode label");
  if (modes.size() != 1 && modes.size() != mode_labels.size())
    throw InvalidArgument("state spec needs one mode state or one per mode label");
  if (!chi_of_tau.empty() && chi_of_tau.size() != n_tau)
    throw InvalidArgument("chi_of_tau must have one entry per delay point");
  for (double c : chi_of_tau)
    if (!std::isfinite(c)) throw InvalidArgument("chi_of_tau must be finite");
  for (const auto& m : modes)
    if (m.kind == StateKind::gaussian) m.gaussian.validate();
}

void DetectorModel::validate() const {
  for (double v : {electronic_noise_sd, hf_amplitude, hf_harmonic, omega0, lo_ratio})
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("detector parameters must be finite and nonnegative");
  if (!(lo_ratio > 0.0)) throw InvalidArgument("lo_ratio must be positive");
}

double DetectorModel::lo_calibration() const { return std::sqrt(lo_ratio); }

std::vector<double> chi_modulation_profile(const std::vector<double>& tau_grid, double amplitude, double period_fs,
                                           double phase) {
  if (!(period_fs > 0.0)) throw InvalidArgument("modulation period must be positive");
  std::vector<double> out(tau_grid.size());
  for (std::size_t i = 0; i < tau_grid.size(); ++i)
    out[i] = amplitude * std::sin(2.0 * kPi * tau_grid[i] / period_fs + phase);
  return out;
}

std::vector<double> kerr_marginal(const Eigen::VectorXcd& amplitudes, double phi, const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  std::vector<double> h(static_cast<std::size_t>(amplitudes.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    hermite_functions(xs[i], h);
    cplx a = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n)
      a += amplitudes(static_cast<Eigen::Index>(n)) * std::polar(h[n], -static_cast<double>(n) * phi);
    out[i] = std::norm(a);
  }
  return out;
}

double quadrature_variance(const fock::QuadratureStats& stats, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  return c * c * stats.var_x + s * s * stats.var_p + 2.0 * c * s * stats.cov_xp;
}

HomodyneDataset sample_homodyne(const StateSpec& state, const std::vector<double>& tau_grid,
                                const std::vector<double>& phi_grid, std::size_t n_shots,
                                const DetectorModel& detector, std::uint64_t seed) {
  state.validate(tau_grid.size());
  detector.validate();

  HomodyneDataset ds;
  ds.tau_grid = tau_grid;
  ds.phi_grid = phi_grid;
  ds.mode_labels = state.mode_labels;
  ds.n_shots = n_shots;
  ds.lo_calibration = detector.lo_calibration();
  ds.allocate();

  const std::size_t n_tau = ds.n_tau(), n_phi = ds.n_phi(), n_modes = ds.n_modes();

  std::vector<KerrModeTables> kerr(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    const ModeState& ms = state.mode(m);
    if (ms.kind != StateKind::kerr) continue;
    auto& k = kerr[m];
    const auto& coh = ms.kerr.coherent;
    const int nmax = ms.kerr.nmax > 0 ? ms.kerr.nmax : fock::default_nmax(coh.n_mean);
    const double extent = std::sqrt(2.0 * coh.n_mean) + 6.0;
    k.xs.resize(kTablePoints);
    for (std::size_t i = 0; i < kTablePoints; ++i)
      k.xs[i] = -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(kTablePoints - 1);
    k.hermite.resize(static_cast<Eigen::Index>(kTablePoints), nmax + 1);
    std::vector<double> h(static_cast<std::size_t>(nmax + 1));
    for (std::size_t i = 0; i < kTablePoints; ++i) {
      hermite_functions(k.xs[i], h);
      for (int n = 0; n <= nmax; ++n) k.hermite(static_cast<Eigen::Index>(i), n) = h[static_cast<std::size_t>(n)];
    }
    k.amps.resize(n_tau);
    for (std::size_t t = 0; t < n_tau; ++t) {
      const double chi = ms.kerr.chi_bar + (state.chi_of_tau.empty() ? 0.0 : state.chi_of_tau[t]);
      k.amps[t] = fock::kerr_density_matrix(coh, fock::KerrCoupling(chi), nmax).amplitudes;
    }
  }

  const double cal = ds.lo_calibration;
  parallel_for(n_phi * n_modes, [&](std::size_t begin, std::size_t end) {
    std::vector<double> variate(n_shots), hf_phase(n_shots);
    for (std::size_t cell = begin; cell < end; ++cell) {
      const std::size_t f = cell / n_modes, m = cell % n_modes;
      const ModeState& ms = state.mode(m);
      const double phi = phi_grid[f];

      Engine shot_rng = make_engine(seed, {0x73686f74, f, m});
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      for (std::size_t s = 0; s < n_shots; ++s) {
        variate[s] = ms.kind == StateKind::gaussian ? normal(shot_rng) : uniform(shot_rng);
        hf_phase[s] = 2.0 * kPi * uniform(shot_rng);
      }

      for (std::size_t t = 0; t < n_tau; ++t) {
        double* out = &ds.at(t, f, m, 0);
        if (ms.kind == StateKind::gaussian) {
          const Eigen::Vector2d u(std::cos(phi), std::sin(phi));
          const double mu = u.dot(ms.gaussian.mean());
          const double sd = std::sqrt(u.dot(ms.gaussian.covariance() * u));
          for (std::size_t s = 0; s < n_shots; ++s) out[s] = mu + sd * variate[s];
        } else {
          const MarginalTable table = make_table(kerr[m], kerr[m].amps[t], phi);
          for (std::size_t s = 0; s < n_shots; ++s) out[s] = table.quantile(variate[s]);
        }

        if (detector.electronic_noise_sd > 0.0) {
          Engine noise_rng = make_engine(seed, {0x656c6563, t, f, m});
          std::normal_distribution<double> noise(0.0, detector.electronic_noise_sd);
          for (std::size_t s = 0; s < n_shots; ++s) out[s] += noise(noise_rng);
        }
        if (detector.hf_amplitude > 0.0) {
          const double w = detector.hf_harmonic * detector.omega0 * tau_grid[t];
          for (std::size_t s = 0; s < n_shots; ++s) out[s] += detector.hf_amplitude * std::sin(w + hf_phase[s]);
        }
        for (std::size_t s = 0; s < n_shots; ++s) out[s] *= cal;
      }
    }
  });

  ds.extra["synthetic"] = "true";
  return ds;
}

}  // namespace sqz::synth
