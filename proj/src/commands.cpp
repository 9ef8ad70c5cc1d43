#include "sqz/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "sqz/binary_io.hpp"
#include "sqz/dataset.hpp"
#include "sqz/fockstate.hpp"
#include "sqz/modes.hpp"
#include "sqz/sigproc.hpp"
#include "sqz/synth.hpp"
#include "sqz/tomography.hpp"
#include "sqz/twa.hpp"

namespace sqz::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Output bookkeeping

class Run {
 public:
  Run(std::string command, const RunOptions& opts) : command_(std::move(command)), opts_(opts), out_(opts.out_dir) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) throw IoError("cannot create output directory " + out_.string());
    std::ofstream os(out_ / "config.resolved", std::ios::binary);
    if (!os) throw IoError("cannot write " + (out_ / "config.resolved").string());
    os << "# resolved configuration for: " << command_ << '\n';
    opts.config.write(os);
  }

  /// Absolute path for a relative output name; registers it.
  std::string path(const std::string& rel) {
    const fs::path p = out_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    outputs_.push_back(rel);
    return p.string();
  }

  /// Absolute path for a multi-file prefix; the files are registered by add_written.
  std::string prefix(const std::string& rel) {
    const fs::path p = out_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    return p.string();
  }

  void add_written(const std::vector<std::string>& abs_paths) {
    for (const auto& a : abs_paths) outputs_.push_back(fs::relative(a, out_).generic_string());
  }

  std::ofstream open(const std::string& rel) {
    const std::string p = path(rel);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cannot write " + p);
    return os;
  }

  RunResult finish(const std::string& status) {
    std::sort(outputs_.begin(), outputs_.end());
    outputs_.erase(std::unique(outputs_.begin(), outputs_.end()), outputs_.end());
    Manifest m;
    m["tool"] = "sqz";
    m["version"] = kToolVersion;
    m["command"] = command_;
    m["status"] = status;
    m["seed"] = opts_.config.get("output", "seed");
    m["config"] = "config.resolved";
    m["config_sha256"] = sha256_file((out_ / "config.resolved").string());
    for (std::size_t i = 0; i < opts_.inputs.size(); ++i) {
      m["input." + std::to_string(i)] = opts_.inputs[i];
      m["input." + std::to_string(i) + ".sha256"] = digest_input(opts_.inputs[i]);
    }
    for (const auto& o : outputs_) {
      const fs::path p = out_ / o;
      if (fs::exists(p)) m["output." + o] = sha256_file(p.string());
    }
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["wall_clock_s"] = format_double(elapsed);
    save_manifest((out_ / "run.manifest").string(), m);
    return RunResult{outputs_};
  }

 private:
  static std::string digest_input(const std::string& in) {
    if (fs::is_regular_file(in)) return sha256_file(in);
    if (fs::is_regular_file(in + ".manifest")) {
      std::string acc = sha256_file(in + ".manifest");
      for (const char* ext : {".bin", ".txt"})
        if (fs::is_regular_file(in + ext)) acc += sha256_file(in + ext);
      return sha256_hex(acc);
    }
    return "missing";
  }

  std::string command_;
  const RunOptions& opts_;
  fs::path out_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunResult execute(const std::string& name, const RunOptions& opts, const std::function<void(Run&)>& body) {
  Run run(name, opts);
  try {
    body(run);
  } catch (...) {
    try {
      run.finish("failed");
    } catch (...) {
    }
    throw;
  }
  return run.finish("ok");
}

/// Rethrows with the stage name prepended, keeping the error category.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  const std::string p = "stage " + name + ": ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(p + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(p + e.what());
  } catch (const MissingData& e) {
    throw MissingData(p + e.what());
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(p + e.what());
  } catch (const InternalDefect& e) {
    throw InternalDefect(p + e.what());
  } catch (const IoError& e) {
    throw IoError(p + e.what());
  }
}

std::string fmt(double v) { return format_double(v); }

const std::string& require_input(const RunOptions& opts, std::size_t i, const std::string& what) {
  if (opts.inputs.size() <= i) throw ConfigError("missing input: " + what);
  return opts.inputs[i];
}

// ---------------------------------------------------------------------------
// Config to domain objects

struct Acquisition {
  std::vector<double> tau;
  std::vector<double> phi;
  std::size_t n_shots = 0;
};

Acquisition acquisition(const PipelineConfig& c) {
  Acquisition a;
  const auto n_tau = c.get_u64("detector", "n_tau");
  const auto n_phi = c.get_u64("detector", "n_phi");
  const double t0 = c.get_double("detector", "tau_start");
  const double dt = c.get_double("detector", "tau_step");
  if (n_tau == 0 || n_phi == 0) throw ConfigError("[detector] n_tau and n_phi must be positive");
  if (!(dt > 0.0)) throw ConfigError("[detector] tau_step must be positive");
  for (std::uint64_t t = 0; t < n_tau; ++t) a.tau.push_back(t0 + dt * static_cast<double>(t));
  for (std::uint64_t f = 0; f < n_phi; ++f) a.phi.push_back(kPi * static_cast<double>(f) / static_cast<double>(n_phi));
  a.n_shots = c.get_u64("detector", "n_shots");
  return a;
}

double carrier_omega(const PipelineConfig& c) {
  const double period = c.get_double("detector", "carrier_period_fs");
  if (!(period > 0.0)) throw ConfigError("[detector] carrier_period_fs must be positive");
  return 2.0 * kPi / period;
}

synth::DetectorModel detector_model(const PipelineConfig& c) {
  synth::DetectorModel d;
  d.electronic_noise_sd = c.get_double("detector", "electronic_noise_sd");
  d.hf_amplitude = c.get_double("detector", "hf_amplitude");
  d.hf_harmonic = c.get_double("detector", "hf_harmonic");
  d.lo_ratio = c.get_double("detector", "lo_ratio");
  d.omega0 = carrier_omega(c);
  return d;
}

synth::StateSpec state_spec(const PipelineConfig& c, const std::vector<double>& tau) {
  synth::StateSpec s;
  s.mode_labels = c.get_doubles("state", "mode_labels");
  synth::ModeState m;
  const auto& kind = c.get("state", "kind");
  if (kind == "gaussian") {
    m.kind = synth::StateKind::gaussian;
    m.gaussian = {c.get_double("state", "v1"), c.get_double("state", "v2"), c.get_double("state", "theta"),
                  c.get_double("state", "d1"), c.get_double("state", "d2")};
  } else if (kind == "kerr") {
    m.kind = synth::StateKind::kerr;
    m.kerr.coherent = fock::CoherentSpec(cplx(c.get_double("state", "alpha_re"), c.get_double("state", "alpha_im")));
    m.kerr.chi_bar = c.get_double("state", "chi_bar");
    m.kerr.nmax = static_cast<int>(c.get_int("state", "nmax"));
    s.chi_of_tau = synth::chi_modulation_profile(tau, c.get_double("state", "chi_amplitude"),
                                                 c.get_double("state", "chi_period_fs"),
                                                 c.get_double("state", "chi_phase"));
  } else {
    throw ConfigError("[state] kind must be gaussian or kerr, got '" + kind + "'");
  }
  s.modes.push_back(m);
  return s;
}

sig::NrmOptions nrm_options(const PipelineConfig& c) {
  sig::NrmOptions o;
  o.cutoff_factor = c.get_double("sigproc", "cutoff_factor");
  const auto& edge = c.get("sigproc", "edge");
  if (edge == "hard") {
    o.edge = sig::FilterEdge::hard;
  } else if (edge == "raised_cosine") {
    o.edge = sig::FilterEdge::raised_cosine;
  } else {
    throw ConfigError("[sigproc] edge must be hard or raised_cosine");
  }
  o.edge_width = c.get_double("sigproc", "edge_width");
  return o;
}

sig::WelchOptions welch_options(const PipelineConfig& c) {
  sig::WelchOptions w;
  w.segment = c.get_u64("sigproc", "segment");
  w.overlap = c.get_double("sigproc", "overlap");
  w.window = c.get("sigproc", "window");
  return w;
}

DataFormat data_format(const PipelineConfig& c) { return parse_data_format(c.get("output", "format")); }

GridSpec tomo_grid(const PipelineConfig& c) {
  return GridSpec::symmetric(c.get_double("tomography", "grid_extent"), c.get_u64("tomography", "grid_points"));
}

twa::PropagationConfig twa_config(const PipelineConfig& c) {
  twa::PropagationConfig p;
  p.nz = c.get_u64("twa", "nz");
  p.z_extent = c.get_double("twa", "z_extent");
  p.dt = c.get_double("twa", "dt");
  p.t_final = c.get_double("twa", "t_final");
  p.vg = c.get_double("twa", "vg");
  p.beta2 = c.get_double("twa", "beta2");
  p.chi_e = c.get_double("twa", "chi_e");
  p.n_traj = c.get_u64("twa", "n_traj");
  p.seed = c.get_u64("output", "seed");
  p.validate();
  return p;
}

std::vector<cplx> twa_shape(const PipelineConfig& c, const twa::PropagationConfig& p) {
  const auto& shape = c.get("twa", "shape");
  if (shape == "flat") return twa::flat_shape(p.nz, p.z_extent);
  if (shape == "gaussian")
    return twa::gaussian_shape(p.nz, p.z_extent, c.get_double("twa", "pulse_center") * p.z_extent,
                               c.get_double("twa", "pulse_width") * p.z_extent);
  throw ConfigError("[twa] shape must be flat or gaussian, got '" + shape + "'");
}

// ---------------------------------------------------------------------------
// Shared stages

struct CellFit {
  std::size_t tau_idx = 0, mode_idx = 0;
  double tau = NAN, label = NAN;
  std::string source;
  double normalization = NAN;
  std::size_t out_of_range = 0;
  std::optional<tomo::GaussianFit> fit;
  std::string error;
  tomo::SqueezingMetrics metrics;
};

void write_fit_table(std::ostream& os, const std::vector<CellFit>& rows) {
  os << "tau_idx,mode_idx,tau_fs,label_nm,source,v1,v2,theta,d1,d2,amplitude,residual,degenerate,non_gaussian,"
        "below_uncertainty,db_min,db_max,negativity,normalization,out_of_range,error\n";
  for (const auto& r : rows) {
    os << r.tau_idx << ',' << r.mode_idx << ',' << fmt(r.tau) << ',' << fmt(r.label) << ',' << r.source << ',';
    if (r.fit) {
      const auto& f = *r.fit;
      os << fmt(f.v1) << ',' << fmt(f.v2) << ',' << fmt(f.theta) << ',' << fmt(f.d1) << ',' << fmt(f.d2) << ','
         << fmt(f.amplitude) << ',' << fmt(f.residual) << ',' << (f.degenerate ? 1 : 0) << ','
         << (f.residual > tomo::kGaussianResidualThreshold ? 1 : 0) << ',' << (f.below_uncertainty_floor() ? 1 : 0) << ','
         << fmt(r.metrics.db_min) << ','
         << fmt(r.metrics.db_max) << ',' << fmt(r.metrics.negativity_volume.value_or(NAN));
    } else {
      os << "nan,nan,nan,nan,nan,nan,nan,0,0,0,nan,nan,nan";
    }
    os << ',' << fmt(r.normalization) << ',' << r.out_of_range << ',' << r.error << '\n';
  }
}

std::string grid_name(std::size_t t, std::size_t m) {
  return "wigner/w_t" + std::to_string(t) + "_m" + std::to_string(m) + ".txt";
}

/// Reconstructs every (tau, mode) cell, optionally writing grids, and fits.
std::vector<CellFit> reconstruct_and_fit(const HomodyneDataset& ds, const PipelineConfig& c, Run& run,
                                         bool write_grids, bool fit) {
  const auto n_bins = c.get_u64("tomography", "n_bins");
  const double extent = c.get_double("tomography", "bin_extent");
  const double kc = c.get_double("tomography", "kc");
  const double reference = c.get_double("tomography", "shot_noise");
  const GridSpec grid = tomo_grid(c);
  std::vector<CellFit> rows;
  for (std::size_t t = 0; t < ds.n_tau(); ++t)
    for (std::size_t m = 0; m < ds.n_modes(); ++m) {
      CellFit row;
      row.tau_idx = t;
      row.mode_idx = m;
      row.tau = ds.tau_grid[t];
      row.label = ds.mode_labels[m];
      const tomo::BinSpec bins =
          extent > 0.0 ? tomo::BinSpec{-extent, extent, n_bins} : tomo::covering_bins(ds, t, m, n_bins);
      const auto pdf = tomo::build_pdf(ds, t, m, bins);
      row.out_of_range = pdf.out_of_range;
      const WignerGrid w = tomo::inverse_radon(pdf, grid, kc > 0.0 ? std::optional<double>(kc) : std::nullopt);
      row.normalization = w.normalization();
      if (write_grids) {
        row.source = grid_name(t, m);
        save_wigner(run.path(row.source), w);
      }
      if (fit) {
        try {
          row.fit = tomo::fit_gaussian2d(w);
          row.metrics = tomo::squeezing_metrics(*row.fit, reference, &w);
        } catch (const tomo::FitFailure& e) {
          // Reported per cell; one bad cell does not abort the table.
          row.error = "fit-failure";
        }
      }
      rows.push_back(std::move(row));
    }
  return rows;
}

modes::QuadratureSamples dataset_quadratures(const HomodyneDataset& ds, std::size_t t) {
  // Nearest phases to 0 and pi/2 supply X and P; different shots, so cross
  // terms reduce to products of means.
  auto nearest = [&](double target) {
    std::size_t best = 0;
    double dist = INFINITY;
    for (std::size_t f = 0; f < ds.n_phi(); ++f) {
      const double d = std::abs(std::remainder(ds.phi_grid[f] - target, 2.0 * kPi));
      if (d < dist) {
        dist = d;
        best = f;
      }
    }
    return best;
  };
  const std::size_t fx = nearest(0.0), fp = nearest(0.5 * kPi);
  modes::QuadratureSamples q;
  q.x.resize(static_cast<Eigen::Index>(ds.n_modes()), static_cast<Eigen::Index>(ds.n_shots));
  q.p.resize(q.x.rows(), q.x.cols());
  for (std::size_t m = 0; m < ds.n_modes(); ++m)
    for (std::size_t s = 0; s < ds.n_shots; ++s) {
      q.x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(s)) = ds.at(t, fx, m, s) / ds.lo_calibration;
      q.p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(s)) = ds.at(t, fp, m, s) / ds.lo_calibration;
    }
  q.mode_labels = ds.mode_labels;
  return q;
}

Eigen::MatrixXcd covariance_block(const modes::CovarianceMatrix& cov) {
  const auto n = cov.xx.rows();
  Eigen::MatrixXcd b(2 * n, 2 * n);
  b.topLeftCorner(n, n) = cov.xx.cast<cplx>();
  b.topRightCorner(n, n) = cov.xp.cast<cplx>();
  b.bottomLeftCorner(n, n) = cov.px.cast<cplx>();
  b.bottomRightCorner(n, n) = cov.pp.cast<cplx>();
  return b;
}

void write_eigenvalues(std::ostream& os, const modes::ModeDecomposition& d) {
  os << "index,eigenvalue,fraction\n";
  const double total = d.eigenvalues.sum();
  for (Eigen::Index i = 0; i < d.eigenvalues.size(); ++i)
    os << i << ',' << fmt(d.eigenvalues(i)) << ',' << fmt(d.eigenvalues(i) / total) << '\n';
}

/// Coherency per delay point of a dataset.
void correlate_dataset(const HomodyneDataset& ds, Run& run) {
  auto summary = run.open("corr_summary.csv");
  summary << "tau_idx,tau_fs,trace,lambda1,dominance,leading_min_abs,leading_max_abs\n";
  for (std::size_t t = 0; t < ds.n_tau(); ++t) {
    const auto q = dataset_quadratures(ds, t);
    const auto cov = modes::covariance(q, false);
    const auto gamma = modes::coherency_from_quadratures(cov, true);
    const auto dec = modes::principal_modes(gamma);
    const std::string tag = "_t" + std::to_string(t);
    modes::save_matrix(run.path("corr/covariance" + tag + ".txt"), "covariance", covariance_block(cov));
    modes::save_matrix(run.path("corr/coherency" + tag + ".txt"), "coherency", gamma.gamma);
    modes::save_matrix(run.path("corr/eigenvectors" + tag + ".txt"), "eigenvectors", dec.eigenvectors);
    {
      auto os = run.open("corr/eigenvalues" + tag + ".csv");
      write_eigenvalues(os, dec);
    }
    const Eigen::VectorXd lead = dec.eigenvectors.col(0).cwiseAbs();
    summary << t << ',' << fmt(ds.tau_grid[t]) << ',' << fmt(gamma.gamma.trace().real()) << ','
            << fmt(dec.eigenvalues(0)) << ',' << fmt(dec.dominance()) << ',' << fmt(lead.minCoeff()) << ','
            << fmt(lead.maxCoeff()) << '\n';
  }
}

struct RinRow {
  std::string stream;
  double band_rin = NAN;
};

sig::SpectrumEstimate shot_spectrum(const HomodyneDataset& ds, const PipelineConfig& c) {
  const auto t = c.get_u64("sigproc", "rin_tau_index");
  const auto f = c.get_u64("sigproc", "rin_phi_index");
  const auto m = c.get_u64("sigproc", "rin_mode_index");
  if (t >= ds.n_tau() || f >= ds.n_phi() || m >= ds.n_modes()) throw MissingData("RIN cell index not in dataset");
  std::vector<double> shots(ds.n_shots);
  for (std::size_t s = 0; s < ds.n_shots; ++s) shots[s] = ds.at(t, f, m, s);
  return sig::psd(shots, c.get_double("detector", "frame_rate"), welch_options(c));
}

void rin_report(const std::vector<std::pair<std::string, const HomodyneDataset*>>& streams, const PipelineConfig& c,
                Run& run) {
  const double lo = c.get_double("sigproc", "band_low");
  const double hi = c.get_double("sigproc", "band_high");
  auto report = run.open("rin_report.csv");
  report << "stream,band_low_hz,band_high_hz,band_rin_db\n";
  std::vector<double> values;
  for (const auto& [name, ds] : streams) {
    const auto spec = shot_spectrum(*ds, c);
    {
      auto os = run.open("spectrum_" + name + ".csv");
      sig::write_spectrum(os, spec);
    }
    const double v = sig::band_average_rin(spec, lo, hi);
    values.push_back(v);
    report << name << ',' << fmt(lo) << ',' << fmt(hi) << ',' << fmt(v) << '\n';
  }
  if (values.size() == 2)
    report << streams[1].first << "-minus-" << streams[0].first << ',' << fmt(lo) << ',' << fmt(hi) << ','
           << fmt(values[1] - values[0]) << '\n';
}

HomodyneDataset synthesize(const PipelineConfig& c, Run& run, const std::string& name) {
  const auto acq = acquisition(c);
  const auto state = state_spec(c, acq.tau);
  const auto det = detector_model(c);
  const auto seed = c.get_u64("output", "seed");
  HomodyneDataset ds = synth::sample_homodyne(state, acq.tau, acq.phi, acq.n_shots, det, seed);

  Manifest prov;
  prov["synthetic"] = "true";
  prov["seed"] = std::to_string(seed);
  prov["state.kind"] = c.get("state", "kind");
  for (const char* k : {"alpha_re", "alpha_im", "chi_bar", "nmax", "v1", "v2", "theta", "d1", "d2", "chi_amplitude",
                        "chi_period_fs", "chi_phase"})
    prov[std::string("state.") + k] = c.get("state", k);
  prov["state.chi_of_tau"] = join_doubles(state.chi_of_tau);
  prov["detector.electronic_noise_sd"] = fmt(det.electronic_noise_sd);
  prov["detector.hf_amplitude"] = fmt(det.hf_amplitude);
  prov["detector.hf_harmonic"] = fmt(det.hf_harmonic);
  prov["detector.omega0"] = fmt(det.omega0);
  prov["detector.lo_ratio"] = fmt(det.lo_ratio);
  save_manifest(run.path(name + "_provenance.manifest"), prov);

  ds.extra["provenance"] = name + "_provenance.manifest";
  ds.extra["seed"] = std::to_string(seed);
  if (!state.chi_of_tau.empty()) ds.extra["chi_of_tau"] = join_doubles(state.chi_of_tau);
  run.add_written(save_dataset(run.prefix(name), ds, data_format(c)));
  return ds;
}

HomodyneDataset filter_stage(const HomodyneDataset& ds, const PipelineConfig& c, Run& run, const std::string& name) {
  HomodyneDataset f = sig::nrm_filter_dataset(ds, carrier_omega(c), nrm_options(c));
  run.add_written(save_dataset(run.prefix(name), f, data_format(c)));
  return f;
}

bool is_ensemble(const std::string& prefix) {
  const Manifest m = load_manifest(prefix + ".manifest");
  auto it = m.find("format");
  return it != m.end() && it->second.rfind("sqz-ensemble", 0) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------

RunResult cmd_kerr(const RunOptions& opts) {
  return execute("kerr", opts, [&](Run& run) {
    const auto& c = opts.config;
    const fock::CoherentSpec spec(cplx(c.get_double("state", "alpha_re"), c.get_double("state", "alpha_im")));
    const int nmax_cfg = static_cast<int>(c.get_int("state", "nmax"));
    const int nmax = nmax_cfg > 0 ? nmax_cfg : fock::default_nmax(spec.n_mean);
    const GridSpec grid = fock::covering_grid(spec, c.get_u64("tomography", "grid_points"));

    auto table = run.open("variances.csv");
    table << "index,chi_bar,var_x,var_p,cov_xp,var_x_fock,var_p_fock,cov_xp_fock,v_min,v_max,db_min,wigner_min,"
             "negativity,normalization,grid\n";
    const auto chis = c.get_doubles("state", "chi_list");
    for (std::size_t i = 0; i < chis.size(); ++i) {
      const fock::KerrCoupling chi(chis[i]);
      const auto closed = fock::kerr_variances(spec, chi);
      const auto rho = fock::kerr_density_matrix(spec, chi, nmax);
      const auto exact = fock::fock_quadrature_stats(rho);
      const WignerGrid w = fock::wigner_exact(rho, grid);
      const std::string name = "wigner/kerr_" + std::to_string(i) + ".txt";
      save_wigner(run.path(name), w);
      const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(closed.covariance()).eigenvalues();
      table << i << ',' << fmt(chis[i]) << ',' << fmt(closed.var_x) << ',' << fmt(closed.var_p) << ','
            << fmt(closed.cov_xp) << ',' << fmt(exact.var_x) << ',' << fmt(exact.var_p) << ',' << fmt(exact.cov_xp)
            << ',' << fmt(ev(0)) << ',' << fmt(ev(1)) << ',' << fmt(10.0 * std::log10(ev(0) / kVacuumVariance))
            << ',' << fmt(w.min_value()) << ',' << fmt(w.negativity_volume()) << ',' << fmt(w.normalization()) << ','
            << name << '\n';
    }

    auto fid = run.open("fidelity.csv");
    fid << "chi_bar,fidelity,var_x,var_p,cov_xp\n";
    for (double x : c.get_doubles("state", "fidelity_chi_list")) {
      const fock::KerrCoupling chi(x);
      const auto rho = fock::kerr_density_matrix(spec, chi, nmax);
      const auto stats = fock::fock_quadrature_stats(rho);
      fid << fmt(x) << ',' << fmt(fock::gaussian_fidelity(rho, stats, grid)) << ',' << fmt(stats.var_x) << ','
          << fmt(stats.var_p) << ',' << fmt(stats.cov_xp) << '\n';
    }
  });
}

RunResult cmd_twa(const RunOptions& opts) {
  return execute("twa", opts, [&](Run& run) {
    const auto& c = opts.config;
    const auto pc = twa_config(c);
    const auto shape = twa_shape(c, pc);
    const double n_photons = c.get_double("twa", "n_photons");
    auto ensemble = twa::init_ensemble(twa::CoherentPulse{shape, n_photons}, pc);

    const auto n_snap = c.get_u64("twa", "snapshots");
    if (n_snap < 2) throw ConfigError("[twa] snapshots must be at least 2");
    const std::size_t steps = pc.steps();
    std::vector<std::size_t> snap_steps;
    for (std::uint64_t k = 0; k < n_snap; ++k) {
      const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(steps) /
                                                           static_cast<double>(n_snap - 1)));
      if (snap_steps.empty() || snap_steps.back() != s) snap_steps.push_back(s);
    }

    twa::ModeSet principal;
    principal.dz = pc.dz();
    principal.phi.resize(static_cast<Eigen::Index>(pc.nz), 1);
    for (std::size_t i = 0; i < pc.nz; ++i) principal.phi(static_cast<Eigen::Index>(i), 0) = shape[i];
    principal.validate(1e-9);

    Eigen::MatrixXcd amp(static_cast<Eigen::Index>(snap_steps.size()), static_cast<Eigen::Index>(pc.n_traj));
    twa::propagate_observed(ensemble, pc, snap_steps, [&](std::size_t traj, std::size_t si, const twa::CField& f) {
      amp(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(traj)) = twa::project(f, principal)(0);
    });

    const double chi = twa::effective_single_mode_chi(pc.chi_e, shape, pc.dz());
    const fock::CoherentSpec coherent(cplx(std::sqrt(n_photons), 0.0));
    auto table = run.open("twa_variances.csv");
    table << "step,t,chi_bar,n_chi_bar,var_x_twa,var_p_twa,se_x,se_p,var_x_analytic,var_p_analytic,rel_dev_x,"
             "rel_dev_p\n";
    const double n_traj = static_cast<double>(pc.n_traj);
    for (std::size_t si = 0; si < snap_steps.size(); ++si) {
      const auto row = amp.row(static_cast<Eigen::Index>(si));
      const Eigen::ArrayXd x = row.real().array() * kSqrt2;
      const Eigen::ArrayXd p = row.imag().array() * kSqrt2;
      const double vx = (x - x.mean()).square().sum() / (n_traj - 1.0);
      const double vp = (p - p.mean()).square().sum() / (n_traj - 1.0);
      const double t = pc.dt * static_cast<double>(snap_steps[si]);
      const double chi_bar = chi * t;
      const auto an = fock::kerr_variances(coherent, fock::KerrCoupling(chi_bar));
      table << snap_steps[si] << ',' << fmt(t) << ',' << fmt(chi_bar) << ',' << fmt(chi_bar * n_photons) << ','
            << fmt(vx) << ',' << fmt(vp) << ',' << fmt(vx * std::sqrt(2.0 / (n_traj - 1.0))) << ','
            << fmt(vp * std::sqrt(2.0 / (n_traj - 1.0))) << ',' << fmt(an.var_x) << ',' << fmt(an.var_p) << ','
            << fmt((vx - an.var_x) / an.var_x) << ',' << fmt((vp - an.var_p) / an.var_p) << '\n';
    }

    twa::save_ensemble(run.prefix("ensemble"), ensemble);
    run.add_written({run.prefix("ensemble.manifest"), run.prefix("ensemble.bin")});
    const auto rho = twa::one_body_density_matrix(ensemble);
    modes::save_matrix(run.path("density_matrix.txt"), "one_body", rho.rho_zz);

    const auto ms = twa::plane_wave_modes(pc.nz, pc.z_extent, c.get_ints("twa", "modes"));
    std::vector<double> labels;
    for (int j : c.get_ints("twa", "modes")) labels.push_back(j);
    const auto q = modes::from_mode_quadratures(twa::mode_quadratures(ensemble, ms), labels);
    const auto cov = modes::covariance(q, false);
    const auto gamma = modes::coherency_from_quadratures(cov, true);
    const auto gamma_rho = modes::coherency_from_density_matrix(rho, ms);
    const auto dec = modes::principal_modes(gamma);
    modes::save_matrix(run.path("covariance.txt"), "covariance", covariance_block(cov));
    modes::save_matrix(run.path("coherency.txt"), "coherency", gamma.gamma);
    modes::save_matrix(run.path("coherency_density.txt"), "coherency", gamma_rho.gamma);
    modes::save_matrix(run.path("eigenvectors.txt"), "eigenvectors", dec.eigenvectors);
    auto ev = run.open("eigenvalues.csv");
    write_eigenvalues(ev, dec);
  });
}

RunResult cmd_synth(const RunOptions& opts) {
  return execute("synth", opts, [&](Run& run) { synthesize(opts.config, run, "dataset"); });
}

RunResult cmd_filter(const RunOptions& opts) {
  return execute("filter", opts, [&](Run& run) {
    const auto ds = load_dataset(require_input(opts, 0, "dataset prefix"));
    filter_stage(ds, opts.config, run, "filtered");
  });
}

RunResult cmd_reconstruct(const RunOptions& opts) {
  return execute("reconstruct", opts, [&](Run& run) {
    const auto ds = load_dataset(require_input(opts, 0, "dataset prefix"));
    const auto rows = reconstruct_and_fit(ds, opts.config, run, true, false);
    auto os = run.open("reconstruct.csv");
    os << "tau_idx,mode_idx,tau_fs,label_nm,grid,normalization,out_of_range\n";
    for (const auto& r : rows)
      os << r.tau_idx << ',' << r.mode_idx << ',' << fmt(r.tau) << ',' << fmt(r.label) << ',' << r.source << ','
         << fmt(r.normalization) << ',' << r.out_of_range << '\n';
  });
}

RunResult cmd_fit(const RunOptions& opts) {
  return execute("fit", opts, [&](Run& run) {
    if (opts.inputs.empty()) throw ConfigError("fit needs one or more Wigner grid files");
    const double reference = opts.config.get_double("tomography", "shot_noise");
    const std::regex pattern(R"(w_t(\d+)_m(\d+)\.txt$)");
    std::vector<CellFit> rows;
    for (const auto& in : opts.inputs) {
      const WignerGrid w = load_wigner(in);
      CellFit row;
      row.source = fs::path(in).filename().string();
      std::smatch match;
      if (std::regex_search(row.source, match, pattern)) {
        row.tau_idx = parse_u64(match[1].str());
        row.mode_idx = parse_u64(match[2].str());
      }
      row.normalization = w.normalization();
      try {
        row.fit = tomo::fit_gaussian2d(w);
        row.metrics = tomo::squeezing_metrics(*row.fit, reference, &w);
      } catch (const tomo::FitFailure&) {
        row.error = "fit-failure";
      }
      rows.push_back(std::move(row));
    }
    auto os = run.open("fits.csv");
    write_fit_table(os, rows);
  });
}

RunResult cmd_corr(const RunOptions& opts) {
  return execute("corr", opts, [&](Run& run) {
    const auto& in = require_input(opts, 0, "dataset or ensemble prefix");
    if (is_ensemble(in)) {
      const auto ensemble = twa::load_ensemble(in);
      const auto& pc = ensemble.config;
      const auto idx = opts.config.get_ints("twa", "modes");
      const auto ms = twa::plane_wave_modes(pc.nz, pc.z_extent, idx);
      std::vector<double> labels(idx.begin(), idx.end());
      const auto q = modes::from_mode_quadratures(twa::mode_quadratures(ensemble, ms), labels);
      const auto cov = modes::covariance(q, false);
      const auto gamma = modes::coherency_from_quadratures(cov, true);
      const auto dec = modes::principal_modes(gamma);
      modes::save_matrix(run.path("covariance.txt"), "covariance", covariance_block(cov));
      modes::save_matrix(run.path("coherency.txt"), "coherency", gamma.gamma);
      modes::save_matrix(run.path("eigenvectors.txt"), "eigenvectors", dec.eigenvectors);
      auto ev = run.open("eigenvalues.csv");
      write_eigenvalues(ev, dec);
    } else {
      correlate_dataset(load_dataset(in), run);
    }
  });
}

RunResult cmd_rin(const RunOptions& opts) {
  return execute("rin", opts, [&](Run& run) {
    const auto raw = load_dataset(require_input(opts, 0, "dataset prefix"));
    std::vector<std::pair<std::string, const HomodyneDataset*>> streams{{"raw", &raw}};
    std::optional<HomodyneDataset> filtered;
    if (opts.inputs.size() > 1) {
      filtered = load_dataset(opts.inputs[1]);
      streams.emplace_back("filtered", &*filtered);
    }
    rin_report(streams, opts.config, run);
  });
}

RunResult cmd_pipeline(const RunOptions& opts) {
  return execute("pipeline", opts, [&](Run& run) {
    const auto& c = opts.config;
    const HomodyneDataset raw = stage("synth", [&] { return synthesize(c, run, "dataset"); });
    const bool filtering = c.get_bool("sigproc", "enabled");
    std::optional<HomodyneDataset> filtered;
    if (filtering) filtered = stage("filter", [&] { return filter_stage(raw, c, run, "filtered"); });
    const HomodyneDataset& analysed = filtering ? *filtered : raw;

    const auto rows = stage("reconstruct", [&] {
      return reconstruct_and_fit(analysed, c, run, c.get_bool("tomography", "write_grids"), true);
    });
    stage("fit", [&] {
      auto os = run.open("fits.csv");
      write_fit_table(os, rows);
    });
    stage("corr", [&] { correlate_dataset(analysed, run); });
    stage("rin", [&] {
      std::vector<std::pair<std::string, const HomodyneDataset*>> streams{{"raw", &raw}};
      if (filtering) streams.emplace_back("filtered", &*filtered);
      rin_report(streams, c, run);
    });
  });
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"kerr", "twa", "synth", "filter", "reconstruct",
                                              "fit",  "corr", "rin",  "pipeline"};
  return names;
}

RunResult run_command(const std::string& name, const RunOptions& opts) {
  static const std::map<std::string, RunResult (*)(const RunOptions&)> table{
      {"kerr", cmd_kerr}, {"twa", cmd_twa}, {"synth", cmd_synth}, {"filter", cmd_filter},
      {"reconstruct", cmd_reconstruct}, {"fit", cmd_fit}, {"corr", cmd_corr}, {"rin", cmd_rin},
      {"pipeline", cmd_pipeline}};
  auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
  return it->second(opts);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const MissingData*>(&e)) return 3;
  if (dynamic_cast<const NumericalFailure*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e)) return 5;
  if (dynamic_cast<const InternalDefect*>(&e)) return 6;
  return 1;
}

}  // namespace sqz::cli
