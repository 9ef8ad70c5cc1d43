#include "sqz/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace sqz::tomo {

void BinSpec::validate() const {
  if (!std::isfinite(s_min) || !std::isfinite(s_max) || !(s_max > s_min))
    throw InvalidArgument("bin range must be finite with s_max > s_min");
  if (n_bins < 2) throw InvalidArgument("need at least 2 quadrature bins");
}

BinSpec covering_bins(const HomodyneDataset& ds, std::size_t tau_idx, std::size_t mode_idx, std::size_t n_bins) {
  if (tau_idx >= ds.n_tau() || mode_idx >= ds.n_modes()) throw InvalidArgument("cell index out of range");
  double extent = 0.0;
  for (std::size_t f = 0; f < ds.n_phi(); ++f)
    for (std::size_t s = 0; s < ds.n_shots; ++s)
      extent = std::max(extent, std::abs(ds.at(tau_idx, f, mode_idx, s)) / ds.lo_calibration);
  if (!(extent > 0.0)) extent = 1.0;
  // Solve for a bin width that leaves one spare bin on each side.
  const double width = 2.0 * extent / static_cast<double>(n_bins - 2);
  const double half = 0.5 * width * static_cast<double>(n_bins);
  return {-half, half, n_bins};
}

QuadraturePDF histogram(const std::vector<double>& phi, const std::vector<std::vector<double>>& samples,
                        const BinSpec& bins) {
  bins.validate();
  if (phi.size() != samples.size()) throw InvalidArgument("one sample vector per phase required");
  QuadraturePDF pdf;
  pdf.phi = phi;
  pdf.bin_edges.resize(bins.n_bins + 1);
  for (std::size_t b = 0; b <= bins.n_bins; ++b)
    pdf.bin_edges[b] = bins.s_min + bins.width() * static_cast<double>(b);
  pdf.pr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(phi.size()), static_cast<Eigen::Index>(bins.n_bins));
  const double inv_w = 1.0 / bins.width();
  for (std::size_t f = 0; f < phi.size(); ++f) {
    std::size_t in_range = 0;
    for (double v : samples[f]) {
      ++pdf.total;
      if (!(v >= bins.s_min && v <= bins.s_max)) {
        ++pdf.out_of_range;
        continue;
      }
      auto b = static_cast<std::size_t>((v - bins.s_min) * inv_w);
      if (b >= bins.n_bins) b = bins.n_bins - 1;
      pdf.pr(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) += 1.0;
      ++in_range;
    }
    if (in_range == 0) throw MissingData("no samples inside the bin range at phase index " + std::to_string(f));
    pdf.pr.row(static_cast<Eigen::Index>(f)) /= static_cast<double>(in_range);
  }
  return pdf;
}

QuadraturePDF build_pdf(const HomodyneDataset& ds, std::size_t tau_idx, std::size_t mode_idx, const BinSpec& bins) {
  if (tau_idx >= ds.n_tau()) throw MissingData("delay index " + std::to_string(tau_idx) + " not in dataset");
  if (mode_idx >= ds.n_modes()) throw MissingData("mode index " + std::to_string(mode_idx) + " not in dataset");
  if (ds.n_shots == 0 || ds.n_phi() == 0) throw MissingData("dataset cell is empty");
  std::vector<std::vector<double>> samples(ds.n_phi());
  for (std::size_t f = 0; f < ds.n_phi(); ++f) {
    samples[f].resize(ds.n_shots);
    for (std::size_t s = 0; s < ds.n_shots; ++s) samples[f][s] = ds.at(tau_idx, f, mode_idx, s) / ds.lo_calibration;
  }
  return histogram(ds.phi_grid, samples, bins);
}

double default_cutoff(const QuadraturePDF& pdf) { return 0.8 * kPi / pdf.bin_width(); }

namespace {

// Antiderivative of the band-limited ramp kernel K(u) = int_{-kc}^{kc} |eta| e^{i eta u} d eta.
double ramp_antiderivative(double u, double kc) {
  const double x = kc * u;
  if (std::abs(x) < 1e-4) return kc * x * (1.0 - x * x / 12.0);
  const double s = std::sin(0.5 * x);
  return 4.0 * s * s / u;
}

// Backprojection weight per phase: half the gap to each neighbour on the
// half-turn circle (phi and phi + pi are the same projection).
std::vector<double> phase_weights(const std::vector<double>& phi) {
  const std::size_t n = phi.size();
  std::vector<double> folded(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = std::fmod(phi[i], kPi);
    if (f < 0) f += kPi;
    folded[i] = f;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return folded[a] < folded[b]; });
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double prev = k == 0 ? folded[order[n - 1]] - kPi : folded[order[k - 1]];
    const double next = k + 1 == n ? folded[order[0]] + kPi : folded[order[k + 1]];
    w[order[k]] = 0.5 * (next - prev);
  }
  return w;
}

}  // namespace

WignerGrid inverse_radon(const QuadraturePDF& pdf, const GridSpec& grid, std::optional<double> kc_opt) {
  grid.validate();
  const std::size_t n_phi = pdf.phi.size();
  {
    std::vector<double> distinct = pdf.phi;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 8)
      throw InvalidArgument("inverse Radon needs at least 8 distinct phases, got " + std::to_string(distinct.size()));
  }
  const double ds = pdf.bin_width();
  const double kc = kc_opt.value_or(default_cutoff(pdf));
  if (!(kc > 0.0) || !std::isfinite(kc)) throw InvalidArgument("ramp cutoff kc must be positive");
  if (kc > kPi / ds * (1.0 + 1e-12))
    throw InvalidArgument("ramp cutoff " + format_double(kc) + " exceeds the bin Nyquist limit " +
                          format_double(kPi / ds));

  // Filtered projections are tabulated on a lattice of spacing ds/K aligned
  // with the bin edges, so the kernel is evaluated once per lattice offset.
  constexpr long K = 8;
  const double h = ds / static_cast<double>(K);
  const double radius = std::sqrt(std::max(grid.x_min * grid.x_min, grid.x_max * grid.x_max) +
                                  std::max(grid.p_min * grid.p_min, grid.p_max * grid.p_max));
  const double s_min = pdf.bin_edges.front();
  const long i_start = static_cast<long>(std::floor((-radius - s_min) / h)) - 1;
  const long n_t = static_cast<long>(std::ceil(2.0 * radius / h)) + 4;
  const long n_edges = static_cast<long>(pdf.n_bins()) + 1;
  const long l_min = i_start - (n_edges - 1) * K;
  const long l_max = i_start + n_t;
  std::vector<double> kernel(static_cast<std::size_t>(l_max - l_min + 1));
  for (long l = l_min; l <= l_max; ++l)
    kernel[static_cast<std::size_t>(l - l_min)] = ramp_antiderivative(static_cast<double>(l) * h, kc);

  const std::vector<double> weights = phase_weights(pdf.phi);
  const double t0 = s_min + static_cast<double>(i_start) * h;
  const double norm = 1.0 / (4.0 * kPi * kPi * ds);

  // q(t) = norm * sum_j F(t - e_j) (p_j - p_{j-1}), with p_{-1} = p_n = 0.
  std::vector<std::vector<double>> q(n_phi, std::vector<double>(static_cast<std::size_t>(n_t)));
  parallel_for(n_phi, [&](std::size_t begin, std::size_t end) {
    std::vector<double> dp(static_cast<std::size_t>(n_edges));
    for (std::size_t f = begin; f < end; ++f) {
      const auto row = pdf.pr.row(static_cast<Eigen::Index>(f));
      for (long j = 0; j < n_edges; ++j) {
        const double cur = j < n_edges - 1 ? row(j) : 0.0;
        const double prev = j > 0 ? row(j - 1) : 0.0;
        dp[static_cast<std::size_t>(j)] = cur - prev;
      }
      for (long i = 0; i < n_t; ++i) {
        double acc = 0.0;
        for (long j = 0; j < n_edges; ++j) {
          const double d = dp[static_cast<std::size_t>(j)];
          if (d != 0.0) acc += d * kernel[static_cast<std::size_t>(i + i_start - j * K - l_min)];
        }
        q[f][static_cast<std::size_t>(i)] = acc * norm * weights[f];
      }
    }
  });

  WignerGrid w;
  w.grid = grid;
  w.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.nx), static_cast<Eigen::Index>(grid.np));
  std::vector<double> cs(n_phi), sn(n_phi);
  for (std::size_t f = 0; f < n_phi; ++f) {
    cs[f] = std::cos(pdf.phi[f]);
    sn[f] = std::sin(pdf.phi[f]);
  }
  parallel_for(grid.nx, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double x = grid.x(i);
      for (std::size_t j = 0; j < grid.np; ++j) {
        const double p = grid.p(j);
        double acc = 0.0;
        for (std::size_t f = 0; f < n_phi; ++f) {
          const double pos = (x * cs[f] + p * sn[f] - t0) / h;
          auto k = static_cast<long>(std::floor(pos));
          k = std::clamp(k, 0L, n_t - 2);
          const double frac = pos - static_cast<double>(k);
          const auto& qf = q[f];
          acc += qf[static_cast<std::size_t>(k)] * (1.0 - frac) + qf[static_cast<std::size_t>(k + 1)] * frac;
        }
        w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
      }
    }
  });
  return w;
}

// ---------------------------------------------------------------------------
// Gaussian fit

namespace {

using Params = Eigen::Matrix<double, 6, 1>;  // A, d1, d2, ln v1, ln v2, theta

struct FitData {
  std::vector<double> x, p, w;
  double scale = 1.0;  // max |W|
};

double model_value(const Params& q, double x, double p) {
  const double c = std::cos(q(5)), s = std::sin(q(5));
  const double u1 = c * x - s * p - q(1);
  const double u2 = s * x + c * p - q(2);
  return q(0) * std::exp(-0.5 * (u1 * u1 * std::exp(-q(3)) + u2 * u2 * std::exp(-q(4))));
}

double cost(const FitData& d, const Params& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double r = model_value(q, d.x[i], d.p[i]) - d.w[i];
    acc += r * r;
  }
  return acc;
}

struct LmResult {
  Params q;
  double cost = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

LmResult levenberg_marquardt(const FitData& d, Params q) {
  LmResult res;
  double lambda = 1e-3;
  double c0 = cost(d, q);
  const std::size_t n = d.x.size();
  for (int it = 0; it < 500; ++it) {
    res.iterations = it + 1;
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Params jtr = Params::Zero();
    const double c = std::cos(q(5)), s = std::sin(q(5));
    const double iv1 = std::exp(-q(3)), iv2 = std::exp(-q(4));
    for (std::size_t i = 0; i < n; ++i) {
      const double r1 = c * d.x[i] - s * d.p[i];
      const double r2 = s * d.x[i] + c * d.p[i];
      const double u1 = r1 - q(1), u2 = r2 - q(2);
      const double e = std::exp(-0.5 * (u1 * u1 * iv1 + u2 * u2 * iv2));
      const double g = q(0) * e;
      Params j;
      j(0) = e;
      j(1) = g * u1 * iv1;
      j(2) = g * u2 * iv2;
      j(3) = 0.5 * g * u1 * u1 * iv1;
      j(4) = 0.5 * g * u2 * u2 * iv2;
      j(5) = -g * (-u1 * r2 * iv1 + u2 * r1 * iv2);
      const double r = g - d.w[i];
      jtj.selfadjointView<Eigen::Lower>().rankUpdate(j);
      jtr += j * r;
    }
    jtj = jtj.selfadjointView<Eigen::Lower>();
    if (jtr.norm() <= 1e-15 * std::max(1.0, d.scale * d.scale)) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Params step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Params trial = q + step;
      const double c1 = cost(d, trial);
      if (std::isfinite(c1) && c1 <= c0) {
        const double rel = (c0 - c1) / std::max(c0, 1e-300);
        const double step_size = step.cwiseAbs().maxCoeff();
        q = trial;
        c0 = c1;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < 1e-14 || step_size < 1e-13) res.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No downhill step at any damping: a stationary point to precision.
      res.converged = true;
    }
    if (res.converged) break;
  }
  res.q = q;
  res.cost = c0;
  return res;
}

// theta' = theta + pi/2 maps (r1, r2) -> (-r2, r1).
void rotate_quarter(GaussianFit& f) {
  std::swap(f.v1, f.v2);
  const double d1 = f.d1;
  f.d1 = -f.d2;
  f.d2 = d1;
  f.theta += 0.5 * kPi;
}

}  // namespace

void canonicalize(GaussianFit& fit) {
  const double quarter = 0.5 * kPi;
  const double k = std::floor(fit.theta / quarter);
  long turns = static_cast<long>(k);
  // Going down by a quarter is three quarters up modulo a full turn.
  double base = fit.theta - k * quarter;
  if (base >= quarter) {
    base -= quarter;
    ++turns;
  }
  if (base < 0.0) base = 0.0;
  const long ups = ((-turns) % 4 + 4) % 4;
  for (long i = 0; i < ups; ++i) rotate_quarter(fit);
  fit.theta = base;
}

WignerGrid render(const GaussianFit& fit, const GridSpec& grid) {
  grid.validate();
  Params q;
  q << fit.amplitude, fit.d1, fit.d2, std::log(fit.v1), std::log(fit.v2), fit.theta;
  WignerGrid w;
  w.grid = grid;
  w.values.resize(static_cast<Eigen::Index>(grid.nx), static_cast<Eigen::Index>(grid.np));
  for (std::size_t i = 0; i < grid.nx; ++i)
    for (std::size_t j = 0; j < grid.np; ++j)
      w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = model_value(q, grid.x(i), grid.p(j));
  return w;
}

GaussianFit fit_gaussian2d(const WignerGrid& w) {
  w.grid.validate();
  if (!w.values.allFinite()) throw InvalidArgument("Wigner grid contains non-finite values");
  FitData d;
  const std::size_t n = w.grid.nx * w.grid.np;
  d.x.reserve(n);
  d.p.reserve(n);
  d.w.reserve(n);
  double s0 = 0.0, sx = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < w.grid.nx; ++i)
    for (std::size_t j = 0; j < w.grid.np; ++j) {
      const double v = w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      d.x.push_back(w.grid.x(i));
      d.p.push_back(w.grid.p(j));
      d.w.push_back(v);
      if (v > 0) {
        s0 += v;
        sx += v * w.grid.x(i);
        sp += v * w.grid.p(j);
      }
    }
  d.scale = w.values.cwiseAbs().maxCoeff();
  if (!(s0 > 0.0) || !(d.scale > 0.0)) throw FitFailure("Wigner grid has no positive lobe", 1.0);

  // Moment seed from the positive part.
  const double mx = sx / s0, mp = sp / s0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    if (d.w[k] <= 0) continue;
    const Eigen::Vector2d r(d.x[k] - mx, d.p[k] - mp);
    cov += d.w[k] * r * r.transpose();
  }
  cov /= s0;
  const double floor_var = 0.25 * std::max(w.grid.dx(), w.grid.dp()) * std::max(w.grid.dx(), w.grid.dp());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const Eigen::Vector2d e1 = es.eigenvectors().col(1);
  const double va = std::max(es.eigenvalues()(1), floor_var);
  const double vb = std::max(es.eigenvalues()(0), floor_var);
  // Lab covariance = R^T diag R, so the first rotated axis is (cos, -sin).
  const double theta0 = std::atan2(-e1(1), e1(0));
  auto seed = [&](double theta, double v1, double v2) {
    const double c = std::cos(theta), s = std::sin(theta);
    Params q;
    q << d.scale, c * mx - s * mp, s * mx + c * mp, std::log(v1), std::log(v2), theta;
    return q;
  };
  const std::array<Params, 5> seeds{seed(theta0, va, vb), seed(theta0 + 0.25 * kPi, va, vb),
                                    seed(theta0 - 0.25 * kPi, va, vb), seed(theta0, 1.5 * va, 1.5 * vb),
                                    seed(theta0 + 0.5 * kPi, va, vb)};

  LmResult best;
  bool any_converged = false;
  for (const auto& s : seeds) {
    LmResult r = levenberg_marquardt(d, s);
    if (!r.q.allFinite() || !std::isfinite(r.cost)) continue;
    if (r.converged) any_converged = true;
    if (r.cost < best.cost) best = r;
  }
  const double rms = std::sqrt(best.cost / static_cast<double>(n)) / d.scale;
  if (!any_converged || !best.q.allFinite())
    throw FitFailure("Gaussian fit did not converge after restarts (best residual " + format_double(rms) + ")", rms);

  GaussianFit fit;
  fit.amplitude = best.q(0);
  fit.d1 = best.q(1);
  fit.d2 = best.q(2);
  fit.v1 = std::exp(best.q(3));
  fit.v2 = std::exp(best.q(4));
  fit.theta = best.q(5);
  fit.residual = rms;
  fit.iterations = best.iterations;
  canonicalize(fit);
  fit.degenerate = std::abs(fit.v1 - fit.v2) < kDegenerateTolerance * std::max(fit.v1, fit.v2);
  return fit;
}

SqueezingMetrics squeezing_metrics(const GaussianFit& fit, double reference, const WignerGrid* w) {
  if (!(reference > 0.0)) throw InvalidArgument("shot-noise reference variance must be positive");
  SqueezingMetrics m;
  m.db_min = 10.0 * std::log10(fit.v_min() / reference);
  m.db_max = 10.0 * std::log10(fit.v_max() / reference);
  if (w) m.negativity_volume = w->negativity_volume();
  return m;
}

double calibrate_lo(const HomodyneDataset& reference, std::size_t tau_idx, std::size_t mode_idx) {
  if (tau_idx >= reference.n_tau() || mode_idx >= reference.n_modes())
    throw MissingData("calibration cell not in dataset");
  double acc = 0.0;
  for (std::size_t f = 0; f < reference.n_phi(); ++f) {
    double mean = 0.0;
    for (std::size_t s = 0; s < reference.n_shots; ++s) mean += reference.at(tau_idx, f, mode_idx, s);
    mean /= static_cast<double>(reference.n_shots);
    double var = 0.0;
    for (std::size_t s = 0; s < reference.n_shots; ++s) {
      const double r = reference.at(tau_idx, f, mode_idx, s) - mean;
      var += r * r;
    }
    acc += var / static_cast<double>(reference.n_shots - 1);
  }
  const double raw_var = acc / static_cast<double>(reference.n_phi());
  if (!(raw_var > 0.0)) throw InvalidArgument("reference dataset has zero variance");
  return std::sqrt(raw_var / kVacuumVariance);
}

}  // namespace sqz::tomo
