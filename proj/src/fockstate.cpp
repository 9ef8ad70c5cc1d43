#include "sqz/fockstate.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sqz/special.hpp"

namespace sqz::fock {

CoherentSpec::CoherentSpec(cplx a) : alpha(a), n_mean(std::norm(a)) {
  if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw InvalidArgument("coherent amplitude must be finite");
}

KerrCoupling::KerrCoupling(double c) : chi_bar(c) {
  if (!std::isfinite(c)) throw InvalidArgument("chi_bar must be finite");
}

double KerrDensityMatrix::purity() const { return (rho * rho).trace().real(); }

double KerrDensityMatrix::mean_photon_number() const {
  double n = 0.0;
  for (int k = 0; k <= nmax; ++k) n += k * rho(k, k).real();
  return n;
}

void QuadratureStats::validate(double tol) const {
  if (!(var_x > 0.0) || !(var_p > 0.0)) throw InvalidArgument("quadrature variances must be positive");
  const double det = var_x * var_p - cov_xp * cov_xp;
  if (!(det > 0.0)) throw InvalidArgument("quadrature covariance is not positive definite");
  if (det < 0.25 - tol)
    throw InvalidArgument("quadrature covariance violates the uncertainty bound (det = " + format_double(det) + ")");
}

Eigen::Matrix2d QuadratureStats::covariance() const {
  Eigen::Matrix2d s;
  s << var_x, cov_xp, cov_xp, var_p;
  return s;
}

int default_nmax(double n_mean) {
  return static_cast<int>(std::ceil(n_mean + 10.0 * std::sqrt(n_mean) + 20.0));
}

KerrDensityMatrix kerr_density_matrix(const CoherentSpec& spec, KerrCoupling chi, int nmax) {
  if (nmax < 0) throw InvalidArgument("nmax must be non-negative");
  KerrDensityMatrix out;
  out.nmax = nmax;
  out.amplitudes = Eigen::VectorXcd::Zero(nmax + 1);
  const double r = std::abs(spec.alpha);
  const double arg = std::arg(spec.alpha);
  double weight = 0.0;
  if (r == 0.0) {
    out.amplitudes(0) = 1.0;
    weight = 1.0;
  } else {
    const double log_r = std::log(r);
    for (int n = 0; n <= nmax; ++n) {
      const double dn = n;
      const double mag = std::exp(-0.5 * spec.n_mean + dn * log_r - 0.5 * std::lgamma(dn + 1.0));
      const double phase = dn * arg - chi.chi_bar * dn * (dn - 1.0);
      out.amplitudes(n) = std::polar(mag, phase);
      weight += mag * mag;
    }
  }
  out.rho = out.amplitudes * out.amplitudes.adjoint();
  // Diagonal phases cancel; write them exactly real.
  for (int n = 0; n <= nmax; ++n) out.rho(n, n) = std::norm(out.amplitudes(n));
  out.trace_deficit = std::max(0.0, 1.0 - weight);
  out.truncation_warning = out.trace_deficit > 1e-9;
  return out;
}

KerrDensityMatrix kerr_density_matrix(const CoherentSpec& spec, KerrCoupling chi) {
  return kerr_density_matrix(spec, chi, default_nmax(spec.n_mean));
}

cplx kerr_mean_amplitude(const CoherentSpec& spec, KerrCoupling chi) {
  const cplx i(0.0, 1.0);
  return spec.alpha * std::exp(spec.n_mean * (std::exp(-2.0 * i * chi.chi_bar) - 1.0));
}

cplx kerr_second_moment(const CoherentSpec& spec, KerrCoupling chi) {
  const double n = spec.n_mean;
  const double c = chi.chi_bar;
  const double s2 = std::sin(2.0 * c);
  const double damping = std::exp(-2.0 * n * s2 * s2);
  const double phase = -2.0 * c - n * std::sin(4.0 * c);
  return spec.alpha * spec.alpha * std::polar(damping, phase);
}

namespace {

QuadratureStats stats_from_moments(cplx a, cplx a2, double n) {
  QuadratureStats s;
  s.mean_x = kSqrt2 * a.real();
  s.mean_p = kSqrt2 * a.imag();
  // <X^2> = (<a^2> + <a^2>* + 2n + 1)/2, <P^2> = (-<a^2> - <a^2>* + 2n + 1)/2
  s.var_x = 0.5 * (2.0 * a2.real() + 2.0 * n + 1.0) - 2.0 * a.real() * a.real();
  s.var_p = 0.5 * (-2.0 * a2.real() + 2.0 * n + 1.0) - 2.0 * a.imag() * a.imag();
  s.cov_xp = a2.imag() - 2.0 * a.real() * a.imag();
  return s;
}

}  // namespace

QuadratureStats kerr_variances(const CoherentSpec& spec, KerrCoupling chi) {
  auto s = stats_from_moments(kerr_mean_amplitude(spec, chi), kerr_second_moment(spec, chi), spec.n_mean);
  s.asymptotic_form = true;
  return s;
}

QuadratureStats fock_quadrature_stats(const KerrDensityMatrix& rho) {
  const int nmax = rho.nmax;
  cplx a{0.0, 0.0};
  cplx a2{0.0, 0.0};
  double n = 0.0;
  for (int k = 0; k <= nmax; ++k) {
    n += k * rho.rho(k, k).real();
    if (k + 1 <= nmax) a += rho.rho(k + 1, k) * std::sqrt(k + 1.0);
    if (k + 2 <= nmax) a2 += rho.rho(k + 2, k) * std::sqrt((k + 1.0) * (k + 2.0));
  }
  const double tr = rho.trace();
  return stats_from_moments(a / tr, a2 / tr, n / tr);
}

namespace {

// W(alpha) = (2/pi) [ sum_n (-1)^n rho_nn f_n^(0)(x)
//                     + 2 Re sum_{k>=1} e^{ik arg(alpha)} sum_m (-1)^m rho_{m,m+k} f_m^(k)(x) ],
// x = 4|alpha|^2, with f the normalized Laguerre functions.
double wigner_alpha_impl(const KerrDensityMatrix& rho, cplx alpha, std::vector<double>& buf) {
  const int nmax = rho.nmax;
  const double x = 4.0 * std::norm(alpha);
  const double phi = std::arg(alpha);
  buf.resize(static_cast<std::size_t>(nmax) + 1);

  double diag = 0.0;
  laguerre_functions(x, 0, std::span<double>(buf.data(), nmax + 1));
  for (int n = 0; n <= nmax; ++n) diag += ((n & 1) ? -1.0 : 1.0) * rho.rho(n, n).real() * buf[n];

  double off = 0.0;
  for (int k = 1; k <= nmax; ++k) {
    const int len = nmax - k + 1;
    laguerre_functions(x, k, std::span<double>(buf.data(), len));
    cplx acc{0.0, 0.0};
    for (int m = 0; m < len; ++m) acc += ((m & 1) ? -1.0 : 1.0) * rho.rho(m, m + k) * buf[m];
    off += (std::polar(1.0, k * phi) * acc).real();
  }
  return (2.0 / kPi) * (diag + 2.0 * off);
}

}  // namespace

double wigner_alpha(const KerrDensityMatrix& rho, cplx alpha) {
  std::vector<double> buf;
  return wigner_alpha_impl(rho, alpha, buf);
}

WignerGrid wigner_exact(const KerrDensityMatrix& rho, const GridSpec& grid) {
  grid.validate();
  WignerGrid w{grid, Eigen::MatrixXd(grid.nx, grid.np)};
  parallel_for(grid.nx, [&](std::size_t begin, std::size_t end) {
    std::vector<double> buf;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < grid.np; ++j) {
        const cplx alpha = cplx(grid.x(i), grid.p(j)) / kSqrt2;
        // d^2 alpha = dX dP / 2
        w.values(i, j) = 0.5 * wigner_alpha_impl(rho, alpha, buf);
      }
    }
  });
  const double floor = -1.0 / kPi - 1e-9;
  if (w.min_value() < floor)
    throw InternalDefect("Wigner series fell below the physical floor: " + format_double(w.min_value()));
  return w;
}

WignerGrid wigner_gaussian(const QuadratureStats& stats, double theta, const GridSpec& grid) {
  grid.validate();
  stats.validate();
  Eigen::Matrix2d rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Eigen::Matrix2d sigma = rot.transpose() * stats.covariance() * rot;
  const Eigen::Vector2d mean = rot.transpose() * Eigen::Vector2d(stats.mean_x, stats.mean_p);
  const Eigen::Matrix2d inv = sigma.inverse();
  const double norm = 1.0 / (2.0 * kPi * std::sqrt(sigma.determinant()));

  WignerGrid w{grid, Eigen::MatrixXd(grid.nx, grid.np)};
  for (std::size_t i = 0; i < grid.nx; ++i) {
    for (std::size_t j = 0; j < grid.np; ++j) {
      const Eigen::Vector2d d(grid.x(i) - mean(0), grid.p(j) - mean(1));
      w.values(i, j) = norm * std::exp(-0.5 * d.dot(inv * d));
    }
  }
  return w;
}

double overlap_fidelity(const WignerGrid& a, const WignerGrid& b) {
  if (!a.same_grid(b)) throw InvalidArgument("fidelity: Wigner grids differ");
  const double f = 2.0 * kPi * a.values.cwiseProduct(b.values).sum() * a.grid.cell_area();
  return std::clamp(f, 0.0, 1.0 + 1e-6);
}

double gaussian_fidelity(const KerrDensityMatrix& rho, const QuadratureStats& stats, const GridSpec& grid) {
  return overlap_fidelity(wigner_exact(rho, grid), wigner_gaussian(stats, 0.0, grid));
}

GridSpec covering_grid(const CoherentSpec& spec, std::size_t points) {
  const double extent = kSqrt2 * std::abs(spec.alpha) + 6.0;
  return GridSpec::symmetric(extent, points);
}

}  // namespace sqz::fock
