#pragma once

// Exact single-mode Kerr physics in a truncated Fock basis.
//
// A coherent input |alpha> evolves under U = exp(-i chi_bar n(n-1)). Everything
// here is analytic or a finite Fock-space sum, and serves as the reference for
// the stochastic simulator and the tomography chain.

#include <Eigen/Dense>

#include "sqz/common.hpp"
#include "sqz/wigner_grid.hpp"

namespace sqz::fock {

struct CoherentSpec {
  cplx alpha{0.0, 0.0};
  double n_mean = 0.0;  // |alpha|^2

  CoherentSpec() = default;
  explicit CoherentSpec(cplx a);
};

/// Dimensionless nonlinear phase chi_bar = chi * t. Any finite sign.
struct KerrCoupling {
  double chi_bar = 0.0;

  KerrCoupling() = default;
  explicit KerrCoupling(double c);
};

struct KerrDensityMatrix {
  int nmax = 0;
  Eigen::MatrixXcd rho;        // rho(m, n) = <m|rho|n>
  Eigen::VectorXcd amplitudes; // the state is pure: rho = c c^dagger
  double trace_deficit = 0.0;  // Poisson weight beyond nmax
  bool truncation_warning = false;

  double trace() const { return rho.trace().real(); }
  double purity() const;
  double mean_photon_number() const;
};

struct QuadratureStats {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double var_x = kVacuumVariance;
  double var_p = kVacuumVariance;
  double cov_xp = 0.0;  // symmetrized <(XP + PX)/2> - <X><P>
  // Set by the closed-form path, whose derivation is a large-photon-number
  // expansion; the Fock path leaves it false.
  bool asymptotic_form = false;

  /// Throws InvalidArgument unless the covariance is positive definite and
  /// satisfies det >= 1/4 (uncertainty bound).
  void validate(double tol = 1e-12) const;
  Eigen::Matrix2d covariance() const;
};

/// ceil(n + 10 sqrt(n) + 20). The Poisson weight beyond is negligible, and so
/// are the truncation ripples in Wigner tails far from the state.
int default_nmax(double n_mean);

KerrDensityMatrix kerr_density_matrix(const CoherentSpec& spec, KerrCoupling chi, int nmax);
KerrDensityMatrix kerr_density_matrix(const CoherentSpec& spec, KerrCoupling chi);

/// Exact <a> and <a^2> after Kerr evolution of a coherent state.
cplx kerr_mean_amplitude(const CoherentSpec& spec, KerrCoupling chi);
cplx kerr_second_moment(const CoherentSpec& spec, KerrCoupling chi);

/// Closed-form quadrature variances of the Kerr-evolved coherent state.
QuadratureStats kerr_variances(const CoherentSpec& spec, KerrCoupling chi);

/// Same moments evaluated directly from the truncated density matrix.
QuadratureStats fock_quadrature_stats(const KerrDensityMatrix& rho);

/// Wigner function at complex phase-space point alpha = (X + iP)/sqrt(2),
/// normalized as a density in alpha (vacuum peak 2/pi).
double wigner_alpha(const KerrDensityMatrix& rho, cplx alpha);

/// Exact Wigner function on an (X, P) grid, as a density in X and P
/// (vacuum peak 1/pi). Throws InternalDefect if any value falls below the
/// physical floor -1/pi.
WignerGrid wigner_exact(const KerrDensityMatrix& rho, const GridSpec& grid);

/// Bivariate normal Wigner function. The stats describe the state in a frame
/// rotated by theta: r = R(theta) (X, P) with R = [[cos, -sin], [sin, cos]],
/// the same convention the tomography fit reports.
WignerGrid wigner_gaussian(const QuadratureStats& stats, double theta, const GridSpec& grid);

/// 2 pi * sum(W1 W2) * cell_area, clamped to [0, 1 + 1e-6].
double overlap_fidelity(const WignerGrid& a, const WignerGrid& b);

/// Overlap of the exact Wigner function with a Gaussian built from stats.
double gaussian_fidelity(const KerrDensityMatrix& rho, const QuadratureStats& stats, const GridSpec& grid);

/// Square grid centred on the origin that covers the state support.
GridSpec covering_grid(const CoherentSpec& spec, std::size_t points);

}  // namespace sqz::fock
