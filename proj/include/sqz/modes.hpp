#pragma once

// Multimode second-moment analysis: quadrature covariance, the coherency
// matrix <a_m^dag a_n>, and its principal-mode decomposition.

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "sqz/twa.hpp"

namespace sqz::modes {

/// Simultaneous quadrature samples: x(m, s), p(m, s) for mode m and shot s.
struct QuadratureSamples {
  Eigen::MatrixXd x;
  Eigen::MatrixXd p;
  std::vector<double> mode_labels;

  std::size_t n_modes() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t n_shots() const { return static_cast<std::size_t>(x.cols()); }
  void validate() const;
};

struct CovarianceMatrix {
  Eigen::MatrixXd xx, xp, px, pp;
  bool central = false;

  std::size_t n_modes() const { return static_cast<std::size_t>(xx.rows()); }
};

struct CoherencyMatrix {
  Eigen::MatrixXcd gamma;
  bool vacuum_subtracted = true;

  std::size_t n_modes() const { return static_cast<std::size_t>(gamma.rows()); }
};

struct ModeDecomposition {
  Eigen::VectorXd eigenvalues;    // descending
  Eigen::MatrixXcd eigenvectors;  // columns, orthonormal

  /// lambda_1 / sum(lambda)
  double dominance() const { return eigenvalues(0) / eigenvalues.sum(); }
};

/// Raw moments <X_m X_n> etc. (1/n normalization), or noise correlations
/// <dX_m dX_n> when central is set.
CovarianceMatrix covariance(const QuadratureSamples& samples, bool central);

/// Gamma_mn = (1/2)[<X_m X_n> + <P_m P_n> + i(<X_m P_n> - <P_m X_n>)] - (1/2) delta_mn.
/// The 1/2 prefactor belongs to the vacuum-variance-1/2 convention; the
/// subtraction turns symmetrically ordered moments into <a^dag a>.
CoherencyMatrix coherency_from_quadratures(const CovarianceMatrix& cov, bool subtract_vacuum = true);

/// Hermitian eigendecomposition with descending eigenvalues. Each eigenvector
/// has its largest-magnitude component real and positive; degenerate
/// eigenvalues are ordered by the first differing component magnitude.
ModeDecomposition principal_modes(const CoherencyMatrix& gamma);

/// <a_m^dag a_n> = sum_{z,z'} phi_m(z) phi_n*(z') rho(z, z') dz dz' with
/// rho(z, z') = <psi*(z) psi(z')> and a_m = sum phi_m*(z) psi(z) dz.
CoherencyMatrix coherency_from_density_matrix(const twa::OneBodyDensityMatrix& rho, const twa::ModeSet& modes);

/// Principal modes of the one-body density matrix itself: eigenvalues are
/// photon numbers, eigenvector columns are phi_j(z) normalized on the grid.
ModeDecomposition principal_modes(const twa::OneBodyDensityMatrix& rho);

QuadratureSamples from_mode_quadratures(const twa::ModeQuadratures& q, std::vector<double> labels);

// Text format:
//   # matrix <kind> <n>
//   re,im re,im ...   (one row per line)
void write_matrix(std::ostream& os, const std::string& kind, const Eigen::MatrixXcd& m);
Eigen::MatrixXcd read_matrix(std::istream& is, std::string* kind = nullptr);
void save_matrix(const std::string& path, const std::string& kind, const Eigen::MatrixXcd& m);
Eigen::MatrixXcd load_matrix(const std::string& path, std::string* kind = nullptr);

}  // namespace sqz::modes
