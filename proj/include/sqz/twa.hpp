#pragma once

// Truncated-Wigner simulation of the 1D Kerr nonlinear Schroedinger field.
//
// Model (co-moving frame, hbar = 1):
//   H = int dz [ (beta2/2) |d_z psi|^2 + chi_e psi^dag psi^dag psi psi ]
// Projected on one normalized mode phi this is chi n(n-1) with
// chi = chi_e int |phi|^4 dz, the same generator fock:: uses, so
// chi_bar = chi * t_final is directly comparable.
//
// c-field equation with the symmetric-ordering correction on a grid of spacing dz:
//   i d_t psi = -(beta2/2) d_z^2 psi + 2 chi_e (|psi|^2 - 1/dz) psi

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sqz/common.hpp"

namespace sqz::twa {

struct PropagationConfig {
  std::size_t nz = 128;
  double z_extent = 1.0;
  double dt = 0.005;
  double t_final = 1.0;
  double vg = 0.0;  // eliminated by the co-moving frame; kept for provenance
  double beta2 = 0.0;
  double chi_e = 0.0;
  std::size_t n_traj = 10000;
  std::uint64_t seed = 0;

  void validate() const;
  double dz() const { return z_extent / static_cast<double>(nz); }
  std::size_t steps() const;
};

struct CField {
  std::vector<cplx> psi;
  double dz = 0.0;

  /// sum |psi|^2 dz
  double norm() const;
  /// norm() - nz/2: photon number with the vacuum half-quantum per mode removed.
  double symmetric_number() const { return norm() - 0.5 * static_cast<double>(psi.size()); }
};

/// Pulse envelope (normalized so sum |shape|^2 dz = 1) carrying n_photons.
struct CoherentPulse {
  std::vector<cplx> shape;
  double n_photons = 0.0;
};

std::vector<cplx> flat_shape(std::size_t nz, double z_extent);
std::vector<cplx> gaussian_shape(std::size_t nz, double z_extent, double center, double width);

struct TrajectoryEnsemble {
  std::vector<CField> fields;
  PropagationConfig config;
};

/// psi = sqrt(N) shape + vacuum noise with variance 1/2 per plane-wave mode.
/// Trajectory t draws from the stream (seed, t).
TrajectoryEnsemble init_ensemble(const CoherentPulse& pulse, const PropagationConfig& config);

/// Largest step keeping both the nonlinear phase per step and the dispersive
/// phase of the lowest nonzero wavenumber below 0.1 rad. The linear sub-step
/// is exact in wavenumber space, so the grid's highest wavenumber does not
/// constrain dt.
double max_stable_dt(const PropagationConfig& config, double max_abs2);

/// Symmetric split-step evolution of every trajectory to t_final.
/// Throws InvalidArgument when dt exceeds max_stable_dt and NumericalFailure
/// when a step changes a trajectory norm by more than 1e-6 (relative).
TrajectoryEnsemble propagate(TrajectoryEnsemble ensemble, const PropagationConfig& config);

/// Called as observer(trajectory, snapshot_index, field) for every requested
/// step (0 = initial state). May run concurrently for different trajectories.
using SnapshotObserver = std::function<void(std::size_t, std::size_t, const CField&)>;

void propagate_observed(TrajectoryEnsemble& ensemble, const PropagationConfig& config,
                        std::span<const std::size_t> snapshot_steps, const SnapshotObserver& observer);

struct OneBodyDensityMatrix {
  Eigen::MatrixXcd rho_zz;  // rho(z, z') = <Psi^dag(z) Psi(z')>
  double dz = 0.0;

  double photon_number() const { return rho_zz.trace().real() * dz; }
};

/// mean psi*(z) psi(z') - delta(z, z')/(2 dz), Hermitized.
OneBodyDensityMatrix one_body_density_matrix(const TrajectoryEnsemble& ensemble);

/// Orthonormal spatial modes stored as columns phi(z, m).
struct ModeSet {
  Eigen::MatrixXcd phi;
  double dz = 0.0;

  std::size_t count() const { return static_cast<std::size_t>(phi.cols()); }
  std::size_t nz() const { return static_cast<std::size_t>(phi.rows()); }
  /// Throws InvalidArgument unless sum phi_m* phi_n dz = delta_mn within tol.
  void validate(double tol = 1e-10) const;
};

/// exp(i k_j z)/sqrt(L) with k_j = 2 pi j / L for each requested index j.
ModeSet plane_wave_modes(std::size_t nz, double z_extent, const std::vector<int>& indices);

/// Quadrature samples per trajectory: a_m = sum phi_m*(z) psi(z) dz,
/// X = sqrt(2) Re a_m, P = sqrt(2) Im a_m. Matrices are n_modes x n_traj.
struct ModeQuadratures {
  Eigen::MatrixXd x;
  Eigen::MatrixXd p;
};

Eigen::VectorXcd project(const CField& field, const ModeSet& modes);
ModeQuadratures mode_quadratures(const TrajectoryEnsemble& ensemble, const ModeSet& modes);

/// chi_e * sum |phi|^4 dz for a normalized mode.
double effective_single_mode_chi(double chi_e, std::span<const cplx> mode, double dz);

// Snapshot: <path>.manifest (key = value text) + <path>.bin, little-endian f64
// interleaved (re, im) per grid point, trajectories in order.
void save_ensemble(const std::string& path_prefix, const TrajectoryEnsemble& ensemble);
TrajectoryEnsemble load_ensemble(const std::string& path_prefix);

}  // namespace sqz::twa
