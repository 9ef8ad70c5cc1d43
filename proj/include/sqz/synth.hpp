#pragma once

// Synthetic homodyne acquisition from known single-mode states.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sqz/dataset.hpp"
#include "sqz/fockstate.hpp"

namespace sqz::synth {

/// Rotated-frame Gaussian, same parameterization as the tomography fit:
/// r = R(theta)(X, P) ~ N((d1, d2), diag(v1, v2)).
struct GaussianState {
  double v1 = kVacuumVariance;
  double v2 = kVacuumVariance;
  double theta = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  void validate() const;
  Eigen::Matrix2d covariance() const;  // lab frame (X, P)
  Eigen::Vector2d mean() const;        // lab frame
};

struct KerrState {
  fock::CoherentSpec coherent;
  double chi_bar = 0.0;  // offset added to chi_of_tau
  int nmax = 0;          // 0 selects the default truncation
};

enum class StateKind { gaussian, kerr };

struct ModeState {
  StateKind kind = StateKind::gaussian;
  GaussianState gaussian;
  KerrState kerr;
};

struct StateSpec {
  std::vector<double> mode_labels;
  /// One entry per mode, or a single entry shared by every mode.
  std::vector<ModeState> modes;
  /// Tabulated chi_bar(tau) added to every Kerr mode; empty means constant.
  std::vector<double> chi_of_tau;

  const ModeState& mode(std::size_t m) const { return modes.size() == 1 ? modes[0] : modes[m]; }
  void validate(std::size_t n_tau) const;
};

struct DetectorModel {
  double electronic_noise_sd = 0.0;  // quadrature units, independent per sample
  double hf_amplitude = 0.0;         // quadrature units
  double hf_harmonic = 3.0;          // contamination frequency in units of omega0
  double omega0 = 2.0 * kPi / 2.695; // rad/fs
  double lo_ratio = 40.0;

  void validate() const;
  double lo_calibration() const;
};

/// chi_bar(tau) = amplitude * sin(2 pi tau / period + phase).
std::vector<double> chi_modulation_profile(const std::vector<double>& tau_grid, double amplitude, double period_fs,
                                           double phase);

/// Rotated-quadrature density |<x|_phi psi>|^2 of a pure Fock-basis state,
/// tabulated on xs.
std::vector<double> kerr_marginal(const Eigen::VectorXcd& amplitudes, double phi, const std::vector<double>& xs);

/// Variance of X_phi = X cos(phi) + P sin(phi) for the given moments.
double quadrature_variance(const fock::QuadratureStats& stats, double phi);

/// Each (phi, mode, shot) draws one ideal-state variate shared by every
/// delay point, so a shot traces a smooth curve along tau as the state
/// evolves; detector noise is then added per sample. The contamination phase
/// is random per shot.
HomodyneDataset sample_homodyne(const StateSpec& state, const std::vector<double>& tau_grid,
                                const std::vector<double>& phi_grid, std::size_t n_shots,
                                const DetectorModel& detector, std::uint64_t seed);

}  // namespace sqz::synth
