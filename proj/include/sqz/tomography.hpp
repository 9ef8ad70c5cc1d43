#pragma once

// Homodyne tomography: per-phase histograms, filtered backprojection and a
// rotated 2D Gaussian fit.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "sqz/common.hpp"
#include "sqz/dataset.hpp"
#include "sqz/wigner_grid.hpp"

namespace sqz::tomo {

struct BinSpec {
  double s_min = -5.0;
  double s_max = 5.0;
  std::size_t n_bins = 100;

  void validate() const;
  double width() const { return (s_max - s_min) / static_cast<double>(n_bins); }
};

/// Symmetric bins covering every calibrated sample of the cell, with one
/// spare bin width of margin on each side.
BinSpec covering_bins(const HomodyneDataset& ds, std::size_t tau_idx, std::size_t mode_idx, std::size_t n_bins);

struct QuadraturePDF {
  std::vector<double> bin_edges;  // n_bins + 1
  std::vector<double> phi;
  Eigen::MatrixXd pr;             // (phi, bin), each row sums to 1
  std::size_t out_of_range = 0;   // samples outside the bin range
  std::size_t total = 0;

  std::size_t n_bins() const { return bin_edges.size() - 1; }
  double bin_width() const { return bin_edges[1] - bin_edges[0]; }
};

QuadraturePDF build_pdf(const HomodyneDataset& ds, std::size_t tau_idx, std::size_t mode_idx, const BinSpec& bins);

/// Normalizes per-phase sample vectors (already in quadrature units).
QuadraturePDF histogram(const std::vector<double>& phi, const std::vector<std::vector<double>>& samples,
                        const BinSpec& bins);

/// 0.8 * pi / bin width.
double default_cutoff(const QuadraturePDF& pdf);

/// Filtered backprojection with a hard ramp |eta| <= kc. The histogram is
/// treated as piecewise constant, so the filtering integral is exact per bin.
/// Output is a density in (X, P).
WignerGrid inverse_radon(const QuadraturePDF& pdf, const GridSpec& grid, std::optional<double> kc = std::nullopt);

struct GaussianFit {
  double amplitude = 0.0;
  double v1 = 0.0, v2 = 0.0;
  double theta = 0.0;  // canonical range [0, pi/2)
  double d1 = 0.0, d2 = 0.0;
  double residual = 0.0;  // RMS misfit / max |W|
  bool degenerate = false;
  int iterations = 0;

  double v_min() const { return std::min(v1, v2); }
  double v_max() const { return std::max(v1, v2); }
  /// v1 v2 more than 10% below the uncertainty bound of 1/4.
  bool below_uncertainty_floor() const { return v1 * v2 < 0.25 * 0.9; }
};

/// Carries the best residual reached before giving up.
class FitFailure : public NumericalFailure {
 public:
  FitFailure(const std::string& what, double best_residual)
      : NumericalFailure(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// A exp(-(r1 - d1)^2 / (2 v1) - (r2 - d2)^2 / (2 v2)) with r = R(theta)(X, P),
/// R = [[cos, -sin], [sin, cos]]. Levenberg-Marquardt from moment seeds with
/// restarts. theta is folded into [0, pi/2), so v1 always belongs to the
/// axis in the first quadrant and keeps its label when squeezing changes sign.
GaussianFit fit_gaussian2d(const WignerGrid& w);

/// Folds (theta, v, d) into theta in [0, pi/2) without changing the ellipse.
void canonicalize(GaussianFit& fit);

/// Renders the fitted model on a grid.
WignerGrid render(const GaussianFit& fit, const GridSpec& grid);

/// Relative width difference below which the orientation is unidentifiable.
inline constexpr double kDegenerateTolerance = 0.02;

/// Residual above which a grid is treated as non-Gaussian.
inline constexpr double kGaussianResidualThreshold = 0.05;

struct SqueezingMetrics {
  double db_min = 0.0;
  double db_max = 0.0;
  std::optional<double> negativity_volume;
};

SqueezingMetrics squeezing_metrics(const GaussianFit& fit, double reference,
                                   const WignerGrid* w = nullptr);

/// lo_calibration that makes the cell's phase-averaged raw variance equal
/// to the vacuum value; intended for a coherent or vacuum reference dataset.
double calibrate_lo(const HomodyneDataset& reference, std::size_t tau_idx, std::size_t mode_idx);

}  // namespace sqz::tomo
