#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>

namespace sqz {

/// Phase-space sampling: nx x np points spanning [x_min, x_max] x [p_min, p_max]
/// inclusive of the end points.
struct GridSpec {
  double x_min = -5.0;
  double x_max = 5.0;
  double p_min = -5.0;
  double p_max = 5.0;
  std::size_t nx = 128;
  std::size_t np = 128;

  void validate() const;
  double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double dp() const { return (p_max - p_min) / static_cast<double>(np - 1); }
  double x(std::size_t i) const { return x_min + dx() * static_cast<double>(i); }
  double p(std::size_t j) const { return p_min + dp() * static_cast<double>(j); }
  double cell_area() const { return dx() * dp(); }

  static GridSpec symmetric(double extent, std::size_t n) { return {-extent, extent, -extent, extent, n, n}; }
  bool operator==(const GridSpec&) const = default;
};

/// Real Wigner quasi-probability density in (X, P) units: values(i, j) = W(x_i, p_j),
/// normalized so that sum(values) * cell_area = 1.
struct WignerGrid {
  GridSpec grid;
  Eigen::MatrixXd values;

  double normalization() const { return values.sum() * grid.cell_area(); }
  double min_value() const { return values.minCoeff(); }
  /// Integral of |min(W, 0)| over the grid.
  double negativity_volume() const;
  bool same_grid(const WignerGrid& other, double tol = 1e-12) const;
};

// Text format:
//   # wigner nx np x_min x_max p_min p_max
//   <np values for x_0>
//   ...
void write_wigner(std::ostream& os, const WignerGrid& w);
WignerGrid read_wigner(std::istream& is);
void save_wigner(const std::string& path, const WignerGrid& w);
WignerGrid load_wigner(const std::string& path);

}  // namespace sqz
