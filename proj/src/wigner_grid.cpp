#include "sqz/wigner_grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sqz/common.hpp"

namespace sqz {

void GridSpec::validate() const {
  if (nx < 2 || np < 2) throw InvalidArgument("grid needs at least 2 points per axis");
  if (!(x_max > x_min) || !(p_max > p_min) || !std::isfinite(x_min) || !std::isfinite(x_max) ||
      !std::isfinite(p_min) || !std::isfinite(p_max))
    throw InvalidArgument("grid extents must be finite with max > min");
}

double WignerGrid::negativity_volume() const {
  return values.unaryExpr([](double v) { return v < 0.0 ? -v : 0.0; }).sum() * grid.cell_area();
}

bool WignerGrid::same_grid(const WignerGrid& other, double tol) const {
  const auto& a = grid;
  const auto& b = other.grid;
  return a.nx == b.nx && a.np == b.np && std::abs(a.x_min - b.x_min) <= tol && std::abs(a.x_max - b.x_max) <= tol &&
         std::abs(a.p_min - b.p_min) <= tol && std::abs(a.p_max - b.p_max) <= tol;
}

void write_wigner(std::ostream& os, const WignerGrid& w) {
  const auto& g = w.grid;
  os << "# wigner " << g.nx << ' ' << g.np << ' ' << format_double(g.x_min) << ' ' << format_double(g.x_max) << ' '
     << format_double(g.p_min) << ' ' << format_double(g.p_max) << '\n';
  for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.values.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(w.values(i, j));
    }
    os << '\n';
  }
}

WignerGrid read_wigner(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("wigner file: missing header");
  std::istringstream hs(line);
  std::string hash, tag, nx, np, x0, x1, p0, p1;
  hs >> hash >> tag >> nx >> np >> x0 >> x1 >> p0 >> p1;
  if (hash != "#" || tag != "wigner") throw InvalidArgument("wigner file: bad header '" + line + "'");
  WignerGrid w;
  w.grid = {parse_double(x0), parse_double(x1), parse_double(p0), parse_double(p1),
            static_cast<std::size_t>(parse_u64(nx)), static_cast<std::size_t>(parse_u64(np))};
  w.grid.validate();
  w.values.resize(static_cast<Eigen::Index>(w.grid.nx), static_cast<Eigen::Index>(w.grid.np));
  for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
    if (!std::getline(is, line)) throw InvalidArgument("wigner file: truncated at row " + std::to_string(i));
    std::istringstream rs(line);
    std::string tok;
    for (Eigen::Index j = 0; j < w.values.cols(); ++j) {
      if (!(rs >> tok)) throw InvalidArgument("wigner file: short row " + std::to_string(i));
      w.values(i, j) = parse_double(tok);
    }
  }
  return w;
}

void save_wigner(const std::string& path, const WignerGrid& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_wigner(os, w);
  if (!os) throw IoError("write failed: " + path);
}

WignerGrid load_wigner(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_wigner(is);
}

}  // namespace sqz
