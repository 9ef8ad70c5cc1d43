#include "sqz/modes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace sqz::modes {

void QuadratureSamples::validate() const {
  if (x.rows() != p.rows() || x.cols() != p.cols()) throw InvalidArgument("x and p sample blocks differ in shape");
  if (x.rows() == 0) throw InvalidArgument("no modes in quadrature samples");
  if (!mode_labels.empty()) {
    if (mode_labels.size() != n_modes()) throw InvalidArgument("mode label count differs from mode count");
    const bool inc = std::adjacent_find(mode_labels.begin(), mode_labels.end(), std::greater_equal<>()) ==
                     mode_labels.end();
    const bool dec =
        std::adjacent_find(mode_labels.begin(), mode_labels.end(), std::less_equal<>()) == mode_labels.end();
    if (!inc && !dec) throw InvalidArgument("mode labels must be strictly monotonic");
  }
  if (!x.allFinite() || !p.allFinite()) throw InvalidArgument("quadrature samples must be finite");
}

CovarianceMatrix covariance(const QuadratureSamples& samples, bool central) {
  samples.validate();
  if (samples.n_shots() < 2) throw InvalidArgument("covariance needs at least 2 shots");
  const double inv_n = 1.0 / static_cast<double>(samples.n_shots());
  Eigen::MatrixXd x = samples.x;
  Eigen::MatrixXd p = samples.p;
  if (central) {
    x.colwise() -= x.rowwise().mean();
    p.colwise() -= p.rowwise().mean();
  }
  CovarianceMatrix c;
  c.central = central;
  c.xx = x * x.transpose() * inv_n;
  c.pp = p * p.transpose() * inv_n;
  c.xp = x * p.transpose() * inv_n;
  c.px = c.xp.transpose();
  // Exact symmetry for the diagonal blocks.
  c.xx = 0.5 * (c.xx + c.xx.transpose()).eval();
  c.pp = 0.5 * (c.pp + c.pp.transpose()).eval();
  return c;
}

CoherencyMatrix coherency_from_quadratures(const CovarianceMatrix& cov, bool subtract_vacuum) {
  const auto n = cov.xx.rows();
  if (cov.xx.cols() != n || cov.pp.rows() != n || cov.pp.cols() != n || cov.xp.rows() != n || cov.xp.cols() != n ||
      cov.px.rows() != n || cov.px.cols() != n)
    throw InvalidArgument("covariance blocks have non-conforming shapes");
  if (cov.central) throw InvalidArgument("coherency needs raw (non-central) moments");
  CoherencyMatrix g;
  g.vacuum_subtracted = subtract_vacuum;
  g.gamma.resize(n, n);
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index k = 0; k < n; ++k)
      g.gamma(m, k) = 0.5 * cplx(cov.xx(m, k) + cov.pp(m, k), cov.xp(m, k) - cov.px(m, k));
  if (subtract_vacuum) g.gamma.diagonal().array() -= kVacuumVariance;
  const Eigen::MatrixXcd herm = 0.5 * (g.gamma + g.gamma.adjoint());
  g.gamma = herm;
  return g;
}

namespace {

ModeDecomposition decompose(const Eigen::MatrixXcd& h) {
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) throw InvalidArgument("matrix is not Hermitian (max asymmetry " + format_double(asym) + ")");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (h + h.adjoint()));
  if (solver.info() != Eigen::Success) throw NumericalFailure("Hermitian eigensolver did not converge");
  const auto n = h.rows();
  Eigen::MatrixXcd vecs = solver.eigenvectors();
  const Eigen::VectorXd vals = solver.eigenvalues();

  for (Eigen::Index c = 0; c < n; ++c) {
    auto v = vecs.col(c);
    const double vmax = v.cwiseAbs().maxCoeff();
    Eigen::Index pivot = 0;
    while (std::abs(v(pivot)) < vmax * (1.0 - 1e-12)) ++pivot;
    v *= std::conj(v(pivot)) / std::abs(v(pivot));
    v(pivot) = std::abs(v(pivot));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals(a) > vals(b); });
  // Reorder runs of (numerically) equal eigenvalues by their vectors.
  const double tie = 1e-12 * std::max(1.0, vals.cwiseAbs().maxCoeff());
  auto key_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ma = std::abs(vecs(i, a));
      const double mb = std::abs(vecs(i, b));
      if (std::abs(ma - mb) > 1e-12) return ma > mb;
    }
    return false;
  };
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && std::abs(vals(order[i]) - vals(order[j])) <= tie) ++j;
    std::stable_sort(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(j), key_less);
    i = j;
  }

  ModeDecomposition d;
  d.eigenvalues.resize(n);
  d.eigenvectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    d.eigenvalues(c) = vals(order[static_cast<std::size_t>(c)]);
    d.eigenvectors.col(c) = vecs.col(order[static_cast<std::size_t>(c)]);
  }
  return d;
}

}  // namespace

ModeDecomposition principal_modes(const CoherencyMatrix& gamma) { return decompose(gamma.gamma); }

CoherencyMatrix coherency_from_density_matrix(const twa::OneBodyDensityMatrix& rho, const twa::ModeSet& modes) {
  modes.validate();
  if (static_cast<std::size_t>(rho.rho_zz.rows()) != modes.nz() || std::abs(rho.dz - modes.dz) > 1e-12 * rho.dz)
    throw InvalidArgument("density matrix grid does not match the mode set");
  CoherencyMatrix g;
  g.vacuum_subtracted = true;
  // rho(z, z') = <psi*(z) psi(z')> and a_m = sum phi_m*(z) psi(z) dz, so
  // Gamma_mn = sum phi_m(z) rho(z, z') phi_n*(z') dz^2.
  g.gamma = modes.phi.transpose() * rho.rho_zz * modes.phi.conjugate() * (rho.dz * rho.dz);
  const Eigen::MatrixXcd herm = 0.5 * (g.gamma + g.gamma.adjoint());
  g.gamma = herm;
  return g;
}

ModeDecomposition principal_modes(const twa::OneBodyDensityMatrix& rho) {
  // An eigenvector of <psi*(z) psi(z')> is the conjugate of the mode function.
  auto d = decompose(rho.rho_zz * rho.dz);
  d.eigenvectors = (d.eigenvectors.conjugate() / std::sqrt(rho.dz)).eval();
  return d;
}

QuadratureSamples from_mode_quadratures(const twa::ModeQuadratures& q, std::vector<double> labels) {
  QuadratureSamples s{q.x, q.p, std::move(labels)};
  s.validate();
  return s;
}

void write_matrix(std::ostream& os, const std::string& kind, const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("write_matrix: matrix must be square");
  os << "# matrix " << kind << ' ' << m.rows() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(m(i, j).real()) << ',' << format_double(m(i, j).imag());
    }
    os << '\n';
  }
}

Eigen::MatrixXcd read_matrix(std::istream& is, std::string* kind) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("matrix file: missing header");
  std::istringstream hs(line);
  std::string hash, tag, k, n;
  hs >> hash >> tag >> k >> n;
  if (hash != "#" || tag != "matrix") throw InvalidArgument("matrix file: bad header '" + line + "'");
  if (kind) *kind = k;
  const auto dim = static_cast<Eigen::Index>(parse_u64(n));
  Eigen::MatrixXcd m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!std::getline(is, line)) throw InvalidArgument("matrix file: truncated");
    std::istringstream rs(line);
    std::string tok;
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (!(rs >> tok)) throw InvalidArgument("matrix file: short row");
      const auto parts = split(tok, ',');
      if (parts.size() != 2) throw InvalidArgument("matrix file: entry '" + tok + "' is not re,im");
      m(i, j) = cplx(parse_double(parts[0]), parse_double(parts[1]));
    }
  }
  return m;
}

void save_matrix(const std::string& path, const std::string& kind, const Eigen::MatrixXcd& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  write_matrix(os, kind, m);
}

Eigen::MatrixXcd load_matrix(const std::string& path, std::string* kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_matrix(is, kind);
}

}  // namespace sqz::modes
