#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sqz/modes.hpp"

using namespace sqz;
using namespace sqz::modes;

namespace {

twa::PropagationConfig config(std::size_t n_traj) {
  twa::PropagationConfig c;
  c.nz = 32;
  c.z_extent = 1.0;
  c.dt = 0.01;
  c.t_final = 0.2;
  c.beta2 = 0.05;
  c.chi_e = 2e-4;
  c.n_traj = n_traj;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("quadrature and density-matrix paths agree on one ensemble") {
  const auto c = config(500);
  const auto shape = twa::gaussian_shape(c.nz, c.z_extent, 0.4, 0.12);
  const auto ens = twa::propagate(twa::init_ensemble({shape, 300.0}, c), c);
  const auto ms = twa::plane_wave_modes(c.nz, c.z_extent, {-2, -1, 0, 1, 2});
  const auto q = from_mode_quadratures(twa::mode_quadratures(ens, ms), {-2, -1, 0, 1, 2});
  const auto g1 = coherency_from_quadratures(covariance(q, false));
  const auto g2 = coherency_from_density_matrix(twa::one_body_density_matrix(ens), ms);
  const double scale = g1.gamma.cwiseAbs().maxCoeff();
  CHECK((g1.gamma - g2.gamma).cwiseAbs().maxCoeff() < 1e-9 * scale);
  CHECK((g1.gamma - g1.gamma.adjoint()).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("coherent product state gives a rank-one coherency") {
  const auto c = config(2000);
  const auto shape = twa::gaussian_shape(c.nz, c.z_extent, 0.5, 0.1);
  const double n = 1e4;
  const auto ens = twa::init_ensemble({shape, n}, c);
  const auto ms = twa::plane_wave_modes(c.nz, c.z_extent, {-1, 0, 1});
  Eigen::VectorXcd alpha(3);
  twa::CField f{std::vector<cplx>(shape.size()), c.dz()};
  for (std::size_t z = 0; z < shape.size(); ++z) f.psi[z] = shape[z] * std::sqrt(n);
  alpha = twa::project(f, ms);
  const Eigen::MatrixXcd expected = alpha.conjugate() * alpha.transpose();

  const auto g = coherency_from_quadratures(covariance(from_mode_quadratures(twa::mode_quadratures(ens, ms), {-1, 0, 1}), false));
  // Vacuum fluctuation of each amplitude is 1/sqrt(2 n_traj) in quadrature units.
  const double tol = 5.0 * std::sqrt(n) / std::sqrt(static_cast<double>(c.n_traj)) + 1.0;
  CHECK((g.gamma - expected).cwiseAbs().maxCoeff() < tol);
  const auto d = principal_modes(g);
  CHECK(d.dominance() > 0.999);
  CHECK(std::abs(d.eigenvectors.col(0).dot(alpha.conjugate().normalized())) > 0.999);
}

TEST_CASE("vacuum coherency vanishes after subtraction") {
  const auto c = config(4000);
  const auto ens = twa::init_ensemble({twa::flat_shape(c.nz, c.z_extent), 0.0}, c);
  const auto ms = twa::plane_wave_modes(c.nz, c.z_extent, {0, 3});
  const auto cov = covariance(from_mode_quadratures(twa::mode_quadratures(ens, ms), {0, 3}), false);
  const auto g = coherency_from_quadratures(cov);
  CHECK(g.gamma.cwiseAbs().maxCoeff() < 0.05);
  const auto raw = coherency_from_quadratures(cov, false);
  CHECK(raw.gamma(0, 0).real() == doctest::Approx(0.5).epsilon(0.1));
  CHECK_FALSE(raw.vacuum_subtracted);
}

TEST_CASE("principal modes: ordering and phase convention") {
  // Gamma = U diag(5, 2, 2, 0.5) U^dag with a known unitary.
  Eigen::MatrixXcd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(std::cos(1.0 + i * 1.3 + j * 0.7), std::sin(0.3 * i - 0.9 * j + 0.2));
  const Eigen::MatrixXcd u = Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
  Eigen::VectorXd lam(4);
  lam << 2.0, 5.0, 0.5, 2.0;
  CoherencyMatrix g{u * lam.cast<cplx>().asDiagonal() * u.adjoint(), true};
  const auto d = principal_modes(g);
  CHECK(d.eigenvalues(0) == doctest::Approx(5.0));
  CHECK(d.eigenvalues(1) == doctest::Approx(2.0));
  CHECK(d.eigenvalues(2) == doctest::Approx(2.0));
  CHECK(d.eigenvalues(3) == doctest::Approx(0.5));
  CHECK(d.dominance() == doctest::Approx(5.0 / 9.5));
  for (int k = 0; k < 4; ++k) {
    const auto v = d.eigenvectors.col(k);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    CHECK(std::abs(v(imax).imag()) < 1e-12);
    CHECK(v(imax).real() > 0.0);
    CHECK(v.norm() == doctest::Approx(1.0));
  }
  // Top mode matches column 1 of u up to a phase.
  CHECK(std::abs(d.eigenvectors.col(0).dot(u.col(1))) == doctest::Approx(1.0));
  const Eigen::MatrixXcd back = d.eigenvectors * d.eigenvalues.cast<cplx>().asDiagonal() * d.eigenvectors.adjoint();
  CHECK((back - g.gamma).cwiseAbs().maxCoeff() < 1e-12);
  // Repeated calls give identical output.
  const auto d2 = principal_modes(g);
  CHECK(d2.eigenvectors == d.eigenvectors);
}

TEST_CASE("principal modes of the one-body density matrix") {
  const auto c = config(800);
  const auto shape = twa::gaussian_shape(c.nz, c.z_extent, 0.5, 0.1);
  const double n = 5000.0;
  const auto rho = twa::one_body_density_matrix(twa::init_ensemble({shape, n}, c));
  const auto d = principal_modes(rho);
  CHECK(d.eigenvalues(0) == doctest::Approx(n).epsilon(0.02));
  cplx overlap = 0.0;
  double norm = 0.0;
  for (std::size_t z = 0; z < c.nz; ++z) {
    overlap += std::conj(d.eigenvectors(static_cast<Eigen::Index>(z), 0)) * shape[z] * c.dz();
    norm += std::norm(d.eigenvectors(static_cast<Eigen::Index>(z), 0)) * c.dz();
  }
  CHECK(norm == doctest::Approx(1.0));
  CHECK(std::abs(overlap) > 0.999);
}

TEST_CASE("covariance: raw and central moments") {
  QuadratureSamples s;
  s.x = Eigen::MatrixXd(2, 4);
  s.p = Eigen::MatrixXd(2, 4);
  s.x << 1, 2, 3, 4, 0, 1, 0, 1;
  s.p << 2, 2, 2, 2, -1, 1, -1, 1;
  s.mode_labels = {1.0, 2.0};
  const auto raw = covariance(s, false);
  const auto cen = covariance(s, true);
  CHECK(raw.xx(0, 0) == doctest::Approx(7.5));
  CHECK(cen.xx(0, 0) == doctest::Approx(1.25));
  CHECK(cen.xp(0, 1) == doctest::Approx((-1.5 * -1 + -0.5 * 1 + 0.5 * -1 + 1.5 * 1) / 4.0));
  CHECK(cen.pp(0, 0) == doctest::Approx(0.0));
  CHECK(raw.px(1, 0) == doctest::Approx((-1 * 1 + 1 * 2 - 1 * 3 + 1 * 4) / 4.0));
  CHECK_THROWS_AS(coherency_from_quadratures(cen), InvalidArgument);
  s.mode_labels = {2.0, 2.0};
  CHECK_THROWS_AS(covariance(s, false), InvalidArgument);
}

TEST_CASE("non-Hermitian input is rejected") {
  CoherencyMatrix g{Eigen::MatrixXcd::Identity(3, 3), true};
  g.gamma(0, 1) = cplx(0.3, 0.1);
  CHECK_THROWS_AS(principal_modes(g), InvalidArgument);
}

TEST_CASE("matrix text round trip") {
  Eigen::MatrixXcd m(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = cplx(1.0 / (i + j + 1.0), std::exp(0.1 * i) - j * 1e-17);
  std::stringstream ss;
  write_matrix(ss, "coherency", m);
  std::string kind;
  const auto back = read_matrix(ss, &kind);
  CHECK(kind == "coherency");
  CHECK(back == m);
  std::stringstream bad("# matrix coherency 2\n1,0 2,0\n");
  CHECK_THROWS(read_matrix(bad));
}
