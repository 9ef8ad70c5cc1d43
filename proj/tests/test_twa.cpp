#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sqz/fockstate.hpp"
#include "sqz/twa.hpp"

using namespace sqz;
using namespace sqz::twa;

namespace {

PropagationConfig small_config() {
  PropagationConfig c;
  c.nz = 16;
  c.z_extent = 1.0;
  c.dt = 0.01;
  c.t_final = 0.1;
  c.beta2 = 0.0;
  c.chi_e = 0.0;
  c.n_traj = 4000;
  c.seed = 11;
  return c;
}

double sample_variance(const Eigen::RowVectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("vacuum noise has variance one half in every plane-wave mode") {
  auto c = small_config();
  const auto ens = init_ensemble({flat_shape(c.nz, c.z_extent), 0.0}, c);
  const auto modes = plane_wave_modes(c.nz, c.z_extent, {-3, 0, 1, 7});
  const auto q = mode_quadratures(ens, modes);
  const double se = 0.5 * std::sqrt(2.0 / static_cast<double>(c.n_traj));
  for (Eigen::Index m = 0; m < q.x.rows(); ++m) {
    CHECK(std::abs(sample_variance(q.x.row(m)) - 0.5) < 4.0 * se);
    CHECK(std::abs(sample_variance(q.p.row(m)) - 0.5) < 4.0 * se);
  }
  const auto rho = one_body_density_matrix(ens);
  CHECK(std::abs(rho.photon_number()) < 0.2);
}

TEST_CASE("coherent amplitude and photon number") {
  auto c = small_config();
  const double n = 2500.0;
  const auto shape = gaussian_shape(c.nz, c.z_extent, 0.5, 0.15);
  const auto ens = init_ensemble({shape, n}, c);
  const auto rho = one_body_density_matrix(ens);
  // Photon-number noise of a coherent state is sqrt(n); the estimate carries
  // that spread divided by sqrt(n_traj) plus vacuum terms.
  CHECK(rho.photon_number() == doctest::Approx(n).epsilon(0.01));
  CHECK((rho.rho_zz - rho.rho_zz.adjoint()).cwiseAbs().maxCoeff() < 1e-9);
  double mean_sym = 0.0;
  for (const auto& f : ens.fields) mean_sym += f.symmetric_number();
  mean_sym /= static_cast<double>(ens.fields.size());
  CHECK(mean_sym == doctest::Approx(n).epsilon(0.01));
}

TEST_CASE("pure nonlinear step is an exact intensity-dependent phase") {
  auto c = small_config();
  c.n_traj = 3;
  c.chi_e = 2e-3;
  const auto ens0 = init_ensemble({flat_shape(c.nz, c.z_extent), 400.0}, c);
  const auto ens = propagate(ens0, c);
  for (std::size_t t = 0; t < c.n_traj; ++t)
    for (std::size_t z = 0; z < c.nz; ++z) {
      const cplx a = ens0.fields[t].psi[z];
      const cplx expected = a * std::polar(1.0, -2.0 * c.chi_e * (std::norm(a) - 1.0 / c.dz()) * c.t_final);
      CHECK(std::abs(ens.fields[t].psi[z] - expected) < 1e-10 * std::abs(a));
    }
}

TEST_CASE("pure dispersion rotates plane-wave modes by beta2 k^2 t / 2") {
  auto c = small_config();
  c.beta2 = 0.3;
  c.t_final = 0.5;
  c.dt = 0.01;
  c.n_traj = 200;
  const int j = 2;
  const auto modes = plane_wave_modes(c.nz, c.z_extent, {j});
  std::vector<cplx> shape(c.nz);
  for (std::size_t z = 0; z < c.nz; ++z) shape[z] = modes.phi(static_cast<Eigen::Index>(z), 0);
  const double n = 1e6;
  const auto ens = propagate(init_ensemble({shape, n}, c), c);
  const auto q = mode_quadratures(ens, modes);
  const cplx mean(q.x.row(0).mean() / std::sqrt(2.0), q.p.row(0).mean() / std::sqrt(2.0));
  const double k = 2.0 * kPi * j / c.z_extent;
  const double expected = -0.5 * c.beta2 * k * k * c.t_final;
  CHECK(std::abs(std::remainder(std::arg(mean) - expected, 2.0 * kPi)) < 1e-3);
  CHECK(std::abs(mean) == doctest::Approx(std::sqrt(n)).epsilon(1e-3));
}

TEST_CASE("single-mode variances follow the analytic Kerr curve") {
  PropagationConfig c;
  c.nz = 16;
  c.z_extent = 1.0;
  c.dt = 0.01;
  c.t_final = 1.0;
  c.beta2 = 0.1;
  c.n_traj = 4000;
  c.seed = 5;
  const double n = 1e4;
  c.chi_e = 0.3 / n;  // n * chi_bar reaches 0.3 at t_final
  const auto shape = flat_shape(c.nz, c.z_extent);
  auto ens = init_ensemble({shape, n}, c);
  const std::vector<std::size_t> snaps{0, 50, 100};
  ModeSet principal = plane_wave_modes(c.nz, c.z_extent, {0});
  Eigen::MatrixXcd amp(3, static_cast<Eigen::Index>(c.n_traj));
  propagate_observed(ens, c, snaps, [&](std::size_t t, std::size_t s, const CField& f) {
    amp(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = project(f, principal)(0);
  });
  const double chi = effective_single_mode_chi(c.chi_e, shape, c.dz());
  CHECK(chi == doctest::Approx(c.chi_e / c.z_extent));
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    const Eigen::RowVectorXd x = amp.row(static_cast<Eigen::Index>(s)).real() * std::sqrt(2.0);
    const Eigen::RowVectorXd p = amp.row(static_cast<Eigen::Index>(s)).imag() * std::sqrt(2.0);
    const auto an = fock::kerr_variances(fock::CoherentSpec(cplx(std::sqrt(n), 0.0)),
                                         fock::KerrCoupling(chi * c.dt * static_cast<double>(snaps[s])));
    const double se = std::sqrt(2.0 / static_cast<double>(c.n_traj));
    CHECK(std::abs(sample_variance(x) / an.var_x - 1.0) < 4.0 * se + 0.01);
    CHECK(std::abs(sample_variance(p) / an.var_p - 1.0) < 4.0 * se + 0.01);
  }
}

TEST_CASE("results do not depend on the thread count") {
  auto c = small_config();
  c.chi_e = 1e-3;
  c.beta2 = 0.05;
  c.n_traj = 37;
  const auto shape = gaussian_shape(c.nz, c.z_extent, 0.3, 0.1);
  set_thread_count(1);
  const auto a = propagate(init_ensemble({shape, 100.0}, c), c);
  set_thread_count(3);
  const auto b = propagate(init_ensemble({shape, 100.0}, c), c);
  set_thread_count(1);
  for (std::size_t t = 0; t < c.n_traj; ++t) CHECK(a.fields[t].psi == b.fields[t].psi);
}

TEST_CASE("ensemble snapshots round-trip bit-exactly") {
  auto c = small_config();
  c.n_traj = 5;
  const auto ens = init_ensemble({flat_shape(c.nz, c.z_extent), 10.0}, c);
  const auto dir = std::filesystem::temp_directory_path() / "sqz_twa_test";
  std::filesystem::create_directories(dir);
  save_ensemble((dir / "ens").string(), ens);
  const auto back = load_ensemble((dir / "ens").string());
  REQUIRE(back.fields.size() == ens.fields.size());
  for (std::size_t t = 0; t < c.n_traj; ++t) CHECK(back.fields[t].psi == ens.fields[t].psi);
  CHECK(back.config.seed == c.seed);
  CHECK(back.config.dt == c.dt);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid configurations are rejected") {
  auto c = small_config();
  c.nz = 12;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small_config();
  c.t_final = 0.105;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small_config();
  std::vector<cplx> bad(c.nz, cplx(2.0, 0.0));
  CHECK_THROWS_AS(init_ensemble({bad, 1.0}, c), InvalidArgument);
  c.chi_e = 1.0;
  c.dt = 0.05;
  c.t_final = 0.1;
  c.n_traj = 2;
  const auto ens = init_ensemble({flat_shape(c.nz, c.z_extent), 100.0}, c);
  CHECK_THROWS_AS(propagate(ens, c), InvalidArgument);
}

TEST_CASE("mode sets") {
  const auto m = plane_wave_modes(32, 2.0, {-2, 0, 5});
  CHECK_NOTHROW(m.validate());
  CHECK(m.count() == 3);
  const auto g = gaussian_shape(256, 1.0, 0.5, 0.05);
  CHECK(effective_single_mode_chi(1.0, g, 1.0 / 256) == doctest::Approx(1.0 / (2.0 * std::sqrt(kPi) * 0.05)).epsilon(1e-6));
  ModeSet bad{Eigen::MatrixXcd::Ones(8, 2), 0.125};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
