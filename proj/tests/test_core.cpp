#include <doctest.h>

#include "thornsim/core.hpp"
#include "thornsim/potentials.hpp"

using namespace thornsim;

TEST_CASE("physical constants") {
  CHECK(std::abs(constants::alpha - 1.0 / 137.036) / constants::alpha < 1e-5);
  CHECK(std::abs(constants::hbarc_mev_fm - 197.327) / 197.327 < 1e-5);
}

TEST_CASE("unit round trips") {
  const double q = 1.2345;
  CHECK(mev_from_inv_nm(inv_nm_from_mev(q)) == doctest::Approx(q).epsilon(1e-12));
  const double r = 0.0194;
  CHECK(nm_from_nat(nat_from_nm(r)) == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("critical parameters") {
  SUBCASE("zero well depth gives zero critical transfer") {
    const auto cp = critical_parameters(0.0, 1000.0);
    CHECK(cp.q_c_mev == 0.0);
    CHECK(cp.psi_c_mrad == 0.0);
  }
  SUBCASE("q_c of order 1 MeV means psi_c of order 1 mrad at 1 GeV") {
    // pick U0 so that q_c comes out exactly 1 MeV, then psi_c must be 1 mrad
    const double u0_ev = 1.0 / (2.0 * 1000.0) * constants::ev_per_mev;  // q_c^2/(2E)
    const auto cp = critical_parameters(u0_ev, 1000.0);
    CHECK(cp.q_c_mev == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cp.psi_c_mrad == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("sqrt(E) scaling") {
    const auto a = critical_parameters(22.0, 500.0);
    const auto b = critical_parameters(22.0, 2000.0);
    CHECK(b.q_c_mev == doctest::Approx(2.0 * a.q_c_mev).epsilon(1e-12));
    CHECK(b.psi_c_mrad == doctest::Approx(0.5 * a.psi_c_mrad).epsilon(1e-12));
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(critical_parameters(22.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(critical_parameters(-1.0, 1000.0), std::domain_error);
  }
}

TEST_CASE("particle state kinematics") {
  auto s = ParticleState::make(1000.0, ParticleKind::electron, {1e-3, 0.0}, {});
  CHECK(s.mass_shell_violation() < 1e-9);
  CHECK(s.charge_sign == -1);
  CHECK(s.p_transverse().x == doctest::Approx(1.0).epsilon(1e-3));

  // transverse kick then mass-shell restoration
  s.momentum_mev.x += 0.5;
  s.refresh_parallel_momentum();
  CHECK(s.mass_shell_violation() < 1e-9);

  CHECK_THROWS_AS(ParticleState::make(0.1, ParticleKind::electron, {}, {}), std::domain_error);
  auto forbidden = ParticleState::make(1.0, ParticleKind::positron, {}, {});
  forbidden.momentum_mev.x = 5.0;
  CHECK_THROWS_AS(forbidden.refresh_parallel_momentum(), std::domain_error);
}

TEST_CASE("crystal model validation") {
  auto c = CrystalModel::silicon_110();
  CHECK_NOTHROW(c.validate());
  CHECK(c.site_density == doctest::Approx(8.0 / std::pow(0.5431, 3) * 0.192).epsilon(1e-12));

  auto bad = c;
  bad.r_n_nm = 0.01;  // breaks r_N < u1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.u1_nm = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("transverse energy") {
  const auto crystal = CrystalModel::silicon_110();
  const auto screening = ScreeningModel::moliere(crystal.a_tf_nm, crystal.r_n_nm);
  const auto v = build_continuum(crystal, screening);

  SUBCASE("zero at rest at the particle's own minimum") {
    auto e = ParticleState::make(1000.0, ParticleKind::electron, {}, {v.min_location_nm, 0, 0});
    CHECK(std::abs(transverse_energy(e, v)) < 1e-9);
    // positron minimum is the gauged table minimum (midchannel), value 0
    double xmin = 0.0;
    double vmin = 1e30;
    for (int i = 0; i < 400; ++i) {
      const double x = crystal.interplanar_spacing_nm * i / 400.0;
      if (v.value(x) < vmin) vmin = v.value(x), xmin = x;
    }
    auto p = ParticleState::make(1000.0, ParticleKind::positron, {}, {xmin, 0, 0});
    CHECK(std::abs(transverse_energy(p, v)) < 1e-6);
  }
  SUBCASE("kinetic part is quadratic in p_T") {
    auto a = ParticleState::make(1000.0, ParticleKind::electron, {}, {v.min_location_nm, 0, 0});
    auto b = a;
    a.momentum_mev.x = 0.3;
    b.momentum_mev.x = 0.6;
    CHECK(transverse_energy(b, v) == doctest::Approx(4.0 * transverse_energy(a, v)).epsilon(1e-9));
  }
  SUBCASE("non-negative across the channel for both signs") {
    for (int i = 0; i <= 64; ++i) {
      const double x = crystal.interplanar_spacing_nm * i / 64.0;
      auto e = ParticleState::make(1000.0, ParticleKind::electron, {}, {x, 0, 0});
      auto p = ParticleState::make(1000.0, ParticleKind::positron, {}, {x, 0, 0});
      CHECK(transverse_energy(e, v) > -1e-9);
      CHECK(transverse_energy(p, v) > -1e-9);
    }
  }
}
