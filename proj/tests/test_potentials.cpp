#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "thornsim/potentials.hpp"

using namespace thornsim;
using boost::math::quadrature::gauss_kronrod;

namespace {

const CrystalModel& si() {
  static const CrystalModel c = CrystalModel::silicon_110();
  return c;
}

const ScreeningModel& moliere() {
  static const ScreeningModel s = ScreeningModel::moliere(si().a_tf_nm, si().r_n_nm);
  return s;
}

// radial 3-D Fourier transform (4 pi / q) int r sin(q r) W(r) dr, natural
// units; summed half-period by half-period so the oscillation never defeats
// the quadrature
double radial_ft_nat(const std::function<double(double)>& w_ev, double q_mev, double r_hi_nm) {
  const double q_inv_nm = inv_nm_from_mev(q_mev);
  auto f = [&](double r) { return r * std::sin(q_inv_nm * r) * w_ev(r) / constants::ev_per_mev; };
  const double half_period = M_PI / q_inv_nm;
  double val = 0.0;
  double a = 0.0;
  while (a < r_hi_nm) {
    const double b = std::min(a + half_period, r_hi_nm);
    val += gauss_kronrod<double, 31>::integrate(f, a, b, 4, 1e-12);
    a = b;
  }
  // convert nm^2 * MeV -> MeV^-1, then the 4pi/q prefactor gives MeV^-2
  const double nat = val / (constants::hbarc_mev_nm * constants::hbarc_mev_nm);
  return 4.0 * M_PI / q_mev * nat;
}

}  // namespace

TEST_CASE("screened atomic potential") {
  SUBCASE("Coulomb limit at the nuclear regulator") {
    const double r = si().r_n_nm * 1.0001;
    const double expected = si().Z * constants::alpha * constants::hbarc_ev_nm / r;
    CHECK(atomic_potential(r, moliere(), si().Z) == doctest::Approx(expected).epsilon(2e-3));
  }
  SUBCASE("capped below r_N") {
    CHECK(atomic_potential(0.0, moliere(), si().Z) ==
          doctest::Approx(atomic_potential(si().r_n_nm, moliere(), si().Z)).epsilon(1e-9));
  }
  SUBCASE("Yukawa decay bound") {
    const double a = si().a_tf_nm;
    CHECK(atomic_potential(10.0 * a, moliere(), si().Z) <
          0.1 * std::exp(-9.0 * 0.3) * atomic_potential(a, moliere(), si().Z));
  }
  SUBCASE("negative radius rejected") {
    CHECK_THROWS_AS(atomic_potential(-1.0, moliere(), si().Z), std::domain_error);
  }
  SUBCASE("single-Yukawa Fourier transform oracle") {
    ScreeningModel one;
    one.terms = {{1.0, 1.0 / si().a_tf_nm}};
    one.mu_n_inv_nm = 1e8;  // push the inner cap far below any probed scale
    for (double q : {0.05, 0.2, 1.0}) {
      const double numeric = radial_ft_nat(
          [&](double r) { return atomic_potential(r, one, si().Z); }, q, 2.0);
      const double mu = mev_from_inv_nm(1.0 / si().a_tf_nm);
      const double analytic = 4.0 * M_PI * si().Z * constants::alpha / (q * q + mu * mu);
      CHECK(numeric == doctest::Approx(analytic).epsilon(1e-5));
    }
  }
}

TEST_CASE("thermally smeared potential") {
  const double u1 = si().u1_nm;
  SUBCASE("u1 -> 0 recovers the bare potential pointwise") {
    for (double r : {0.002, 0.01, 0.05}) {
      CHECK(smeared_atomic_potential(r, moliere(), si().Z, 1e-7) ==
            doctest::Approx(atomic_potential(r, moliere(), si().Z)).epsilon(1e-6));
    }
  }
  SUBCASE("finite at the origin: Gaussian-smeared Coulomb value") {
    // a Yukawa with range far beyond u1 behaves like pure Coulomb at the origin
    const double expected =
        si().Z * constants::alpha * constants::hbarc_ev_nm * std::sqrt(2.0 / M_PI) / u1;
    const double v0 = smeared_yukawa(si().Z * constants::alpha * constants::hbarc_ev_nm,
                                     1e-4, u1, 0.0);
    CHECK(v0 == doctest::Approx(expected).epsilon(1e-4));
  }
  SUBCASE("momentum-space ratio is the thermal suppression factor") {
    for (double q : {5.0, 10.0}) {
      const double bare = radial_ft_nat(
          [&](double r) { return atomic_potential(r, moliere(), si().Z); }, q, 1.0);
      const double smeared = radial_ft_nat(
          [&](double r) { return smeared_atomic_potential(r, moliere(), si().Z, u1); }, q, 1.0);
      const double qu = q * nat_from_nm(u1);
      CHECK(smeared / bare == doctest::Approx(std::exp(-0.5 * qu * qu)).epsilon(1e-6));
    }
  }
}

TEST_CASE("continuum channel potential") {
  const auto v = build_continuum(si(), moliere());
  const double d = si().interplanar_spacing_nm;
  SUBCASE("mirror symmetry about the midplane") {
    for (int i = 1; i < 32; ++i) {
      const double x = d * i / 32.0;
      CHECK(v.value(x) == doctest::Approx(v.value(d - x)).epsilon(1e-10));
    }
  }
  SUBCASE("well depth in the expected band for Si(110)") {
    CHECK(v.depth_u0_ev > 15.0);
    CHECK(v.depth_u0_ev < 30.0);
    double vmax = 0.0, vmin = 1e30;
    for (int i = 0; i < 2048; ++i) {
      const double val = v.value(d * i / 2048.0);
      vmax = std::max(vmax, val);
      vmin = std::min(vmin, val);
    }
    CHECK(vmax - vmin == doctest::Approx(v.depth_u0_ev).epsilon(1e-6));
    CHECK(std::abs(vmin) < 1e-9);  // gauged to zero at the minimum
  }
  SUBCASE("gradient vanishes at the symmetry points") {
    CHECK(std::abs(v.gradient(0.5 * d)) < 1e-6);
    CHECK(std::abs(v.gradient(0.0)) < 1e-6);
  }
  SUBCASE("gradient table consistent with the value table") {
    const double h = 1e-5;
    for (double x : {0.1 * d, 0.3 * d, 0.7 * d}) {
      const double fd = (v.value(x + h) - v.value(x - h)) / (2.0 * h);
      CHECK(v.gradient(x) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
  SUBCASE("undersampled grid rejected") {
    ContinuumBuildOptions opt;
    opt.points_per_period = 8;
    CHECK_THROWS_AS(build_continuum(si(), moliere(), opt), std::invalid_argument);
  }
}

TEST_CASE("atomic residual potential") {
  ThornVib t;
  t.crystal = &si();
  t.screening = moliere();
  t.displacement_nm = {si().u1_nm, 0.0, 0.0};
  const double u1 = si().u1_nm;

  SUBCASE("vanishes when displacement and smearing both vanish") {
    ThornVib t0 = t;
    t0.displacement_nm = {};
    CrystalModel frozen = si();
    frozen.r_n_nm = 1e-8;
    frozen.u1_nm = 1e-7;
    t0.crystal = &frozen;
    for (double r : {0.003, 0.01, 0.04})
      CHECK(std::abs(thorn_vib_potential({r, 0, 0}, t0)) < 1e-6);
  }
  SUBCASE("cylindrical integral is near zero, short range") {
    // 2 pi int rho drho dx over a box of half-width 20 a_TF; displacement on x
    const double half = 20.0 * si().a_tf_nm;
    const int nx = 400, nr = 200;
    double integral = 0.0, abs_integral = 0.0, within_screening = 0.0;
    for (int i = 0; i < nx; ++i) {
      const double x = -half + (i + 0.5) * 2.0 * half / nx;
      for (int j = 0; j < nr; ++j) {
        const double rho = (j + 0.5) * half / nr;
        const double w = thorn_vib_potential({x, rho, 0.0}, t);
        const double measure = 2.0 * M_PI * rho * (2.0 * half / nx) * (half / nr);
        integral += w * measure;
        abs_integral += std::abs(w) * measure;
        if (std::sqrt(x * x + rho * rho) < 12.0 * si().a_tf_nm)
          within_screening += std::abs(w) * measure;
      }
    }
    CHECK(std::abs(integral) < 0.01 * abs_integral);
    // near-cancellation confines the residual to the screening neighbourhood;
    // the longest Moliere component (range a_TF/0.3) sets the tail, so the
    // enclosure radius scales with a_TF rather than u1
    CHECK(within_screening > 0.9 * abs_integral);
    // far field well below the peak
    const double peak = std::abs(thorn_vib_potential({u1 + 1e-4, 0, 0}, t));
    CHECK(std::abs(thorn_vib_potential({15.0 * si().a_tf_nm, 0, 0}, t)) < 1e-3 * peak);
  }
  SUBCASE("projection is linear") {
    std::vector<double> xs;
    for (int i = -20; i <= 20; ++i) xs.push_back(0.004 * i);
    const double u = t.displacement_nm.x;
    // the thorn projected along x equals the displaced bare projection minus
    // the smeared one
    auto bare = projected_profile(
        [&](double r) { return atomic_potential(r, moliere(), si().Z); }, xs);
    auto smeared = projected_profile(
        [&](double r) { return smeared_atomic_potential(r, moliere(), si().Z, u1); }, xs);
    std::vector<double> xs_shift;
    for (double x : xs) xs_shift.push_back(x - u);
    auto bare_shift = projected_profile(
        [&](double r) { return atomic_potential(r, moliere(), si().Z); }, xs_shift);
    double sign_changes = 0;
    double net = 0.0, gross = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double thorn_profile = bare_shift.value_ev_nm2[i] - smeared.value_ev_nm2[i];
      net += thorn_profile;
      gross += std::abs(thorn_profile);
      if (i > 0) {
        const double prev = bare_shift.value_ev_nm2[i - 1] - smeared.value_ev_nm2[i - 1];
        if (prev * thorn_profile < 0.0) ++sign_changes;
      }
      (void)bare;
    }
    CHECK(sign_changes >= 1);       // positive peak at the nucleus, shallow well around it
    CHECK(std::abs(net) < 0.02 * gross);
  }
}

TEST_CASE("electronic residual potential") {
  OrbitalModel orb;
  orb.radius_nm = 0.02;
  orb.occupancy = 1;
  SUBCASE("cloud density normalized") {
    auto f = [&](double r) { return 4.0 * M_PI * r * r * orb.density(r); };
    const double total = gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 10, 1e-10);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("far field is dipolar") {
    ThornElectron t;
    t.orbital = orb;
    t.offset_nm = {0.006, 0.0, 0.0};
    const double s = t.offset_nm.x;
    const double coef = constants::alpha * constants::hbarc_ev_nm;
    for (double r : {20.0 * orb.radius_nm, 30.0 * orb.radius_nm}) {
      const double v_along = thorn_electron_potential({r, 0, 0}, t);
      CHECK(v_along == doctest::Approx(-coef * s / (r * r)).epsilon(0.02));
      // monopole cancellation: r*V much smaller than a bare charge's r*V
      CHECK(std::abs(r * v_along) < 0.05 * coef / orb.radius_nm * orb.radius_nm);
    }
    // perpendicular to the dipole the leading term vanishes
    const double r = 25.0 * orb.radius_nm;
    CHECK(std::abs(thorn_electron_potential({0, r, 0}, t)) <
          0.05 * std::abs(thorn_electron_potential({r, 0, 0}, t)));
  }
  SUBCASE("zero offset gives a spherically symmetric potential") {
    ThornElectron t;
    t.orbital = orb;
    const double a = thorn_electron_potential({0.03, 0, 0}, t);
    const double b = thorn_electron_potential({0, 0.03, 0}, t);
    const double c = thorn_electron_potential({0.03 / std::sqrt(2.0), 0.03 / std::sqrt(2.0), 0}, t);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    CHECK(a == doctest::Approx(c).epsilon(1e-9));
  }
  SUBCASE("density: point charge plus opposite cloud sums to zero") {
    ThornElectron t;
    t.orbital = orb;
    t.offset_nm = {0.01, 0, 0};
    // the continuous part carries +1 (in units of e); the -1 delta sits at the
    // offset, so the total integrates to zero by construction
    auto f = [&](double r) { return 4.0 * M_PI * r * r * thorn_electron_density({r, 0, 0}, t); };
    // density is spherically symmetric about the nucleus for the cloud part
    const double cloud = gauss_kronrod<double, 61>::integrate(f, 1e-6, 1.0, 10, 1e-8);
    CHECK(cloud == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("spherical regularized stand-in potential") {
  PhenomenologicalThorn t;
  t.z_eff = 14;
  t.r_max_nm = si().u1_nm;
  t.r_min_nm = si().r_n_nm;
  SUBCASE("validation") {
    CHECK_NOTHROW(t.validate());
    auto bad = t;
    bad.r_min_nm = bad.r_max_nm;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("finite at the origin") {
    const double expected = t.z_eff * constants::alpha * constants::hbarc_ev_nm *
                            (1.0 / t.r_min_nm - 1.0 / t.r_max_nm);
    CHECK(t.potential_ev(1e-9) == doctest::Approx(expected).epsilon(1e-3));
  }
  SUBCASE("momentum-space form matches real-space quadrature") {
    for (double q : {0.1, 1.0, 10.0}) {
      const double numeric = radial_ft_nat([&](double r) { return t.potential_ev(r); }, q, 0.5);
      CHECK(numeric == doctest::Approx(t.form_factor_nat(q)).epsilon(1e-5));
    }
  }
}

TEST_CASE("scaled complementary error function") {
  CHECK(erfcx(0.0) == doctest::Approx(1.0));
  CHECK(erfcx(0.5) == doctest::Approx(std::exp(0.25) * std::erfc(0.5)).epsilon(1e-12));
  CHECK(erfcx(50.0) == doctest::Approx(1.0 / (50.0 * std::sqrt(M_PI))).epsilon(1e-3));
}
