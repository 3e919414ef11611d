#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "thornsim/xs.hpp"

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

const FormFactorModel& ff() {
  static const FormFactorModel f = FormFactorModel::silicon();
  return f;
}

PhenomenologicalThorn atom_thorn() {
  PhenomenologicalThorn t;
  t.z_eff = si().Z;
  t.r_max_nm = si().u1_nm;
  t.r_min_nm = si().r_n_nm;
  return t;
}

PhenomenologicalThorn electron_thorn() {
  PhenomenologicalThorn t;
  t.z_eff = 1;
  t.r_max_nm = si().a_tf_nm;
  t.r_min_nm = si().r_n_nm;
  return t;
}

constexpr double kHbarc2 = constants::hbarc_mev_nm * constants::hbarc_mev_nm;

}  // namespace

TEST_CASE("form factor model") {
  SUBCASE("neutrality and saturation") {
    CHECK(std::abs(ff().f_atom(1e-8)) < 1e-6);
    CHECK(ff().f_atom(100.0) == doctest::Approx(1.0).epsilon(1e-4));
    for (std::size_t k = 0; k < ff().orbitals().size(); ++k)
      CHECK(ff().f_orbital(k, 1e-10) == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("closure identity at sampled q") {
    for (double q : {0.001, 0.01, 0.1, 1.0}) {
      double sum = 0.0;
      for (std::size_t k = 0; k < ff().orbitals().size(); ++k)
        sum += ff().orbitals()[k].occupancy * ff().f_orbital(k, q);
      CHECK(ff().f_atom(q) == doctest::Approx(1.0 - sum / ff().Z()).epsilon(1e-10));
    }
  }
  SUBCASE("occupancies must sum to Z") {
    CHECK_THROWS_AS(FormFactorModel(14, {{0.02, 4}}), std::invalid_argument);
  }
}

TEST_CASE("generic Born formula against closed forms") {
  SUBCASE("electronic thorn: same amplitude through both code paths") {
    ThornElectron t;
    t.orbital = ff().orbitals()[1];
    t.offset_nm = {0.01, 0.005, 0.0};
    auto ft = [&](const Vec3& q) { return thorn_electron_ft_nat(q, t); };
    for (double q : {0.01, 0.1, 1.0}) {
      const Vec2 qt{q * 0.8, q * 0.6};
      const double generic = born_dsigma_generic(ft, {qt.x, qt.y, 0.0});
      const double closed = born_dsigma_electron(qt, {t.offset_nm.x, t.offset_nm.y}, ff(), 1);
      CHECK(generic == doctest::Approx(closed).epsilon(1e-10));
    }
  }
  SUBCASE("atomic thorn: prefactor and phase algebra") {
    ThornVib t;
    t.crystal = &si();
    t.screening = moliere();
    t.displacement_nm = {si().u1_nm, 0.0, 0.0};
    auto ft = [&](const Vec3& q) { return thorn_vib_ft_nat(q, t, si().u1_nm); };
    for (double q : {0.05, 0.5, 5.0}) {
      const Vec2 qt{q, 0.0};
      const double generic = born_dsigma_generic(ft, {qt.x, qt.y, 0.0});
      // closed form written out independently with the screening-implied f_A
      const double fa = q * q * atomic_ft_nat(q, moliere(), si().Z) /
                        (4.0 * M_PI * si().Z * constants::alpha);
      const double dw = std::exp(-0.5 * std::pow(q * nat_from_nm(si().u1_nm), 2));
      const double qu = q * nat_from_nm(si().u1_nm);
      const double amp2 = 1.0 + dw * dw - 2.0 * dw * std::cos(qu);
      const double closed =
          4.0 * std::pow(si().Z * constants::alpha * fa / (q * q), 2) * amp2 * kHbarc2;
      CHECK(generic == doctest::Approx(closed).epsilon(1e-10));
    }
    CHECK_THROWS_AS(born_dsigma_generic(ft, {0, 0, 0}), std::domain_error);
  }
  SUBCASE("doubling the charge quadruples the cross section") {
    auto t = atom_thorn();
    auto t2 = t;
    t2.z_eff = 2 * t.z_eff;
    auto f1 = [&](const Vec3& q) { return std::complex<double>(t.form_factor_nat(q.norm()), 0.0); };
    auto f2 = [&](const Vec3& q) { return std::complex<double>(t2.form_factor_nat(q.norm()), 0.0); };
    CHECK(born_dsigma_generic(f2, {0.7, 0, 0}) ==
          doctest::Approx(4.0 * born_dsigma_generic(f1, {0.7, 0, 0})).epsilon(1e-12));
  }
}

TEST_CASE("atomic thorn cross section") {
  const double u1 = si().u1_nm;
  SUBCASE("azimuthal average equals the Bessel closed form") {
    for (double q : {0.5, 2.0, 8.0}) {
      for (double u : {0.0, u1, 2.5 * u1}) {
        const int n = 4096;
        double avg = 0.0;
        for (int j = 0; j < n; ++j) {
          const double phi = 2.0 * M_PI * (j + 0.5) / n;
          avg += born_dsigma_atom({q * std::cos(phi), q * std::sin(phi)}, {u, 0.0}, ff(), u1);
        }
        avg /= n;
        CHECK(avg == doctest::Approx(born_dsigma_atom_avg(q, u, ff(), u1)).epsilon(1e-6));
      }
    }
  }
  SUBCASE("large q approaches the bare Coulomb form") {
    const double q = 60.0;
    const double rutherford = 4.0 * std::pow(si().Z * constants::alpha / (q * q), 2) * kHbarc2;
    CHECK(born_dsigma_atom_avg(q, u1, ff(), u1) == doctest::Approx(rutherford).epsilon(2e-2));
  }
  SUBCASE("total cross section grows with the displacement") {
    double prev = -1.0;
    for (double u : {0.0, 0.5 * u1, u1, 2.0 * u1, 3.5 * u1, 5.0 * u1}) {
      const double sigma = sigma_atom_total(u, ff(), u1);
      CHECK(sigma > prev);
      prev = sigma;
    }
    CHECK(sigma_atom_total(0.0, ff(), u1) > 0.0);  // thermal mismatch survives at u = 0
    CHECK(sigma_atom_total(u1, ff(), u1) > sigma_atom_total(0.0, ff(), u1));
  }
}

TEST_CASE("electronic thorn cross section") {
  SUBCASE("dipole-suppressed small-q limit is finite") {
    const double a = born_dsigma_electron_avg(1e-4, 0.0, ff(), 1);
    const double b = born_dsigma_electron_avg(2e-4, 0.0, ff(), 1);
    CHECK(a == doctest::Approx(b).epsilon(5e-2));
    CHECK(a > 0.0);
    CHECK(std::isfinite(a));
  }
  SUBCASE("free-electron limit at large q") {
    const double q = 1.0;  // far above 1/orbital radius for every shell
    const double rutherford = 4.0 * constants::alpha * constants::alpha / std::pow(q, 4) * kHbarc2;
    CHECK(born_dsigma_electron_avg(q, 0.005, ff(), 1) ==
          doctest::Approx(rutherford).epsilon(1e-2));
  }
  SUBCASE("azimuthal average matches direct quadrature") {
    const double q = 0.05, s = 0.01;
    const int n = 4096;
    double avg = 0.0;
    for (int j = 0; j < n; ++j) {
      const double phi = 2.0 * M_PI * (j + 0.5) / n;
      avg += born_dsigma_electron({q * std::cos(phi), q * std::sin(phi)}, {s, 0.0}, ff(), 1);
    }
    avg /= n;
    CHECK(avg == doctest::Approx(born_dsigma_electron_avg(q, s, ff(), 1)).epsilon(1e-6));
  }
}

TEST_CASE("classical eikonal kick") {
  SUBCASE("single Yukawa Bessel oracle") {
    const double g = si().Z * constants::alpha * constants::hbarc_ev_nm;
    const double mu = 1.0 / si().a_tf_nm;
    for (double b : {0.005, 0.02, 0.05}) {
      const double numeric =
          classical_kick_numeric(b, [&](double r) { return g * std::exp(-mu * r) / r; });
      const double analytic = 2.0 * si().Z * constants::alpha *
                              mev_from_inv_nm(mu) * boost::math::cyl_bessel_k(1, mu * b);
      CHECK(numeric == doctest::Approx(analytic).epsilon(1e-6));
    }
  }
  SUBCASE("pure Coulomb limit") {
    const double g = constants::alpha * constants::hbarc_ev_nm;  // unit charge
    const double mu = 1.0;  // range 1 nm, far beyond the probe scale
    const double b = 1e-3;
    const double numeric =
        classical_kick_numeric(b, [&](double r) { return g * std::exp(-mu * r) / r; });
    const double coulomb = 2.0 * constants::alpha * constants::hbarc_mev_nm / b;
    CHECK(numeric == doctest::Approx(coulomb).epsilon(5e-3));
  }
  SUBCASE("analytic matches numeric for the regularized thorn") {
    const auto t = atom_thorn();
    for (double b : {1e-5, 1e-4, 1e-3, 5e-3}) {
      const double analytic = classical_kick_magnitude(b, t);
      const double numeric = classical_kick_numeric(b, [&](double r) { return t.potential_ev(r); });
      CHECK(numeric == doctest::Approx(analytic).epsilon(1e-3));
    }
  }
  SUBCASE("kick is radial") {
    const auto t = atom_thorn();
    const Vec2 k = classical_kick({3e-4, 4e-4}, t);
    CHECK(k.x / k.y == doctest::Approx(3.0 / 4.0).epsilon(1e-10));
    CHECK(k.norm() == doctest::Approx(classical_kick_magnitude(5e-4, t)).epsilon(1e-10));
  }
  SUBCASE("rainbow structure: vanishing at the center, single maximum") {
    const auto t = atom_thorn();
    const auto rp = classical_kick_maximum(t);
    // inner and outer Coulomb parts cancel at the very center
    CHECK(classical_kick_magnitude(1e-13, t) < 1e-5 * rp.q_mev);
    // the maximum sits at the inner-regulator scale
    CHECK(rp.b_nm > 0.1 * t.r_min_nm);
    CHECK(rp.b_nm < 10.0 * t.r_min_nm);
    CHECK(rp.q_mev >= classical_kick_magnitude(rp.b_nm * 0.9, t));
    CHECK(rp.q_mev >= classical_kick_magnitude(rp.b_nm * 1.1, t));
    // rising inner branch, monotone outer branch
    CHECK(classical_kick_magnitude(0.03 * rp.b_nm, t) < classical_kick_magnitude(0.3 * rp.b_nm, t));
    double prev = rp.q_mev;
    for (double b = 1.2 * rp.b_nm; b < 0.05; b *= 1.4) {
      const double cur = classical_kick_magnitude(b, t);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("classical differential cross section") {
  const auto t = atom_thorn();
  const auto rp = classical_kick_maximum(t);
  auto grid = DifferentialXS::make_grid(1e-3, 2.0 * rp.q_mev, 48, 32);
  const auto xs = classical_dsigma(t, grid);

  SUBCASE("compact support beyond the rainbow") {
    for (std::size_t i = 0; i < xs.q_mid_mev.size(); ++i) {
      if (xs.q_edges_mev[i] > rp.q_mev) {
        CHECK(xs.q_marginal_mass[i] == 0.0);
      }
    }
    CHECK(xs.q_marginal_mass.back() == 0.0);
  }
  SUBCASE("area measure is conserved through the map") {
    // outer radius where the kick drops to the grid floor, inner radius of the
    // sub-floor hole at the center
    auto solve = [&](double lo, double hi, double target, bool rising) {
      for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        const bool above = classical_kick_magnitude(mid, t) > target;
        if (above == rising)
          lo = mid;
        else
          hi = mid;
      }
      return std::sqrt(lo * hi);
    };
    const double q_floor = xs.q_edges_mev.front();
    const double b_outer = solve(rp.b_nm, 1.0, q_floor, true);
    const double b_inner = solve(1e-12, rp.b_nm, q_floor, false);
    const double area = M_PI * (b_outer * b_outer - b_inner * b_inner);
    CHECK(xs.total_nm2 == doctest::Approx(area).epsilon(0.01));
  }
  SUBCASE("Rutherford plateau below the rainbow") {
    const double zalpha = t.z_eff * constants::alpha;
    for (std::size_t i = 0; i < xs.q_mid_mev.size(); ++i) {
      const double q = xs.q_mid_mev[i];
      if (q < 0.3 || q > 3.0) continue;
      const double rutherford = 4.0 * zalpha * zalpha / std::pow(q, 4) * kHbarc2;
      double avg = 0.0;
      for (int j = 0; j < xs.n_phi; ++j) avg += xs.at(static_cast<int>(i), j);
      avg /= xs.n_phi;
      CHECK(avg / rutherford == doctest::Approx(1.0).epsilon(0.05));
    }
  }
}

TEST_CASE("first-moment sum rule") {
  SUBCASE("spherical thorn: zero by symmetry") {
    const auto t = atom_thorn();
    auto grid = DifferentialXS::make_grid(1e-3, 12.0, 48, 32);
    const auto xs = quantum_dsigma_phenomenological(t, grid);
    const Vec2 m = sum_rule_first_moment(xs);
    CHECK(std::abs(m.x) < 1e-12 * xs.abs_q_moment_mev_nm2());
    CHECK(std::abs(m.y) < 1e-12 * xs.abs_q_moment_mev_nm2());
  }
  SUBCASE("displaced atomic thorn: zero by parity") {
    auto grid = DifferentialXS::make_grid(1e-3, 50.0, 64, 64);
    const auto xs = quantum_dsigma_atom({si().u1_nm, 0.0}, ff(), si().u1_nm, grid);
    const Vec2 m = sum_rule_first_moment(xs);
    CHECK(m.norm() < 1e-3 * xs.abs_q_moment_mev_nm2());
  }
  SUBCASE("offset electronic thorn: zero by parity") {
    auto grid = DifferentialXS::make_grid(1e-4, 2.0, 64, 64);
    const auto xs = quantum_dsigma_electron({0.01, 0.0}, ff(), 1, grid);
    const Vec2 m = sum_rule_first_moment(xs);
    CHECK(m.norm() < 1e-3 * xs.abs_q_moment_mev_nm2());
  }
  SUBCASE("classical table: zero by construction") {
    const auto t = atom_thorn();
    const auto rp = classical_kick_maximum(t);
    auto grid = DifferentialXS::make_grid(1e-3, 2.0 * rp.q_mev, 48, 32);
    const auto xs = classical_dsigma(t, grid);
    const Vec2 m = sum_rule_first_moment(xs);
    CHECK(m.norm() < 1e-3 * xs.abs_q_moment_mev_nm2());
  }
}

TEST_CASE("second-moment sum rule") {
  SUBCASE("quantum and classical routes agree for regularized thorns") {
    for (double ratio : {1e-3, 1e-2}) {
      auto t = atom_thorn();
      t.r_min_nm = ratio * t.r_max_nm;
      const auto rep = sum_rule_second_moment(t);
      CHECK(rep.converged);
      CHECK(rep.ratio() == doctest::Approx(1.0).epsilon(0.01));
    }
  }
  SUBCASE("logarithmic divergence as the regulator is removed") {
    auto t3 = atom_thorn();
    t3.r_min_nm = 1e-3 * t3.r_max_nm;
    auto t4 = atom_thorn();
    t4.r_min_nm = 1e-4 * t4.r_max_nm;
    const double m3 = sum_rule_second_moment(t3).second_moment_quantum_mev2_nm2;
    const double m4 = sum_rule_second_moment(t4).second_moment_quantum_mev2_nm2;
    const double zalpha = si().Z * constants::alpha;
    const double slope = 8.0 * M_PI * zalpha * zalpha * kHbarc2;  // per ln(r_max/r_min)
    CHECK((m4 - m3) / std::log(10.0) == doctest::Approx(slope).epsilon(0.05));
  }
  SUBCASE("charge scaling") {
    auto t = atom_thorn();
    t.r_min_nm = 1e-3 * t.r_max_nm;
    auto t2 = t;
    t2.z_eff = 2 * t.z_eff;
    const auto a = sum_rule_second_moment(t);
    const auto b = sum_rule_second_moment(t2);
    CHECK(b.second_moment_quantum_mev2_nm2 ==
          doctest::Approx(4.0 * a.second_moment_quantum_mev2_nm2).epsilon(1e-6));
    CHECK(b.second_moment_classical_mev2_nm2 ==
          doctest::Approx(4.0 * a.second_moment_classical_mev2_nm2).epsilon(1e-6));
  }
  SUBCASE("unregularized thorn rejected") {
    auto t = atom_thorn();
    t.r_min_nm = 0.0;
    CHECK_THROWS(sum_rule_second_moment(t));
  }
}

TEST_CASE("single-collision dechanneling cross section") {
  SUBCASE("numeric matches the closed form across the cutoff range") {
    const double q_c = 1.0;
    for (double ratio : {10.0, 100.0, 1000.0, 10000.0}) {
      const auto est = dechanneling_xs(q_c, q_c / ratio, 1e4 * q_c, 14);
      CHECK(est.sigma_numeric_nm2 ==
            doctest::Approx(est.sigma_closed_form_nm2).epsilon(0.02));
    }
  }
  SUBCASE("degenerate cutoffs drop the multiple-scattering logarithm") {
    const auto est = dechanneling_xs(1.0, 1.0 - 1e-12, 1e6, 14);
    const double expected = 4.0 * M_PI * std::pow(14.0 * constants::alpha, 2) * kHbarc2;
    CHECK(est.sigma_closed_form_nm2 == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("cutoff ordering enforced") {
    CHECK_THROWS_AS(dechanneling_xs(1.0, 2.0, 10.0, 14), std::domain_error);
  }
}

TEST_CASE("classical to quantum dechanneling ratio") {
  SUBCASE("electron case") {
    const auto rep = dech_ratio(DechCase::electron, si(), 1000.0, 1.0);
    CHECK(rep.ratio == doctest::Approx(1.97).epsilon(0.02 / 1.97));
    CHECK(rep.ratio > 1.0);
  }
  SUBCASE("atom case at two critical transfers") {
    CHECK(dech_ratio(DechCase::atom, si(), 1000.0, 1.0).ratio ==
          doctest::Approx(1.55).epsilon(0.02 / 1.55));
    CHECK(dech_ratio(DechCase::atom, si(), 1000.0, 3.2).ratio ==
          doctest::Approx(1.43).epsilon(0.02 / 1.43));
  }
  SUBCASE("monotone decreasing in the critical transfer") {
    double prev = 1e30;
    // stay below the atom-case classical kinematic cap Z alpha hbar c / r_N
    for (double qc : {0.5, 1.0, 2.0, 3.0, 4.5, 6.0}) {
      const double r = dech_ratio(DechCase::atom, si(), 1000.0, qc).ratio;
      CHECK(r < prev);
      CHECK(r > 1.0);
      prev = r;
    }
  }
}
