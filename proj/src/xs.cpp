#include "thornsim/xs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace thornsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHbarc2 = constants::hbarc_mev_nm * constants::hbarc_mev_nm;  // nm^2 MeV^2

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
}  // namespace

FormFactorModel::FormFactorModel(int Z, std::vector<OrbitalModel> orbitals)
    : z_(Z), orbitals_(std::move(orbitals)) {
  int occ = 0;
  for (const auto& o : orbitals_) occ += o.occupancy;
  if (occ != z_) throw std::invalid_argument("FormFactorModel: orbital occupancies must sum to Z");
}

double FormFactorModel::f_atom(double q_mev) const {
  double sum = 0.0;
  for (const auto& o : orbitals_) sum += o.occupancy * o.form_factor(q_mev);
  return 1.0 - sum / z_;
}

double FormFactorModel::f_orbital(std::size_t k, double q_mev) const {
  return orbitals_.at(k).form_factor(q_mev);
}

FormFactorModel FormFactorModel::silicon() {
  // effective hydrogen-like shells: K, L, M radii from screened-charge
  // estimates a_n ~ n^2 a_B / Z_eff
  return FormFactorModel(14, {{0.0039, 2}, {0.021, 8}, {0.111, 4}});
}

double DifferentialXS::phi_mid(int iphi) const { return 2.0 * kPi * (iphi + 0.5) / n_phi; }

DifferentialXS DifferentialXS::make_grid(double q_lo_mev, double q_hi_mev, int points_per_decade,
                                         int n_phi) {
  if (!(q_lo_mev > 0.0 && q_hi_mev > q_lo_mev))
    throw std::invalid_argument("DifferentialXS: bad q range");
  DifferentialXS xs;
  const double decades = std::log10(q_hi_mev / q_lo_mev);
  const int n_q = std::max(8, static_cast<int>(std::ceil(decades * points_per_decade)));
  xs.q_edges_mev.resize(n_q + 1);
  xs.q_mid_mev.resize(n_q);
  for (int i = 0; i <= n_q; ++i)
    xs.q_edges_mev[i] = q_lo_mev * std::pow(q_hi_mev / q_lo_mev, static_cast<double>(i) / n_q);
  for (int i = 0; i < n_q; ++i)
    xs.q_mid_mev[i] = std::sqrt(xs.q_edges_mev[i] * xs.q_edges_mev[i + 1]);
  xs.n_phi = n_phi;
  xs.value.assign(static_cast<std::size_t>(n_q) * n_phi, 0.0);
  return xs;
}

void DifferentialXS::finalize() {
  const int n_q = static_cast<int>(q_mid_mev.size());
  q_marginal_mass.assign(n_q, 0.0);
  q_cdf.assign(n_q + 1, 0.0);
  phi_cdf.assign(static_cast<std::size_t>(n_q) * (n_phi + 1), 0.0);
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_q; ++i) {
    const double ring = 0.5 * (q_edges_mev[i + 1] * q_edges_mev[i + 1] -
                               q_edges_mev[i] * q_edges_mev[i]);  // int q dq
    double row = 0.0;
    for (int j = 0; j < n_phi; ++j) {
      const double cell = at(i, j) * ring * dphi;
      if (cell < 0.0) throw std::logic_error("DifferentialXS: negative cross section");
      row += cell;
      phi_cdf[static_cast<std::size_t>(i) * (n_phi + 1) + j + 1] =
          phi_cdf[static_cast<std::size_t>(i) * (n_phi + 1) + j] + cell;
    }
    q_marginal_mass[i] = row;
    q_cdf[i + 1] = q_cdf[i] + row;
    if (row > 0.0) {
      for (int j = 0; j <= n_phi; ++j)
        phi_cdf[static_cast<std::size_t>(i) * (n_phi + 1) + j] /= row;
    }
  }
  total_nm2 = q_cdf[n_q];
  if (total_nm2 > 0.0)
    for (auto& c : q_cdf) c /= total_nm2;
}

Vec2 DifferentialXS::first_moment_mev_nm2() const {
  Vec2 m{};
  const int n_q = static_cast<int>(q_mid_mev.size());
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_q; ++i) {
    const double ring = 0.5 * (q_edges_mev[i + 1] * q_edges_mev[i + 1] -
                               q_edges_mev[i] * q_edges_mev[i]);
    for (int j = 0; j < n_phi; ++j) {
      const double w = at(i, j) * ring * dphi;
      const double phi = phi_mid(j);
      m.x += w * q_mid_mev[i] * std::cos(phi);
      m.y += w * q_mid_mev[i] * std::sin(phi);
    }
  }
  return m;
}

double DifferentialXS::abs_q_moment_mev_nm2() const {
  double m = 0.0;
  for (std::size_t i = 0; i < q_mid_mev.size(); ++i) m += q_marginal_mass[i] * q_mid_mev[i];
  return m;
}

double DifferentialXS::second_moment_mev2_nm2() const {
  double m = 0.0;
  for (std::size_t i = 0; i < q_mid_mev.size(); ++i)
    m += q_marginal_mass[i] * q_mid_mev[i] * q_mid_mev[i];
  return m;
}

double born_dsigma_generic(const std::function<std::complex<double>(const Vec3&)>& ft_nat,
                           const Vec3& q_mev) {
  const double q2 = q_mev.norm2();
  if (q2 <= 0.0) throw std::domain_error("born_dsigma_generic: q = 0");
  const double amp2 = std::norm(ft_nat(q_mev));
  return amp2 / (4.0 * kPi * kPi) * kHbarc2;
}

double born_dsigma_atom(const Vec2& q_t_mev, const Vec2& u_t_nm, const FormFactorModel& ff,
                        double u1_nm) {
  const double q = q_t_mev.norm();
  if (!(q > 0.0)) throw std::domain_error("born_dsigma_atom: |q| must be > 0");
  const double fa = ff.f_atom(q);
  const double u1 = nat_from_nm(u1_nm);
  const double dw = std::exp(-0.5 * q * q * u1 * u1);
  const double qu = q_t_mev.dot(u_t_nm) / constants::hbarc_mev_nm;
  const double amp2 = 1.0 + dw * dw - 2.0 * dw * std::cos(qu);
  const double pre = ff.Z() * constants::alpha * fa / (q * q);
  return 4.0 * pre * pre * amp2 * kHbarc2;
}

double born_dsigma_atom_avg(double q_mev, double abs_u_nm, const FormFactorModel& ff,
                            double u1_nm) {
  const double fa = ff.f_atom(q_mev);
  const double u1 = nat_from_nm(u1_nm);
  const double dw = std::exp(-0.5 * q_mev * q_mev * u1 * u1);
  const double j0 = std::cyl_bessel_j(0, q_mev * nat_from_nm(abs_u_nm));
  const double amp2 = 1.0 + dw * dw - 2.0 * dw * j0;
  const double pre = ff.Z() * constants::alpha * fa / (q_mev * q_mev);
  return 4.0 * pre * pre * amp2 * kHbarc2;
}

double sigma_atom_total(double abs_u_t_nm, const FormFactorModel& ff, double u1_nm) {
  if (abs_u_t_nm < 0.0) throw std::domain_error("sigma_atom_total: |u| must be >= 0");
  const double u1 = nat_from_nm(u1_nm);
  const double u = nat_from_nm(abs_u_t_nm);
  const double z_alpha = ff.Z() * constants::alpha;
  auto bracket = [&](double q, bool with_j0) {
    const double fa = ff.f_atom(q);
    const double dw = std::exp(-0.5 * q * q * u1 * u1);
    const double j0 = with_j0 ? std::cyl_bessel_j(0, q * u) : 0.0;
    return 2.0 * fa * fa / (q * q * q) * (1.0 + dw * dw - 2.0 * dw * j0);
  };
  const double q_split = 8.0 / u1;  // Debye-Waller factor dead beyond this
  const double q_top = std::max(200.0, 4.0 * q_split);
  double err1 = 0.0, err2 = 0.0;
  const double i1 = GK::integrate([&](double q) { return bracket(q, true); }, 0.0, q_split, 12,
                                  1e-9, &err1);
  const double i2 = GK::integrate([&](double q) { return bracket(q, false); }, q_split, q_top, 12,
                                  1e-9, &err2);
  const double tail = 1.0 / (q_top * q_top);  // f_A -> 1, bracket -> 1
  return 4.0 * kPi * z_alpha * z_alpha * (i1 + i2 + tail) * kHbarc2;
}

double born_dsigma_electron(const Vec2& q_t_mev, const Vec2& s_t_nm, const FormFactorModel& ff,
                            std::size_t orbital_k) {
  const double q = q_t_mev.norm();
  if (!(q > 0.0)) throw std::domain_error("born_dsigma_electron: |q| must be > 0");
  const double fk = ff.f_orbital(orbital_k, q);
  const double qs = q_t_mev.dot(s_t_nm) / constants::hbarc_mev_nm;
  const double amp2 = 1.0 + fk * fk - 2.0 * fk * std::cos(qs);
  const double pre = constants::alpha / (q * q);
  return 4.0 * pre * pre * amp2 * kHbarc2;
}

double born_dsigma_electron_avg(double q_mev, double abs_s_nm, const FormFactorModel& ff,
                                std::size_t orbital_k) {
  const double fk = ff.f_orbital(orbital_k, q_mev);
  const double j0 = std::cyl_bessel_j(0, q_mev * nat_from_nm(abs_s_nm));
  const double amp2 = 1.0 + fk * fk - 2.0 * fk * j0;
  const double pre = constants::alpha / (q_mev * q_mev);
  return 4.0 * pre * pre * amp2 * kHbarc2;
}

double sigma_electron_total(double abs_s_t_nm, const FormFactorModel& ff, std::size_t orbital_k,
                            double q_min_mev, double q_max_mev) {
  if (!(q_min_mev > 0.0 && q_max_mev > q_min_mev))
    throw std::domain_error("sigma_electron_total: need 0 < q_min < q_max");
  const double s = nat_from_nm(abs_s_t_nm);
  const double a_nat = nat_from_nm(ff.orbitals().at(orbital_k).radius_nm);
  auto integrand = [&](double q) {
    const double fk = ff.f_orbital(orbital_k, q);
    const double j0 = std::cyl_bessel_j(0, q * s);
    return 2.0 / (q * q * q) * (1.0 + fk * fk - 2.0 * fk * j0);
  };
  const double q_split = std::min(20.0 / a_nat, q_max_mev);
  double err = 0.0;
  double sum = 0.0;
  if (q_min_mev < q_split)
    sum += GK::integrate(integrand, q_min_mev, q_split, 12, 1e-9, &err);
  if (q_split < q_max_mev)  // form factor negligible: free-electron Rutherford tail
    sum += 1.0 / (q_split * q_split) - 1.0 / (q_max_mev * q_max_mev);
  const double a2 = constants::alpha * constants::alpha;
  return 4.0 * kPi * a2 * sum * kHbarc2;
}

double classical_kick_magnitude(double b_nm, const PhenomenologicalThorn& thorn) {
  if (!(b_nm > 0.0)) throw std::domain_error("classical_kick: |b| must be > 0");
  const double b = nat_from_nm(b_nm);
  const double m1 = mev_from_inv_nm(1.0 / thorn.r_max_nm);
  const double m2 = mev_from_inv_nm(1.0 / thorn.r_min_nm);
  auto yuk = [&](double mu) {
    const double x = mu * b;
    if (x > 700.0) return 0.0;
    return 2.0 * thorn.z_eff * constants::alpha * mu * std::cyl_bessel_k(1, x);
  };
  return yuk(m1) - yuk(m2);
}

Vec2 classical_kick(const Vec2& b_nm, const PhenomenologicalThorn& thorn) {
  const double b = b_nm.norm();
  const double q = classical_kick_magnitude(b, thorn);
  return {q * b_nm.x / b, q * b_nm.y / b};
}

double classical_kick_numeric(double b_nm, const std::function<double(double)>& radial_ev) {
  if (!(b_nm > 0.0)) throw std::domain_error("classical_kick_numeric: |b| must be > 0");
  boost::math::quadrature::exp_sinh<double> integ;
  const double h = 1e-5 * b_nm;
  auto dwdb = [&](double z) {
    const double rp = std::hypot(b_nm + h, z);
    const double rm = std::hypot(b_nm - h, z);
    return (radial_ev(rp) - radial_ev(rm)) / (2.0 * h);
  };
  const double integral_ev = 2.0 * integ.integrate(dwdb, 1e-9);  // even in z
  return -integral_ev * 1e-6;  // eV*(nm/nm) -> MeV, hbar*c cancels
}

RainbowPoint classical_kick_maximum(const PhenomenologicalThorn& thorn) {
  // coarse log scan then golden-section refinement
  double best_b = thorn.r_min_nm, best_q = 0.0;
  const double lo = thorn.r_min_nm * 1e-2, hi = thorn.r_max_nm * 10.0;
  const int n = 600;
  for (int i = 0; i <= n; ++i) {
    const double b = lo * std::pow(hi / lo, static_cast<double>(i) / n);
    const double q = std::abs(classical_kick_magnitude(b, thorn));
    if (q > best_q) {
      best_q = q;
      best_b = b;
    }
  }
  double a = best_b / 1.3, c = best_b * 1.3;
  const double gr = 0.61803398875;
  for (int it = 0; it < 80; ++it) {
    const double b1 = c - gr * (c - a);
    const double b2 = a + gr * (c - a);
    if (std::abs(classical_kick_magnitude(b1, thorn)) >
        std::abs(classical_kick_magnitude(b2, thorn)))
      c = b2;
    else
      a = b1;
  }
  RainbowPoint r;
  r.b_nm = 0.5 * (a + c);
  r.q_mev = std::abs(classical_kick_magnitude(r.b_nm, thorn));
  return r;
}

DifferentialXS classical_dsigma(const PhenomenologicalThorn& thorn, const DifferentialXS& grid,
                                const ClassicalXSOptions& opt) {
  thorn.validate();
  const RainbowPoint rainbow = classical_kick_maximum(thorn);
  if (rainbow.q_mev > grid.q_edges_mev.back())
    throw std::invalid_argument("classical_dsigma: q grid does not cover max|q_cl|");
  DifferentialXS xs = grid;
  std::fill(xs.value.begin(), xs.value.end(), 0.0);
  const int n_q = static_cast<int>(xs.q_mid_mev.size());
  std::vector<double> row_mass(n_q, 0.0);
  const double b_lo = thorn.r_min_nm * 1e-3;
  const double b_hi = thorn.r_max_nm * opt.b_max_factor;
  const int n = opt.b_samples;
  const double dt = std::log(b_hi / b_lo) / n;
  const auto& edges = xs.q_edges_mev;
  for (int i = 0; i < n; ++i) {
    const double b = b_lo * std::exp((i + 0.5) * dt);
    const double q = std::abs(classical_kick_magnitude(b, thorn));
    if (q < edges.front() || q >= edges.back()) continue;
    const auto it = std::upper_bound(edges.begin(), edges.end(), q);
    const int iq = static_cast<int>(it - edges.begin()) - 1;
    const double b_nat = nat_from_nm(b);
    const double db_nat = nat_from_nm(b) * dt;  // d b = b dt on the log grid
    row_mass[iq] += 2.0 * kPi * b_nat * db_nat * kHbarc2;  // annulus area, nm^2
  }
  for (int i = 0; i < n_q; ++i) {
    const double ring = 0.5 * (edges[i + 1] * edges[i + 1] - edges[i] * edges[i]);
    const double density = row_mass[i] / (ring * 2.0 * kPi);
    for (int j = 0; j < xs.n_phi; ++j) xs.value[static_cast<std::size_t>(i) * xs.n_phi + j] = density;
  }
  xs.thorn_tag = "classical_phenomenological";
  xs.finalize();
  return xs;
}

DifferentialXS quantum_dsigma_phenomenological(const PhenomenologicalThorn& thorn,
                                               const DifferentialXS& grid) {
  DifferentialXS xs = grid;
  const int n_q = static_cast<int>(xs.q_mid_mev.size());
  for (int i = 0; i < n_q; ++i) {
    const double f = thorn.form_factor_nat(xs.q_mid_mev[i]);
    const double v = f * f / (4.0 * kPi * kPi) * kHbarc2;
    for (int j = 0; j < xs.n_phi; ++j) xs.value[static_cast<std::size_t>(i) * xs.n_phi + j] = v;
  }
  xs.thorn_tag = "quantum_phenomenological";
  xs.finalize();
  return xs;
}

DifferentialXS quantum_dsigma_atom(const Vec2& u_t_nm, const FormFactorModel& ff, double u1_nm,
                                   const DifferentialXS& grid) {
  DifferentialXS xs = grid;
  const int n_q = static_cast<int>(xs.q_mid_mev.size());
  const double abs_u = u_t_nm.norm();
  // table frame: u_T along phi = 0
  for (int i = 0; i < n_q; ++i) {
    for (int j = 0; j < xs.n_phi; ++j) {
      const double phi = xs.phi_mid(j);
      const Vec2 q{xs.q_mid_mev[i] * std::cos(phi), xs.q_mid_mev[i] * std::sin(phi)};
      xs.value[static_cast<std::size_t>(i) * xs.n_phi + j] =
          born_dsigma_atom(q, {abs_u, 0.0}, ff, u1_nm);
    }
  }
  xs.thorn_tag = "quantum_atom";
  xs.finalize();
  return xs;
}

DifferentialXS quantum_dsigma_electron(const Vec2& s_t_nm, const FormFactorModel& ff,
                                       std::size_t orbital_k, const DifferentialXS& grid) {
  DifferentialXS xs = grid;
  const int n_q = static_cast<int>(xs.q_mid_mev.size());
  const double abs_s = s_t_nm.norm();
  for (int i = 0; i < n_q; ++i) {
    for (int j = 0; j < xs.n_phi; ++j) {
      const double phi = xs.phi_mid(j);
      const Vec2 q{xs.q_mid_mev[i] * std::cos(phi), xs.q_mid_mev[i] * std::sin(phi)};
      xs.value[static_cast<std::size_t>(i) * xs.n_phi + j] =
          born_dsigma_electron(q, {abs_s, 0.0}, ff, orbital_k);
    }
  }
  xs.thorn_tag = "quantum_electron";
  xs.finalize();
  return xs;
}

Vec2 sum_rule_first_moment(const DifferentialXS& xs) { return xs.first_moment_mev_nm2(); }

SumRuleReport sum_rule_second_moment(const PhenomenologicalThorn& thorn) {
  if (!(thorn.r_min_nm > 0.0))
    throw std::domain_error("sum_rule_second_moment: r_min = 0 diverges logarithmically");
  thorn.validate();
  SumRuleReport rep;
  // quantum route: (1/2pi) int q^3 |Vtilde(q)|^2 dq
  double err_q = 0.0;
  const double mu_min = mev_from_inv_nm(1.0 / thorn.r_max_nm);
  const double mu_max = mev_from_inv_nm(1.0 / thorn.r_min_nm);
  auto fq = [&](double t) {  // log substitution, q = e^t
    const double q = std::exp(t);
    const double f = thorn.form_factor_nat(q);
    return q * q * q * q * f * f / (2.0 * kPi);
  };
  rep.second_moment_quantum_mev2_nm2 =
      GK::integrate(fq, std::log(1e-4 * mu_min), std::log(100.0 * mu_max), 14, 1e-10, &err_q) *
      kHbarc2;
  rep.quantum_quadrature_error = err_q * kHbarc2;
  // classical route: int d^2b |q_cl(b)|^2, log substitution in b
  double err_c = 0.0;
  const double t_lo = std::log(thorn.r_min_nm * 1e-4);
  const double t_hi = std::log(thorn.r_max_nm * 40.0);
  auto fc = [&](double t) {
    const double b = std::exp(t);
    const double q = classical_kick_magnitude(b, thorn);
    const double b_nat = nat_from_nm(b);
    return 2.0 * kPi * b_nat * b_nat * q * q;  // extra b from db = b dt
  };
  rep.second_moment_classical_mev2_nm2 =
      GK::integrate(fc, t_lo, t_hi, 14, 1e-10, &err_c) * kHbarc2;
  rep.classical_quadrature_error = err_c * kHbarc2;
  rep.converged = rep.quantum_quadrature_error <
                      1e-5 * std::abs(rep.second_moment_quantum_mev2_nm2) &&
                  rep.classical_quadrature_error <
                      1e-5 * std::abs(rep.second_moment_classical_mev2_nm2);
  return rep;
}

DechannelingEstimate dechanneling_xs(double q_c_mev, double q_min_mev, double q_max_mev, int z_eff,
                                     const std::string& model) {
  if (!(0.0 < q_min_mev && q_min_mev < q_c_mev && q_c_mev <= q_max_mev))
    throw std::domain_error("dechanneling_xs: need 0 < q_min < q_c <= q_max");
  DechannelingEstimate est;
  est.q_c_mev = q_c_mev;
  est.q_min_mev = q_min_mev;
  est.q_max_mev = q_max_mev;
  est.model = model;
  const double za = z_eff * constants::alpha;
  const double pre = 4.0 * kPi * za * za;
  // sharp-cutoff Rutherford model: dsigma/dq^2 = 4 pi (Z alpha)^2 / q^4
  // first integral in ln q^2 (integrand is constant there), second in 1/q^2
  double err = 0.0;
  const double i1 = GK::integrate(
      [&](double lnq2) {
        const double q2 = std::exp(lnq2);
        return q2 * q2 * pre / (q2 * q2);  // q^2 * dsigma/dq^2 * q^2 (jacobian)
      },
      2.0 * std::log(q_min_mev), 2.0 * std::log(q_c_mev), 10, 1e-12, &err) /
      (q_c_mev * q_c_mev);
  const double i2 = GK::integrate(
      [&](double lnq2) {
        const double q2 = std::exp(lnq2);
        return pre / (q2 * q2) * q2;
      },
      2.0 * std::log(q_c_mev), 2.0 * std::log(q_max_mev), 10, 1e-12, &err);
  est.sigma_numeric_nm2 = (i1 + i2) * kHbarc2;
  est.sigma_closed_form_nm2 =
      pre / (q_c_mev * q_c_mev) * (2.0 * std::log(q_c_mev / q_min_mev) + 1.0) * kHbarc2;
  return est;
}

DechRatioReport dech_ratio(DechCase c, const CrystalModel& crystal, double energy_mev,
                           double q_c_mev) {
  crystal.validate();
  DechRatioReport rep;
  int z_eff = 1;
  double r_max_nm = crystal.a_tf_nm;
  double q_max_quant, q_max_cl;
  if (c == DechCase::atom) {
    z_eff = crystal.Z;
    r_max_nm = crystal.u1_nm;
    q_max_quant = mev_from_inv_nm(1.0 / crystal.r_n_nm);
    q_max_cl = z_eff * constants::alpha * q_max_quant;
  } else {
    // point-like scatterer: purely kinematic cutoff, same in both models
    q_max_quant = q_max_cl =
        std::sqrt(2.0 * constants::electron_mass_mev * energy_mev);
  }
  const double q_min_quant = mev_from_inv_nm(1.0 / r_max_nm);
  const double q_min_cl = z_eff * constants::alpha * q_min_quant;
  rep.quantum = dechanneling_xs(q_c_mev, q_min_quant, q_max_quant, z_eff, "quantum");
  rep.classical = dechanneling_xs(q_c_mev, q_min_cl, q_max_cl, z_eff, "classical");
  rep.ratio = rep.classical.sigma_closed_form_nm2 / rep.quantum.sigma_closed_form_nm2;
  return rep;
}

}  // namespace thornsim
