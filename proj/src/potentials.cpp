#include "thornsim/potentials.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace thornsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void ScreeningModel::validate() const {
  double wsum = 0.0;
  for (const auto& t : terms) {
    if (!(t.mu_inv_nm > 0.0)) throw std::invalid_argument("ScreeningModel: mu must be > 0");
    wsum += t.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("ScreeningModel: Yukawa weights must sum to 1");
}

ScreeningModel ScreeningModel::moliere(double a_tf_nm, double r_n_nm) {
  ScreeningModel s;
  s.terms = {{0.10, 6.0 / a_tf_nm}, {0.55, 1.2 / a_tf_nm}, {0.35, 0.3 / a_tf_nm}};
  s.mu_n_inv_nm = 1.0 / r_n_nm;
  s.validate();
  return s;
}

double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x <= 5.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic continued fraction, |error| < 1e-16 for x > 5
  double cf = 0.0;
  for (int k = 16; k >= 1; --k) cf = 0.5 * k / (x + cf);
  return 1.0 / (std::sqrt(kPi) * (x + cf));
}

double smeared_yukawa(double g, double mu, double u1, double r) {
  if (!(u1 > 0.0)) throw std::domain_error("smeared_yukawa: u1 must be > 0");
  const double s2 = std::sqrt(2.0) * u1;
  if (r < 1e-4 * u1) {
    const double a = mu * u1 / std::sqrt(2.0);
    return g * std::sqrt(2.0 / kPi) / u1 * (1.0 - std::sqrt(kPi) * a * erfcx(a));
  }
  const double gauss = std::exp(-r * r / (2.0 * u1 * u1));
  const double arg_m = (mu * u1 * u1 - r) / s2;
  const double arg_p = (mu * u1 * u1 + r) / s2;
  double a_term;
  if (arg_m < 0.0) {
    a_term = std::exp(0.5 * mu * mu * u1 * u1 - mu * r) * std::erfc(arg_m);
  } else {
    a_term = gauss * erfcx(arg_m);
  }
  const double b_term = gauss * erfcx(arg_p);
  return g / (2.0 * r) * (a_term - b_term);
}

double atomic_potential(double r_nm, const ScreeningModel& s, int Z) {
  if (r_nm < 0.0) throw std::domain_error("atomic_potential: r must be >= 0");
  const double r_n = (s.mu_n_inv_nm > 0.0) ? 1.0 / s.mu_n_inv_nm : 0.0;
  const double r = std::max(r_nm, r_n);  // hard cap inside the nucleus
  double v = 0.0;
  for (const auto& t : s.terms) v += t.weight * std::exp(-t.mu_inv_nm * r) / r;
  return Z * constants::alpha * constants::hbarc_ev_nm * v;
}

double smeared_atomic_potential(double r_nm, const ScreeningModel& s, int Z, double u1_nm) {
  if (r_nm < 0.0) throw std::domain_error("smeared_atomic_potential: r must be >= 0");
  const double g0 = Z * constants::alpha * constants::hbarc_ev_nm;
  double v = 0.0;
  for (const auto& t : s.terms) v += smeared_yukawa(g0 * t.weight, t.mu_inv_nm, u1_nm, r_nm);
  return v;
}

namespace {

// plane-integrated Yukawa convolved with the 1-D displacement Gaussian:
// (2 pi g / mu) * [ exp(-mu|x|) (x) N(0, u1) ]
double smeared_plane_yukawa(double g, double mu, double u1, double x) {
  const double ax = std::abs(x);
  const double s2 = std::sqrt(2.0) * u1;
  const double gauss = std::exp(-ax * ax / (2.0 * u1 * u1));
  const double arg_m = (mu * u1 * u1 - ax) / s2;
  const double arg_p = (mu * u1 * u1 + ax) / s2;
  double a_term;
  if (arg_m < 0.0) {
    a_term = std::exp(0.5 * mu * mu * u1 * u1 - mu * ax) * std::erfc(arg_m);
  } else {
    a_term = gauss * erfcx(arg_m);
  }
  const double b_term = gauss * erfcx(arg_p);
  return kPi * g / mu * (a_term + b_term);
}

double planar_plane_potential(double x, const ScreeningModel& s, int Z, double u1,
                              double areal_density) {
  const double g0 = Z * constants::alpha * constants::hbarc_ev_nm;
  double v = 0.0;
  for (const auto& t : s.terms)
    v += smeared_plane_yukawa(g0 * t.weight, t.mu_inv_nm, u1, x);
  return areal_density * v;
}

// periodic Catmull-Rom interpolation over a uniform table on [0, period)
double catmull_rom(const std::vector<double>& y, double period, double x, bool derivative) {
  const int n = static_cast<int>(y.size());
  double u = x / period * n;
  u -= std::floor(u / n) * n;
  if (u >= n) u -= n;
  int i1 = static_cast<int>(std::floor(u));
  if (i1 >= n) i1 = n - 1;
  const double t = u - i1;
  const int i0 = (i1 + n - 1) % n;
  const int i2 = (i1 + 1) % n;
  const int i3 = (i1 + 2) % n;
  const double y0 = y[i0], y1 = y[i1], y2 = y[i2], y3 = y[i3];
  const double m1 = 0.5 * (y2 - y0);
  const double m2 = 0.5 * (y3 - y1);
  const double a = 2.0 * y1 - 2.0 * y2 + m1 + m2;
  const double b = -3.0 * y1 + 3.0 * y2 - 2.0 * m1 - m2;
  if (!derivative) return ((a * t + b) * t + m1) * t + y1;
  const double dx = period / n;
  return ((3.0 * a * t + 2.0 * b) * t + m1) / dx;
}

}  // namespace

double ContinuumPotential::value(double x_nm) const {
  return catmull_rom(value_ev, period_nm, x_nm, false);
}

double ContinuumPotential::gradient(double x_nm) const {
  return catmull_rom(value_ev, period_nm, x_nm, true);
}

double ContinuumPotential::value2(double x_nm, double y_nm) const {
  if (geometry != ChannelGeometry::axial) throw std::logic_error("value2: axial tables only");
  auto wrap = [](double v, double p, int n) {
    double u = v / p * n;
    u -= std::floor(u / n) * n;
    return u;
  };
  const double ux = wrap(x_nm, period_nm, nx);
  const double uy = wrap(y_nm, period_y_nm, ny);
  const int ix = std::min(static_cast<int>(ux), nx - 1);
  const int iy = std::min(static_cast<int>(uy), ny - 1);
  const double tx = ux - ix, ty = uy - iy;
  auto at = [&](int i, int j) { return value_ev[static_cast<std::size_t>(j % ny) * nx + (i % nx)]; };
  return (1 - tx) * (1 - ty) * at(ix, iy) + tx * (1 - ty) * at(ix + 1, iy) +
         (1 - tx) * ty * at(ix, iy + 1) + tx * ty * at(ix + 1, iy + 1);
}

ContinuumPotential build_continuum(const CrystalModel& crystal, const ScreeningModel& s,
                                   const ContinuumBuildOptions& opt) {
  crystal.validate();
  ContinuumPotential v;
  v.geometry = crystal.geometry;
  if (crystal.geometry == ChannelGeometry::planar) {
    const double d = crystal.interplanar_spacing_nm;
    const int n = opt.points_per_period;
    if (d / n > crystal.u1_nm / 4.0)
      throw std::invalid_argument("build_continuum: grid coarser than u1/4, raise points_per_period");
    v.period_nm = d;
    v.value_ev.resize(n);
    for (int i = 0; i < n; ++i) {
      const double x = d * i / n;
      double sum = 0.0;
      for (int p = -opt.neighbor_planes; p <= opt.neighbor_planes; ++p)
        sum += planar_plane_potential(x - p * d, s, crystal.Z, crystal.u1_nm, crystal.site_density);
      v.value_ev[i] = sum;
    }
    const double vmin = *std::min_element(v.value_ev.begin(), v.value_ev.end());
    for (auto& val : v.value_ev) val -= vmin;
    v.depth_u0_ev = *std::max_element(v.value_ev.begin(), v.value_ev.end());
    const auto imax = std::max_element(v.value_ev.begin(), v.value_ev.end());
    v.min_location_nm = d * static_cast<double>(imax - v.value_ev.begin()) / n;
    v.gradient_ev_nm.resize(n);
    for (int i = 0; i < n; ++i) v.gradient_ev_nm[i] = v.gradient(d * i / n);
  } else {
    // axial: strings on a square transverse lattice with the interplanar
    // spacing as period; radial string potential integrated numerically
    const double d = crystal.interplanar_spacing_nm;
    const int n = std::max(opt.points_per_period / 4, 64);
    v.period_nm = d;
    v.period_y_nm = d;
    v.nx = n;
    v.ny = n;
    v.value_ev.resize(static_cast<std::size_t>(n) * n);
    auto string_potential = [&](double rho) {
      boost::math::quadrature::exp_sinh<double> integ;
      auto f = [&](double z) {
        return smeared_atomic_potential(std::hypot(rho, z), s, crystal.Z, crystal.u1_nm);
      };
      return crystal.site_density * 2.0 * integ.integrate(f, 1e-9);
    };
    const int n_rad = 400;
    std::vector<double> rad(n_rad);
    const double r_max = 2.0 * d;
    for (int i = 0; i < n_rad; ++i) rad[i] = string_potential(r_max * (i + 0.5) / n_rad);
    auto radial = [&](double rho) {
      if (rho >= r_max) return 0.0;
      const double u = rho / r_max * n_rad - 0.5;
      const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n_rad - 2);
      const double t = u - i;
      return rad[i] * (1 - t) + rad[i + 1] * t;
    };
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const double x = d * i / n, y = d * j / n;
        double sum = 0.0;
        for (int px = -2; px <= 2; ++px)
          for (int py = -2; py <= 2; ++py) sum += radial(std::hypot(x - px * d, y - py * d));
        v.value_ev[static_cast<std::size_t>(j) * n + i] = sum;
      }
    }
    const double vmin = *std::min_element(v.value_ev.begin(), v.value_ev.end());
    for (auto& val : v.value_ev) val -= vmin;
    v.depth_u0_ev = *std::max_element(v.value_ev.begin(), v.value_ev.end());
  }
  return v;
}

double thorn_vib_potential(const Vec3& r_nm, const ThornVib& t) {
  const CrystalModel& c = *t.crystal;
  const double r_disp = (r_nm - t.displacement_nm).norm();
  return atomic_potential(r_disp, t.screening, c.Z) -
         smeared_atomic_potential(r_nm.norm(), t.screening, c.Z, c.u1_nm);
}

double OrbitalModel::density(double r_nm) const {
  const double a = radius_nm;
  return std::exp(-2.0 * r_nm / a) / (kPi * a * a * a);
}

double OrbitalModel::line_density(double b_nm) const {
  const double a = radius_nm;
  const double c = 2.0 / a;
  if (b_nm < 1e-9 * a) return 1.0 / (kPi * a * a);
  return 2.0 / (kPi * a * a * a) * b_nm * std::cyl_bessel_k(1, c * b_nm);
}

double OrbitalModel::cloud_potential_ev(double r_nm) const {
  const double a = radius_nm;
  const double k = constants::alpha * constants::hbarc_ev_nm;
  if (r_nm < 1e-6 * a) return k / a;
  return k * (1.0 / r_nm - std::exp(-2.0 * r_nm / a) * (1.0 / r_nm + 1.0 / a));
}

double OrbitalModel::form_factor(double q_mev) const {
  const double qa2 = q_mev * nat_from_nm(radius_nm) / 2.0;
  const double d = 1.0 + qa2 * qa2;
  return 1.0 / (d * d);
}

double thorn_electron_density(const Vec3& r_nm, const ThornElectron& t) {
  return t.orbital.density(r_nm.norm());
}

double thorn_electron_potential(const Vec3& r_nm, const ThornElectron& t) {
  const double k = constants::alpha * constants::hbarc_ev_nm;
  const double re = std::max((r_nm - t.offset_nm).norm(), t.cap_r_nm);
  return -k / re + t.orbital.cloud_potential_ev(r_nm.norm());
}

void PhenomenologicalThorn::validate() const {
  if (!(r_min_nm > 0.0)) throw std::domain_error("PhenomenologicalThorn: r_min must be > 0");
  if (!(r_min_nm < r_max_nm))
    throw std::invalid_argument("PhenomenologicalThorn: r_min must be < r_max");
}

double PhenomenologicalThorn::potential_ev(double r_nm) const {
  const double g = z_eff * constants::alpha * constants::hbarc_ev_nm;
  if (r_nm < 1e-4 * r_min_nm) return g * (1.0 / r_min_nm - 1.0 / r_max_nm);
  return g / r_nm * (std::exp(-r_nm / r_max_nm) - std::exp(-r_nm / r_min_nm));
}

double PhenomenologicalThorn::form_factor_nat(double q_mev) const {
  const double m1 = mev_from_inv_nm(1.0 / r_max_nm);
  const double m2 = mev_from_inv_nm(1.0 / r_min_nm);
  const double q2 = q_mev * q_mev;
  return 4.0 * kPi * z_eff * constants::alpha * (1.0 / (q2 + m1 * m1) - 1.0 / (q2 + m2 * m2));
}

ProjectedProfile projected_profile(const std::function<double(double)>& radial_ev,
                                   const std::vector<double>& x_nm) {
  // P(x) = 2 pi int_{|x|}^inf r W(r) dr  (substitute r^2 = x^2 + rho^2)
  ProjectedProfile p;
  p.x_nm = x_nm;
  p.value_ev_nm2.reserve(x_nm.size());
  boost::math::quadrature::exp_sinh<double> integ;
  for (double x : x_nm) {
    const double ax = std::abs(x);
    auto f = [&](double t) {
      const double r = ax + t;
      return r * radial_ev(r);
    };
    p.value_ev_nm2.push_back(2.0 * kPi * integ.integrate(f, 1e-9));
  }
  return p;
}

double atomic_ft_nat(double q_mev, const ScreeningModel& s, int Z) {
  double sum = 0.0;
  for (const auto& t : s.terms) {
    const double mu = mev_from_inv_nm(t.mu_inv_nm);
    sum += t.weight / (q_mev * q_mev + mu * mu);
  }
  return 4.0 * kPi * Z * constants::alpha * sum;
}

std::complex<double> thorn_vib_ft_nat(const Vec3& q_mev, const ThornVib& t, double u1_nm) {
  const double q = q_mev.norm();
  const double va = atomic_ft_nat(q, t.screening, t.crystal->Z);
  const double u1 = nat_from_nm(u1_nm);
  const Vec3 u_nat = t.displacement_nm * (1.0 / constants::hbarc_mev_nm);
  const double phase = -q_mev.dot(u_nat);
  const std::complex<double> displaced(std::cos(phase), std::sin(phase));
  return va * (displaced - std::exp(-0.5 * q * q * u1 * u1));
}

std::complex<double> thorn_electron_ft_nat(const Vec3& q_mev, const ThornElectron& t) {
  const double q = q_mev.norm();
  const Vec3 s_nat = t.offset_nm * (1.0 / constants::hbarc_mev_nm);
  const double phase = -q_mev.dot(s_nat);
  const std::complex<double> point(std::cos(phase), std::sin(phase));
  const double fk = t.orbital.form_factor(q);
  return -4.0 * kPi * constants::alpha / (q * q) * (point - fk);
}

}  // namespace thornsim
