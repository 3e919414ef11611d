#include "thornsim/sampler.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

namespace thornsim {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed), stream_index_(stream_index) {
  const std::uint64_t s0 = splitmix64(master_seed ^ splitmix64(stream_index));
  std::seed_seq seq{static_cast<std::uint32_t>(s0), static_cast<std::uint32_t>(s0 >> 32),
                    static_cast<std::uint32_t>(stream_index),
                    static_cast<std::uint32_t>(stream_index >> 32)};
  engine_.seed(seq);
}

double RandomStream::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double RandomStream::normal(double sigma) { return sigma * normal_(engine_); }

std::uint64_t RandomStream::raw() { return engine_(); }

double CubicTable::operator()(double x) const {
  const int n = static_cast<int>(y.size());
  double u = (x - x0) / dx;
  if (u <= 0.0) return y.front();
  if (u >= n - 1) return y.back();
  const int i = static_cast<int>(u);
  const double t = u - i;
  const double y1 = y[i], y2 = y[i + 1];
  const double m1 = (i > 0) ? 0.5 * (y2 - y[i - 1]) : (y2 - y1);
  const double m2 = (i + 2 < n) ? 0.5 * (y[i + 2] - y1) : (y2 - y1);
  const double a = 2.0 * y1 - 2.0 * y2 + m1 + m2;
  const double b = -3.0 * y1 + 3.0 * y2 - 2.0 * m1 - m2;
  return ((a * t + b) * t + m1) * t + y1;
}

CollisionKernel::CollisionKernel(const CrystalModel& crystal, const FormFactorModel& ff,
                                 const KernelOptions& opt)
    : crystal_(crystal), ff_(ff), opt_(opt) {
  crystal_.validate();
  const double u1 = crystal_.u1_nm;
  q_ir_electron_mev_ = (opt.q_ir_electron_mev > 0.0)
                           ? opt.q_ir_electron_mev
                           : mev_from_inv_nm(1.0 / crystal_.interplanar_spacing_nm);
  const double q_max_e = q_max_electron_mev(opt.beam_energy_mev);

  // radial sigma tables
  {
    const int n = 64;
    sigma_vib_table_.x0 = 0.0;
    sigma_vib_table_.dx = opt.u_node_max_u1 * u1 / (n - 1);
    sigma_vib_table_.y.resize(n);
    for (int i = 0; i < n; ++i)
      sigma_vib_table_.y[i] = sigma_atom_total(i * sigma_vib_table_.dx, ff_, u1);
  }
  const auto& orbitals = ff_.orbitals();
  sigma_e_tables_.resize(orbitals.size());
  for (std::size_t k = 0; k < orbitals.size(); ++k) {
    const int n = 64;
    auto& tab = sigma_e_tables_[k];
    tab.x0 = 0.0;
    tab.dx = 8.0 * orbitals[k].radius_nm / (n - 1);
    tab.y.resize(n);
    for (int i = 0; i < n; ++i)
      tab.y[i] = sigma_electron_total(i * tab.dx, ff_, k, q_ir_electron_mev_, q_max_e);
  }

  // planar line rates per plane: Delta-y integrated out with Simpson
  auto simpson = [](auto f, double a, double b, int n) {
    double s = f(a) + f(b);
    const double h = (b - a) / n;
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  {
    const int n = 96;
    vib_rate_table_.x0 = 0.0;
    vib_rate_table_.dx = 6.0 * u1 / (n - 1);
    vib_rate_table_.y.resize(n);
    const double g_norm = 1.0 / (2.0 * kPi * u1 * u1);
    for (int i = 0; i < n; ++i) {
      const double dxp = i * vib_rate_table_.dx;
      auto f = [&](double dy) {
        const double u2 = dxp * dxp + dy * dy;
        return g_norm * std::exp(-u2 / (2.0 * u1 * u1)) * sigma_vib(std::sqrt(u2));
      };
      vib_rate_table_.y[i] = crystal_.site_density * simpson(f, -6.0 * u1, 6.0 * u1, 192);
    }
  }
  {
    const int n = 128;
    double span = 0.0;
    for (const auto& o : orbitals) span = std::max(span, 6.0 * o.radius_nm);
    e_rate_table_.x0 = 0.0;
    e_rate_table_.dx = span / (n - 1);
    e_rate_table_.y.resize(n);
    for (int i = 0; i < n; ++i) {
      const double dxp = i * e_rate_table_.dx;
      auto f = [&](double dy) { return p_e({dxp, dy}); };
      e_rate_table_.y[i] = crystal_.site_density * simpson(f, -span, span, 256);
    }
  }

  // momentum-transfer sampling tables at radial thorn-parameter nodes
  auto grid = DifferentialXS::make_grid(opt.q_lo_mev, opt.q_hi_mev, opt.points_per_decade,
                                        opt.n_phi);
  u_nodes_nm_.resize(opt.n_u_nodes);
  vib_xs_.reserve(opt.n_u_nodes);
  for (int i = 0; i < opt.n_u_nodes; ++i) {
    u_nodes_nm_[i] = opt.u_node_max_u1 * u1 * i / (opt.n_u_nodes - 1);
    vib_xs_.push_back(quantum_dsigma_atom({u_nodes_nm_[i], 0.0}, ff_, u1, grid));
  }
  s_nodes_nm_.resize(orbitals.size());
  e_xs_.resize(orbitals.size());
  for (std::size_t k = 0; k < orbitals.size(); ++k) {
    auto e_grid = DifferentialXS::make_grid(q_ir_electron_mev_, q_max_e, opt.points_per_decade,
                                            opt.n_phi);
    s_nodes_nm_[k].resize(opt.n_s_nodes);
    e_xs_[k].reserve(opt.n_s_nodes);
    for (int i = 0; i < opt.n_s_nodes; ++i) {
      s_nodes_nm_[k][i] = 4.0 * orbitals[k].radius_nm * i / (opt.n_s_nodes - 1);
      e_xs_[k].push_back(quantum_dsigma_electron({s_nodes_nm_[k][i], 0.0}, ff_, k, e_grid));
    }
  }
}

double CollisionKernel::sigma_vib(double abs_u_nm) const { return sigma_vib_table_(abs_u_nm); }

double CollisionKernel::sigma_e(std::size_t k, double abs_s_nm) const {
  return sigma_e_tables_.at(k)(abs_s_nm);
}

double CollisionKernel::q_max_electron_mev(double energy_mev) const {
  return std::sqrt(2.0 * constants::electron_mass_mev * energy_mev);
}

double CollisionKernel::p_vib(const Vec2& r_t_nm, const Vec2& mean_site_nm) const {
  const double u1 = crystal_.u1_nm;
  const Vec2 d = r_t_nm - mean_site_nm;
  const double d2 = d.norm2();
  if (d2 > 9.0 * u1 * u1) strained_count.fetch_add(1, std::memory_order_relaxed);
  return std::exp(-d2 / (2.0 * u1 * u1)) / (2.0 * kPi * u1 * u1) * sigma_vib(std::sqrt(d2));
}

double CollisionKernel::p_e(const Vec2& b_a_nm) const {
  const double b = b_a_nm.norm();
  double sum = 0.0;
  const auto& orbitals = ff_.orbitals();
  for (std::size_t k = 0; k < orbitals.size(); ++k)
    sum += orbitals[k].occupancy * sigma_e(k, b) * orbitals[k].line_density(b);
  return sum;
}

double CollisionKernel::p_e_convolved(const Vec2& r_minus_mean_nm) const {
  // 2-D Gaussian convolution by polar quadrature; test/diagnostic path
  const double u1 = crystal_.u1_nm;
  const int n_r = 48, n_a = 32;
  double sum = 0.0;
  for (int i = 0; i < n_r; ++i) {
    const double r = 4.0 * u1 * (i + 0.5) / n_r;
    const double w_r =
        r * std::exp(-r * r / (2.0 * u1 * u1)) / (u1 * u1) * (4.0 * u1 / n_r);
    for (int j = 0; j < n_a; ++j) {
      const double a = 2.0 * kPi * (j + 0.5) / n_a;
      const Vec2 b{r_minus_mean_nm.x - r * std::cos(a), r_minus_mean_nm.y - r * std::sin(a)};
      sum += w_r / n_a * p_e(b);
    }
  }
  return sum;
}

double CollisionKernel::vib_rate_per_nm(double dx_nm) const {
  const double ax = std::abs(dx_nm);
  if (ax >= vib_rate_table_.last_x()) return 0.0;
  return std::max(0.0, vib_rate_table_(ax));
}

double CollisionKernel::e_rate_per_nm(double dx_nm) const {
  const double ax = std::abs(dx_nm);
  if (ax >= e_rate_table_.last_x()) return 0.0;
  return std::max(0.0, e_rate_table_(ax));
}

const DifferentialXS& CollisionKernel::vib_table(double abs_u_nm) const {
  const double du = u_nodes_nm_[1] - u_nodes_nm_[0];
  const int i = std::clamp(static_cast<int>(std::lround(abs_u_nm / du)), 0,
                           static_cast<int>(vib_xs_.size()) - 1);
  return vib_xs_[i];
}

const DifferentialXS& CollisionKernel::electron_table(std::size_t k, double abs_s_nm) const {
  const auto& nodes = s_nodes_nm_.at(k);
  const double ds = nodes[1] - nodes[0];
  const int i = std::clamp(static_cast<int>(std::lround(abs_s_nm / ds)), 0,
                           static_cast<int>(e_xs_[k].size()) - 1);
  return e_xs_[k][i];
}

namespace {
Vec2 rotate_to(const Vec2& q_local, const Vec2& axis) {
  const double n = axis.norm();
  if (n <= 0.0) return q_local;
  const double c = axis.x / n, s = axis.y / n;
  return {c * q_local.x - s * q_local.y, s * q_local.x + c * q_local.y};
}
}  // namespace

Vec2 CollisionKernel::sample_q_vib(const Vec2& u_t_nm, RandomStream& rng) const {
  const Vec2 q_local = sample_q(vib_table(u_t_nm.norm()), rng);
  return rotate_to(q_local, u_t_nm);
}

Vec2 CollisionKernel::sample_q_electron(std::size_t k, const Vec2& s_t_nm,
                                        RandomStream& rng) const {
  const Vec2 q_local = sample_q(electron_table(k, s_t_nm.norm()), rng);
  return rotate_to(q_local, s_t_nm);
}

double CollisionKernel::sample_vib_dy(double dx_nm, RandomStream& rng) const {
  // conditional Delta-y density ~ exp(-dy^2/2u1^2) sigma_A(|u|); rejection
  // against the Gaussian with the (monotone) sigma envelope
  const double u1 = crystal_.u1_nm;
  const double sigma_max = sigma_vib_table_.y.back();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double dy = rng.normal(u1);
    const double u = std::hypot(dx_nm, dy);
    if (rng.uniform() * sigma_max <= sigma_vib(u)) return dy;
  }
  return rng.normal(u1);
}

std::size_t CollisionKernel::sample_electron_orbital(const Vec2& b_nm, RandomStream& rng) const {
  const auto& orbitals = ff_.orbitals();
  const double b = b_nm.norm();
  double total = 0.0;
  std::vector<double> w(orbitals.size());
  for (std::size_t k = 0; k < orbitals.size(); ++k) {
    w[k] = orbitals[k].occupancy * sigma_e(k, b) * orbitals[k].line_density(b);
    total += w[k];
  }
  double r = rng.uniform() * total;
  for (std::size_t k = 0; k < orbitals.size(); ++k) {
    if (r < w[k]) return k;
    r -= w[k];
  }
  return orbitals.size() - 1;
}

Vec2 sample_q(const DifferentialXS& xs, RandomStream& rng) {
  if (!(xs.total_nm2 > 0.0)) throw std::domain_error("sample_q: degenerate cross section table");
  const int n_q = static_cast<int>(xs.q_mid_mev.size());
  const double r = rng.uniform();
  const auto it = std::upper_bound(xs.q_cdf.begin(), xs.q_cdf.end(), r);
  int iq = std::clamp(static_cast<int>(it - xs.q_cdf.begin()) - 1, 0, n_q - 1);
  // |q| uniform in measure q dq within the bin
  const double q0 = xs.q_edges_mev[iq], q1 = xs.q_edges_mev[iq + 1];
  const double q = std::sqrt(q0 * q0 + rng.uniform() * (q1 * q1 - q0 * q0));
  // conditional azimuth
  const double rp = rng.uniform();
  const double* row = &xs.phi_cdf[static_cast<std::size_t>(iq) * (xs.n_phi + 1)];
  const auto jt = std::upper_bound(row, row + xs.n_phi + 1, rp);
  int jp = std::clamp(static_cast<int>(jt - row) - 1, 0, xs.n_phi - 1);
  const double frac = (row[jp + 1] > row[jp]) ? (rp - row[jp]) / (row[jp + 1] - row[jp]) : 0.5;
  const double phi = 2.0 * kPi * (jp + frac) / xs.n_phi;
  return {q * std::cos(phi), q * std::sin(phi)};
}

Vec3 sample_displacement(double u1_nm, RandomStream& rng) {
  if (!(u1_nm > 0.0)) throw std::domain_error("sample_displacement: u1 must be > 0");
  return {rng.normal(u1_nm), rng.normal(u1_nm), rng.normal(u1_nm)};
}

Vec3 sample_electron_offset(const OrbitalModel& orbital, RandomStream& rng) {
  // radial density ~ r^2 exp(-2r/a): Gamma(3, a/2)
  std::gamma_distribution<double> gamma(3.0, orbital.radius_nm / 2.0);
  const double r = gamma(rng.engine());
  const double cth = 2.0 * rng.uniform() - 1.0;
  const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
  const double phi = 2.0 * kPi * rng.uniform();
  return {r * sth * std::cos(phi), r * sth * std::sin(phi), r * cth};
}

double chi_square_p_value(double chi2, int dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
}

}  // namespace thornsim
