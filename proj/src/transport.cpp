#include "thornsim/transport.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace thornsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kElectronCapNm = 1e-6;

double frac(double v) { return v - std::floor(v); }
}  // namespace

PhononCorrelationModel::PhononCorrelationModel(const CrystalModel& crystal, double lambda_c_nm,
                                               RandomStream& rng, int n_modes)
    : lambda_c_nm_(lambda_c_nm) {
  if (!(lambda_c_nm >= crystal.lattice_constant_nm))
    throw std::domain_error("PhononCorrelationModel: lambda_c below the lattice constant");
  const double k_max = kPi / crystal.lattice_constant_nm;
  const double k_c = 2.0 * kPi / lambda_c_nm;
  const double u1 = crystal.u1_nm;
  const double frac_long = std::min(1.0, k_c / k_max);
  u_long_nm_ = u1 * std::sqrt(frac_long);
  u_short_nm_ = u1 * std::sqrt(1.0 - frac_long);
  modes_.resize(n_modes);
  const double amp = std::sqrt(6.0 * u_long_nm_ * u_long_nm_ / n_modes);
  for (auto& m : modes_) {
    const double k = k_c * (0.02 + 0.98 * rng.uniform());
    auto unit = [&rng]() {
      const double c = 2.0 * rng.uniform() - 1.0;
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      const double p = 2.0 * kPi * rng.uniform();
      return Vec3{s * std::cos(p), s * std::sin(p), c};
    };
    m.k_inv_nm = unit() * k;
    m.polarization = unit();
    m.phase = 2.0 * kPi * rng.uniform();
    m.amplitude_nm = amp;
  }
}

Vec3 PhononCorrelationModel::long_displacement(const Vec3& mean_site_nm) const {
  Vec3 u{};
  for (const auto& m : modes_) {
    const double c = m.amplitude_nm * std::cos(m.k_inv_nm.dot(mean_site_nm) + m.phase);
    u = u + m.polarization * c;
  }
  return u;
}

PhononCorrelationModel correlated_displacement_field(const CrystalModel& crystal,
                                                     double lambda_c_nm, RandomStream& rng) {
  return PhononCorrelationModel(crystal, lambda_c_nm, rng);
}

Snapshot make_snapshot(const CrystalModel& crystal, const SnapshotRegion& region,
                       const FormFactorModel& ff, RandomStream& rng,
                       const PhononCorrelationModel* correlations,
                       const Vec2& plane_lattice_offset_nm) {
  Snapshot snap;
  snap.z0_nm = region.z0_nm;
  snap.z1_nm = region.z1_nm;
  const double d = crystal.interplanar_spacing_nm;
  const double cut = region.transverse_cutoff_nm;
  const double s = 1.0 / std::sqrt(crystal.site_density);  // in-plane site spacing
  const double cx = region.transverse_center_nm.x;
  const double cy = region.transverse_center_nm.y;
  const int p_lo = static_cast<int>(std::floor((cx - cut) / d));
  const int p_hi = static_cast<int>(std::ceil((cx + cut) / d));
  for (int p = p_lo; p <= p_hi; ++p) {
    const double xp = p * d;
    if (std::abs(xp - cx) > cut) continue;
    // per-plane in-plane lattice phase: trajectory-level random offset plus a
    // golden-ratio stagger so successive planes are not in registry
    const double fy = frac(plane_lattice_offset_nm.x + 0.6180339887498949 * p);
    const double fz = frac(plane_lattice_offset_nm.y + 0.3819660112501051 * p);
    const double zlo = region.z0_nm - cut, zhi = region.z1_nm + cut;
    const int m_lo = static_cast<int>(std::floor(zlo / s - fz));
    const int m_hi = static_cast<int>(std::ceil(zhi / s - fz));
    for (int m = m_lo; m <= m_hi; ++m) {
      const double zm = (m + fz) * s;
      if (zm < zlo || zm > zhi) continue;
      // the beam axis is generic with respect to the in-plane lattice, so
      // successive atom rows are sheared by an irrational fraction of the
      // row spacing; without this the geometry would be axially aligned
      const double fy_m = frac(fy + 0.6180339887498949 * m);
      const int j_lo = static_cast<int>(std::floor((cy - cut) / s - fy_m));
      const int j_hi = static_cast<int>(std::ceil((cy + cut) / s - fy_m));
      for (int j = j_lo; j <= j_hi; ++j) {
        const double yj = (j + fy_m) * s;
        if (std::abs(yj - cy) > cut) continue;
        Snapshot::Site site;
        site.mean_nm = {xp, yj, zm};
        if (correlations) {
          Vec3 disp = correlations->long_displacement(site.mean_nm);
          if (correlations->u_short_nm() > 0.0)
            disp = disp + sample_displacement(correlations->u_short_nm(), rng);
          site.displacement_nm = disp;
        } else {
          site.displacement_nm = sample_displacement(crystal.u1_nm, rng);
        }
        for (const auto& orb : ff.orbitals())
          for (int e = 0; e < orb.occupancy; ++e)
            site.electron_offsets_nm.push_back(sample_electron_offset(orb, rng));
        snap.sites.push_back(std::move(site));
      }
    }
  }
  return snap;
}

ParticleState step_continuum(const ParticleState& state, const ContinuumPotential& v_lin,
                             double dz_nm) {
  ParticleState s = state;
  const double c = static_cast<double>(s.charge_sign);
  auto force_x = [&](double x) {  // MeV/nm on the projectile
    return -c * v_lin.gradient(x) / constants::ev_per_mev;
  };
  s.momentum_mev.x += force_x(s.position_nm.x) * 0.5 * dz_nm;
  s.refresh_parallel_momentum();
  const double inv_pz = 1.0 / s.momentum_mev.z;
  s.position_nm.x += s.momentum_mev.x * inv_pz * dz_nm;
  s.position_nm.y += s.momentum_mev.y * inv_pz * dz_nm;
  s.position_nm.z += dz_nm;
  s.momentum_mev.x += force_x(s.position_nm.x) * 0.5 * dz_nm;
  s.refresh_parallel_momentum();
  return s;
}

namespace {

// Radial table of the thermally smeared site potential and its derivative,
// rebuilt only when the material parameters change.
struct SmearTables {
  int Z = 0;
  double u1 = 0.0, a_tf = 0.0, r_n = 0.0;
  CubicTable w, dw;
};

const SmearTables& smear_tables(const CrystalModel& crystal, const ScreeningModel& screening) {
  thread_local SmearTables t;
  if (t.Z == crystal.Z && t.u1 == crystal.u1_nm && t.a_tf == crystal.a_tf_nm &&
      t.r_n == crystal.r_n_nm)
    return t;
  t.Z = crystal.Z;
  t.u1 = crystal.u1_nm;
  t.a_tf = crystal.a_tf_nm;
  t.r_n = crystal.r_n_nm;
  const int n = 2048;
  const double r_max = 1.2;
  t.w.x0 = 0.0;
  t.w.dx = r_max / (n - 1);
  t.w.y.resize(n);
  for (int i = 0; i < n; ++i)
    t.w.y[i] = smeared_atomic_potential(i * t.w.dx, screening, crystal.Z, crystal.u1_nm);
  t.dw.x0 = 0.0;
  t.dw.dx = t.w.dx;
  t.dw.y.resize(n);
  const double h = 0.25 * t.w.dx;
  for (int i = 0; i < n; ++i) {
    const double r = i * t.w.dx;
    const double rp = r + h, rm = std::max(0.0, r - h);
    t.dw.y[i] = (smeared_atomic_potential(rp, screening, crystal.Z, crystal.u1_nm) -
                 smeared_atomic_potential(rm, screening, crystal.Z, crystal.u1_nm)) /
                (rp - rm);
  }
  return t;
}

// gradient (eV/nm) of the residual site potential, for a unit positive
// charge: bare capped nucleus + explicit point electrons (which carry the
// instantaneous screening) minus the smeared mean-site potential
Vec3 residual_gradient(const Vec3& r_nm, const Snapshot::Site& site,
                       const ScreeningModel& screening, int Z, const SmearTables& tables,
                       double nuclear_cap_nm) {
  (void)screening;
  Vec3 g{};
  const Vec3 inst = site.instantaneous();
  {
    const Vec3 dr = r_nm - inst;
    const double rr = dr.norm();
    if (rr > nuclear_cap_nm)
      g = g - dr * (Z * constants::alpha * constants::hbarc_ev_nm / (rr * rr * rr));
  }
  for (const auto& off : site.electron_offsets_nm) {
    const Vec3 dr = r_nm - (inst + off);
    const double rr = dr.norm();
    if (rr > kElectronCapNm)
      g = g + dr * (constants::alpha * constants::hbarc_ev_nm / (rr * rr * rr));
  }
  {
    const Vec3 dr = r_nm - site.mean_nm;
    const double rr = dr.norm();
    if (rr > 1e-12 && rr < tables.w.last_x()) g = g - dr * (tables.dw(rr) / rr);
  }
  return g;
}

struct CmDeriv {
  const Snapshot* snap;
  const ContinuumPotential* v_lin;
  const ScreeningModel* screening;
  const SmearTables* tables;
  int Z;
  double charge;
  double energy;
  double mass;
  double cap;

  // y = (x, y, px, py); independent variable z
  std::array<double, 4> operator()(double z, const std::array<double, 4>& y) const {
    const double pz2 = energy * energy - mass * mass - y[2] * y[2] - y[3] * y[3];
    const double pz = std::sqrt(std::max(pz2, 1e-12));
    Vec3 grad{v_lin->gradient(y[0]), 0.0, 0.0};
    const Vec3 r{y[0], y[1], z};
    for (const auto& site : snap->sites)
      grad = grad + residual_gradient(r, site, *screening, Z, *tables, cap);
    const double f = -charge / constants::ev_per_mev;
    return {y[2] / pz, y[3] / pz, f * grad.x, f * grad.y};
  }
};

// Cash-Karp embedded 4(5) pair; returns the 5th-order solution and the
// embedded error estimate.
std::array<double, 4> rk45(const CmDeriv& d, double z, const std::array<double, 4>& y, double h,
                           std::array<double, 4>& err) {
  static constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
  static constexpr double b21 = 0.2;
  static constexpr double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
  static constexpr double b41 = 0.3, b42 = -0.9, b43 = 1.2;
  static constexpr double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
  static constexpr double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                          b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
  static constexpr double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                          c6 = 512.0 / 1771.0;
  static constexpr double dc1 = c1 - 2825.0 / 27648.0, dc3 = c3 - 18575.0 / 48384.0,
                          dc4 = c4 - 13525.0 / 55296.0, dc5 = -277.0 / 14336.0,
                          dc6 = c6 - 0.25;
  std::array<double, 4> t;
  const auto k1 = d(z, y);
  for (int i = 0; i < 4; ++i) t[i] = y[i] + h * b21 * k1[i];
  const auto k2 = d(z + a2 * h, t);
  for (int i = 0; i < 4; ++i) t[i] = y[i] + h * (b31 * k1[i] + b32 * k2[i]);
  const auto k3 = d(z + a3 * h, t);
  for (int i = 0; i < 4; ++i) t[i] = y[i] + h * (b41 * k1[i] + b42 * k2[i] + b43 * k3[i]);
  const auto k4 = d(z + a4 * h, t);
  for (int i = 0; i < 4; ++i)
    t[i] = y[i] + h * (b51 * k1[i] + b52 * k2[i] + b53 * k3[i] + b54 * k4[i]);
  const auto k5 = d(z + a5 * h, t);
  for (int i = 0; i < 4; ++i)
    t[i] = y[i] + h * (b61 * k1[i] + b62 * k2[i] + b63 * k3[i] + b64 * k4[i] + b65 * k5[i]);
  const auto k6 = d(z + a6 * h, t);
  std::array<double, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = y[i] + h * (c1 * k1[i] + c3 * k3[i] + c4 * k4[i] + c6 * k6[i]);
    err[i] = h * (dc1 * k1[i] + dc3 * k3[i] + dc4 * k4[i] + dc5 * k5[i] + dc6 * k6[i]);
  }
  return out;
}

}  // namespace

ParticleState step_cm(const ParticleState& state, const Snapshot& snapshot,
                      const ContinuumPotential& v_lin, const CrystalModel& crystal,
                      const ScreeningModel& screening, const FormFactorModel& ff, double dz_nm,
                      const CmStepOptions& opt) {
  (void)ff;
  if (snapshot.sites.empty()) return step_continuum(state, v_lin, dz_nm);
  const SmearTables& tables = smear_tables(crystal, screening);
  CmDeriv deriv{&snapshot,
                &v_lin,
                &screening,
                &tables,
                crystal.Z,
                static_cast<double>(state.charge_sign),
                state.energy_mev,
                state.mass_mev,
                (opt.nuclear_cap_nm > 0.0) ? opt.nuclear_cap_nm : crystal.r_n_nm};
  double z = state.position_nm.z;
  const double z_end = z + dz_nm;
  std::array<double, 4> y{state.position_nm.x, state.position_nm.y, state.momentum_mev.x,
                          state.momentum_mev.y};
  double h = dz_nm;
  const double p_scale = std::sqrt(state.energy_mev * state.energy_mev -
                                   state.mass_mev * state.mass_mev) *
                         1e-3;
  const double x_scale = crystal.interplanar_spacing_nm;
  // the residual force is spiked on the scale of the impact parameter, far
  // below the error controller's stage spacing; cap the step at half the
  // distance to the nearest charge center so no spike is stepped over
  auto step_cap = [&](const std::array<double, 4>& yy, double zz) {
    double cap2 = 1e9;
    const Vec3 r{yy[0], yy[1], zz};
    for (const auto& site : snapshot.sites) {
      const Vec3 inst = site.instantaneous();
      cap2 = std::min(cap2, 0.25 * (r - inst).norm2());
      // electron spikes are 1/Z of the nuclear one; a looser cap suffices
      for (const auto& off : site.electron_offsets_nm)
        cap2 = std::min(cap2, 4.0 * (r - (inst + off)).norm2());
    }
    return std::sqrt(cap2);
  };
  while (z < z_end - 1e-12) {
    h = std::min(h, z_end - z);
    h = std::min(h, std::max(step_cap(y, z), 2.5e-4));
    std::array<double, 4> err_vec;
    const auto next = rk45(deriv, z, y, h, err_vec);
    double err = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double scale = (i < 2) ? x_scale : p_scale;
      err = std::max(err, std::abs(err_vec[i]) / scale);
    }
    if (err <= opt.rel_tol || h <= opt.dz_min_nm) {
      z += h;
      y = next;
      const double grow = (err > 0.0) ? 0.9 * std::pow(opt.rel_tol / err, 0.2) : 5.0;
      h *= std::clamp(grow, 0.5, 5.0);
    } else {
      h *= std::clamp(0.9 * std::pow(opt.rel_tol / err, 0.25), 0.1, 0.9);
      h = std::max(h, opt.dz_min_nm);
    }
  }
  ParticleState out = state;
  out.position_nm = {y[0], y[1], z_end};
  out.momentum_mev.x = y[2];
  out.momentum_mev.y = y[3];
  out.refresh_parallel_momentum();
  return out;
}

BeamDraw draw_entry(const BeamConfig& beam, const ContinuumPotential& v_lin,
                    const CrystalModel& crystal, RandomStream& rng) {
  beam.validate();
  double x0 = 0.0;
  const bool is_electron = (beam.particle == ParticleKind::electron);
  double rest_x;  // stable equilibrium transverse position for this charge
  if (is_electron) {
    rest_x = v_lin.min_location_nm;
  } else {
    rest_x = 0.0;
    double best = v_lin.value(0.0);
    const int n = 256;
    for (int i = 1; i < n; ++i) {
      const double x = v_lin.period_nm * i / n;
      if (v_lin.value(x) < best) {
        best = v_lin.value(x);
        rest_x = x;
      }
    }
  }
  switch (beam.entry) {
    case EntryDistribution::delta:
      x0 = rest_x;
      break;
    case EntryDistribution::uniform_over_channel:
      x0 = rng.uniform() * crystal.interplanar_spacing_nm;
      break;
    case EntryDistribution::gaussian:
      x0 = rest_x + rng.normal(beam.entry_sigma_nm);
      break;
  }
  const double theta = beam.entry_angle_mrad * 1e-3;
  BeamDraw d;
  d.state = ParticleState::make(beam.energy_mev, beam.particle, {theta, 0.0}, {x0, 0.0, 0.0});
  return d;
}

namespace {

double nearest_plane_offset(double x, double d) {
  const double f = x - d * std::round(x / d);
  return f;  // signed distance to the nearest plane, in (-d/2, d/2]
}

double threshold_ev(const TransportConfig& config, const ContinuumPotential& v_lin) {
  return (config.u0_ev > 0.0) ? config.u0_ev : v_lin.depth_u0_ev;
}

void record_point(TrajectoryRecord& rec, double z_nm, double eperp) {
  rec.z_um.push_back(z_nm * 1e-3);
  rec.eperp_ev.push_back(eperp);
}

}  // namespace

std::pair<TrajectoryRecord, KinkLog> run_scm_trajectory(const BeamDraw& draw,
                                                        const TransportConfig& config,
                                                        const ContinuumPotential& v_lin,
                                                        const CollisionKernel& kernel,
                                                        RandomStream& rng) {
  const CrystalModel& crystal = kernel.crystal();
  const double d = crystal.interplanar_spacing_nm;
  const double depth_nm = config.depth_um * 1e3;
  const double window =
      (config.dz_continuum_nm > 0.0) ? config.dz_continuum_nm : crystal.lattice_constant_nm;
  const double u0 = threshold_ev(config, v_lin);
  TrajectoryRecord rec;
  KinkLog log;
  ParticleState state = draw.state;
  double next_record = 0.0;
  double z = 0.0;
  // electron-rate sum over the planes within the table span
  const int plane_reach = 4;
  while (z < depth_nm) {
    const double dz = std::min(window, depth_nm - z);
    const double dx = nearest_plane_offset(state.position_nm.x, d);
    const double lam_v = kernel.vib_rate_per_nm(dx);
    double lam_e = 0.0;
    for (int p = -plane_reach; p <= plane_reach; ++p) lam_e += kernel.e_rate_per_nm(dx - p * d);
    const double mean_v = config.rate_scale * lam_v * dz;
    const double mean_e = config.rate_scale * lam_e * dz;
    const long n_v = (mean_v > 0.0) ? std::poisson_distribution<long>(mean_v)(rng.engine()) : 0;
    const long n_e = (mean_e > 0.0) ? std::poisson_distribution<long>(mean_e)(rng.engine()) : 0;
    for (long i = 0; i < n_v + n_e; ++i) {
      const bool vib = i < n_v;
      const double e_before = transverse_energy(state, v_lin);
      Vec2 q{};
      if (vib) {
        const double dy = kernel.sample_vib_dy(dx, rng);
        q = kernel.sample_q_vib({dx, dy}, rng);
        ++rec.n_vib_kinks;
      } else {
        // pick the contributing plane, then the in-plane offset of the
        // struck atom, the orbital, and the instantaneous electron offset
        double r = rng.uniform() * lam_e;
        double dxp = dx;
        for (int p = -plane_reach; p <= plane_reach; ++p) {
          const double w = kernel.e_rate_per_nm(dx - p * d);
          if (r < w) {
            dxp = dx - p * d;
            break;
          }
          r -= w;
        }
        const auto& orbitals = kernel.form_factors().orbitals();
        double span = 0.0;
        for (const auto& o : orbitals) span = std::max(span, 6.0 * o.radius_nm);
        double p_max = 0.0;
        for (int j = 0; j <= 64; ++j)
          p_max = std::max(p_max, kernel.p_e({dxp, span * (2.0 * j / 64.0 - 1.0)}));
        double dy = 0.0;
        for (int attempt = 0; attempt < 2000; ++attempt) {
          dy = span * (2.0 * rng.uniform() - 1.0);
          if (rng.uniform() * p_max <= kernel.p_e({dxp, dy})) break;
        }
        const std::size_t k = kernel.sample_electron_orbital({dxp, dy}, rng);
        const Vec3 s = sample_electron_offset(orbitals[k], rng);
        q = kernel.sample_q_electron(k, {s.x, s.y}, rng);
        ++rec.n_e_kinks;
      }
      const Vec2 pt_before = state.p_transverse();
      state.momentum_mev.x += q.x;
      state.momentum_mev.y += q.y;
      state.refresh_parallel_momentum();
      const double e_after = transverse_energy(state, v_lin);
      log.events.push_back({z * 1e-3, vib ? 'v' : 'e', q, e_before, e_after, pt_before});
    }
    state = step_continuum(state, v_lin, dz);
    z += dz;
    const double eperp = transverse_energy(state, v_lin);
    if (z >= next_record) {
      record_point(rec, z, eperp);
      next_record += config.record_every_nm;
    }
    if (eperp > u0) {
      rec.dechanneled_at_um = z * 1e-3;
      break;
    }
  }
  return {std::move(rec), std::move(log)};
}

TrajectoryRecord run_cm_trajectory(const BeamDraw& draw, const TransportConfig& config,
                                   const ContinuumPotential& v_lin, const CrystalModel& crystal,
                                   const ScreeningModel& screening, const FormFactorModel& ff,
                                   RandomStream& rng, const CmStepOptions& step_opt) {
  const double depth_nm = config.depth_um * 1e3;
  const double window =
      (config.dz_continuum_nm > 0.0) ? config.dz_continuum_nm : crystal.lattice_constant_nm;
  const double u0 = threshold_ev(config, v_lin);
  TrajectoryRecord rec;
  ParticleState state = draw.state;
  const Vec2 lattice_phase{rng.uniform(), rng.uniform()};
  std::optional<PhononCorrelationModel> corr;
  if (config.correlations_enabled && config.lambda_c_nm > 0.0)
    corr.emplace(crystal, config.lambda_c_nm, rng);
  double next_record = 0.0;
  double z = 0.0;
  while (z < depth_nm) {
    const double dz = std::min(window, depth_nm - z);
    SnapshotRegion region;
    region.z0_nm = state.position_nm.z;
    region.z1_nm = state.position_nm.z + dz;
    region.transverse_center_nm = {state.position_nm.x, state.position_nm.y};
    Snapshot snap = make_snapshot(crystal, region, ff, rng, corr ? &*corr : nullptr,
                                  lattice_phase);
    state = step_cm(state, snap, v_lin, crystal, screening, ff, dz, step_opt);
    z += dz;
    const double eperp = transverse_energy(state, v_lin);
    if (z >= next_record) {
      record_point(rec, z, eperp);
      next_record += config.record_every_nm;
    }
    if (eperp > u0) {
      rec.dechanneled_at_um = z * 1e-3;
      break;
    }
  }
  return rec;
}

std::optional<double> detect_dechanneling(const TrajectoryRecord& record, double u0_ev) {
  for (std::size_t i = 0; i < record.z_um.size(); ++i)
    if (record.eperp_ev[i] > u0_ev) return record.z_um[i];
  return record.dechanneled_at_um;
}

DechannelingFit estimate_dechanneling_length(const std::vector<double>& depth_um,
                                             const std::vector<double>& fraction,
                                             const std::vector<double>& fraction_err,
                                             double window_start_fraction) {
  DechannelingFit fit;
  if (depth_um.size() < 3) return fit;
  const double z_start = depth_um.front() +
                         window_start_fraction * (depth_um.back() - depth_um.front());
  // weighted least squares on ln f
  double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
  int n_used = 0;
  for (std::size_t i = 0; i < depth_um.size(); ++i) {
    if (depth_um[i] < z_start || !(fraction[i] > 0.0)) continue;
    const double y = std::log(fraction[i]);
    const double sig = std::max(fraction_err[i] / fraction[i], 1e-6);
    const double w = 1.0 / (sig * sig);
    sw += w;
    swx += w * depth_um[i];
    swy += w * y;
    swxx += w * depth_um[i] * depth_um[i];
    swxy += w * depth_um[i] * y;
    ++n_used;
  }
  if (n_used < 2) return fit;
  const double det = sw * swxx - swx * swx;
  if (!(det > 0.0)) return fit;
  const double slope = (sw * swxy - swx * swy) / det;
  const double slope_var = sw / det;
  if (slope < 0.0) {
    fit.decay_observed = true;
    fit.length_um = -1.0 / slope;
    fit.length_err_um = std::sqrt(slope_var) / (slope * slope);
  }
  return fit;
}

SimulationResult run_ensemble(const EnsembleConfig& config, const ContinuumPotential& v_lin,
                              const CrystalModel& crystal, const ScreeningModel& screening,
                              const FormFactorModel& ff, const CollisionKernel& kernel,
                              std::vector<KinkLog>* kink_logs) {
  const auto t0 = std::chrono::steady_clock::now();
  const long n = config.n_trajectories;
  std::vector<TrajectoryRecord> records(n);
  std::vector<KinkLog> logs(kink_logs ? n : 0);
  std::atomic<long> next{0};
  int n_threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = static_cast<int>(std::min<long>(n_threads, n));
  auto worker = [&]() {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) break;
      RandomStream rng(config.seed, static_cast<std::uint64_t>(i));
      const BeamDraw draw = draw_entry(config.beam, v_lin, crystal, rng);
      if (config.model == TransportModel::scm) {
        auto [rec, log] = run_scm_trajectory(draw, config.transport, v_lin, kernel, rng);
        records[i] = std::move(rec);
        if (kink_logs) logs[i] = std::move(log);
      } else {
        records[i] = run_cm_trajectory(draw, config.transport, v_lin, crystal, screening, ff, rng);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SimulationResult result;
  result.n_trajectories = n;
  const int nb = std::max(config.depth_bins, 2);
  result.depth_um.resize(nb + 1);
  result.channeled_fraction.resize(nb + 1);
  result.fraction_stderr.resize(nb + 1);
  for (int j = 0; j <= nb; ++j) {
    const double zj = config.transport.depth_um * j / nb;
    long alive = 0;
    for (const auto& r : records)
      if (!r.dechanneled_at_um || *r.dechanneled_at_um > zj) ++alive;
    const double f = static_cast<double>(alive) / static_cast<double>(n);
    result.depth_um[j] = zj;
    result.channeled_fraction[j] = f;
    result.fraction_stderr[j] = std::sqrt(std::max(f * (1.0 - f), 0.0) / static_cast<double>(n));
  }
  for (const auto& r : records) {
    if (r.dechanneled_at_um) ++result.n_dechanneled;
    result.n_vib_kinks += r.n_vib_kinks;
    result.n_e_kinks += r.n_e_kinks;
  }
  result.fit = estimate_dechanneling_length(result.depth_um, result.channeled_fraction,
                                            result.fraction_stderr);
  if (kink_logs) *kink_logs = std::move(logs);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace thornsim
