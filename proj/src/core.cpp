#include "thornsim/core.hpp"

#include "thornsim/potentials.hpp"

namespace thornsim {

void CrystalModel::validate() const {
  if (Z < 1) throw std::invalid_argument("CrystalModel: Z must be >= 1");
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("CrystalModel: ") + name + " must be > 0");
  };
  positive(lattice_constant_nm, "lattice_constant_nm");
  positive(interplanar_spacing_nm, "interplanar_spacing_nm");
  positive(u1_nm, "u1_nm");
  positive(a_tf_nm, "a_tf_nm");
  positive(r_n_nm, "r_n_nm");
  positive(u0_ev, "u0_ev");
  positive(site_density, "site_density");
  if (!(r_n_nm < u1_nm && u1_nm < a_tf_nm && a_tf_nm < interplanar_spacing_nm)) {
    throw std::invalid_argument(
        "CrystalModel: scale hierarchy r_N < u1 < a_TF < interplanar spacing violated");
  }
}

CrystalModel CrystalModel::silicon_110() {
  CrystalModel c;
  c.Z = 14;
  c.lattice_constant_nm = 0.5431;
  c.geometry = ChannelGeometry::planar;
  c.orientation = "110";
  c.interplanar_spacing_nm = 0.192;
  c.u1_nm = 0.0075;
  c.a_tf_nm = 0.0194;
  c.r_n_nm = 3e-6;
  c.u0_ev = 22.0;
  // atoms per nm^2 of a (110) plane: bulk density 8/a^3 times d_p
  c.site_density = 8.0 / std::pow(c.lattice_constant_nm, 3) * c.interplanar_spacing_nm;
  c.validate();
  return c;
}

void ParticleState::refresh_parallel_momentum() {
  const double pz2 = energy_mev * energy_mev - mass_mev * mass_mev -
                     momentum_mev.x * momentum_mev.x - momentum_mev.y * momentum_mev.y;
  if (pz2 <= 0.0) throw std::domain_error("ParticleState: transverse momentum exceeds mass shell");
  momentum_mev.z = std::sqrt(pz2);
}

ParticleState ParticleState::make(double energy_mev, ParticleKind kind, Vec2 theta_rad,
                                  Vec3 position_nm) {
  ParticleState s;
  s.energy_mev = energy_mev;
  s.mass_mev = constants::electron_mass_mev;
  s.charge_sign = (kind == ParticleKind::electron) ? -1 : +1;
  if (!(energy_mev > s.mass_mev)) throw std::domain_error("ParticleState: E must exceed m");
  const double p = std::sqrt(energy_mev * energy_mev - s.mass_mev * s.mass_mev);
  s.momentum_mev = {p * theta_rad.x, p * theta_rad.y, 0.0};
  s.refresh_parallel_momentum();
  s.position_nm = position_nm;
  return s;
}

void BeamConfig::validate() const {
  if (!(energy_mev > constants::electron_mass_mev))
    throw std::invalid_argument("BeamConfig: E must exceed the electron mass");
  if (!std::isfinite(entry_angle_mrad)) throw std::invalid_argument("BeamConfig: entry angle not finite");
}

CriticalParameters critical_parameters(double u0_ev, double energy_mev) {
  if (!(energy_mev > 0.0)) throw std::domain_error("critical_parameters: E must be > 0");
  if (u0_ev < 0.0) throw std::domain_error("critical_parameters: U0 must be >= 0");
  CriticalParameters cp;
  cp.q_c_mev = std::sqrt(2.0 * energy_mev * (u0_ev / constants::ev_per_mev));
  cp.psi_c_mrad = cp.q_c_mev / energy_mev * 1e3;
  return cp;
}

CriticalParameters critical_parameters(const CrystalModel& crystal, double energy_mev) {
  return critical_parameters(crystal.u0_ev, energy_mev);
}

double transverse_energy(const ParticleState& state, const ContinuumPotential& v_lin) {
  const Vec2 pt = state.p_transverse();
  const double kinetic_ev = pt.norm2() / (2.0 * state.energy_mev) * constants::ev_per_mev;
  double potential_ev = 0.0;
  if (v_lin.geometry == ChannelGeometry::planar) {
    potential_ev = static_cast<double>(state.charge_sign) * v_lin.value(state.position_nm.x);
    // gauge: zero at this particle's own potential minimum
    potential_ev -= static_cast<double>(state.charge_sign) *
                    (state.charge_sign < 0 ? v_lin.value(v_lin.min_location_nm) : 0.0);
  } else {
    potential_ev = static_cast<double>(state.charge_sign) *
                   v_lin.value2(state.position_nm.x, state.position_nm.y);
    if (state.charge_sign < 0) {
      potential_ev += v_lin.depth_u0_ev;  // minimum of -V is -U0 on a 0-gauged table
    }
  }
  return kinetic_ev + potential_ev;
}

}  // namespace thornsim
