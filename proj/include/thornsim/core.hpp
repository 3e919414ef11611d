#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace thornsim {

// Natural units internally: momenta and energies in MeV, lengths in nm.
// hbar*c converts between the two at module boundaries.
namespace constants {
inline constexpr double alpha = 1.0 / 137.035999084;
inline constexpr double electron_mass_mev = 0.51099895;
inline constexpr double hbarc_mev_fm = 197.3269804;
inline constexpr double hbarc_mev_nm = hbarc_mev_fm * 1e-6;  // MeV*nm
inline constexpr double hbarc_ev_nm = 197.3269804;           // eV*nm
inline constexpr double ev_per_mev = 1e6;
}  // namespace constants

struct PhysicalConstants {
  double fine_structure_alpha = constants::alpha;
  double electron_mass = constants::electron_mass_mev;  // MeV
  double hbar_c = constants::hbarc_mev_fm;              // MeV*fm
};

// q [MeV] <-> inverse length [1/nm]
inline double mev_from_inv_nm(double inv_nm) { return inv_nm * constants::hbarc_mev_nm; }
inline double inv_nm_from_mev(double q_mev) { return q_mev / constants::hbarc_mev_nm; }
// length in natural units (1/MeV)
inline double nat_from_nm(double r_nm) { return r_nm / constants::hbarc_mev_nm; }
inline double nm_from_nat(double r_nat) { return r_nat * constants::hbarc_mev_nm; }

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
};

enum class ChannelGeometry { planar, axial };

// Material, geometry and thermal-vibration parameters shared by all physics.
// The scale hierarchy r_N < u1 < a_TF < d is required by the short-range
// residual-potential picture and is enforced at construction.
struct CrystalModel {
  int Z = 14;
  double lattice_constant_nm = 0.5431;
  ChannelGeometry geometry = ChannelGeometry::planar;
  std::string orientation = "110";
  double interplanar_spacing_nm = 0.192;
  double u1_nm = 0.0075;    // 1-D rms thermal displacement
  double a_tf_nm = 0.0194;  // Thomas-Fermi screening radius
  double r_n_nm = 3e-6;     // nuclear radius (inner Coulomb regulator)
  double u0_ev = 22.0;      // channeling well depth
  // planar: atoms per nm^2 of plane; axial: atoms per nm of string
  double site_density = 9.59;

  void validate() const;
  static CrystalModel silicon_110();
};

enum class ParticleKind { electron, positron };

// Relativistic kinematics of the projectile. The mass shell
// E^2 = p^2 + m^2 is kept exact by construction: transverse kicks update
// p_T and the parallel component is recomputed from E.
struct ParticleState {
  double energy_mev = 0.0;
  Vec3 momentum_mev{};
  Vec3 position_nm{};
  int charge_sign = -1;  // -1 electron, +1 positron
  double mass_mev = constants::electron_mass_mev;

  double p_parallel() const { return momentum_mev.z; }
  Vec2 p_transverse() const { return {momentum_mev.x, momentum_mev.y}; }
  double mass_shell_violation() const {
    const double e2 = energy_mev * energy_mev;
    return std::abs(e2 - momentum_mev.norm2() - mass_mev * mass_mev) / e2;
  }
  // restores p_z from (E, m, p_T); throws if p_T is kinematically forbidden
  void refresh_parallel_momentum();

  static ParticleState make(double energy_mev, ParticleKind kind, Vec2 theta_rad, Vec3 position_nm);
};

enum class EntryDistribution { delta, uniform_over_channel, gaussian };

struct BeamConfig {
  ParticleKind particle = ParticleKind::electron;
  double energy_mev = 1000.0;
  double entry_angle_mrad = 0.0;
  EntryDistribution entry = EntryDistribution::delta;
  double entry_sigma_nm = 0.0;  // only for gaussian entry

  void validate() const;
};

struct CriticalParameters {
  double psi_c_mrad = 0.0;
  double q_c_mev = 0.0;
};

// psi_c = sqrt(2 U0 / E), q_c = E psi_c = sqrt(2 E U0).
CriticalParameters critical_parameters(const CrystalModel& crystal, double energy_mev);
CriticalParameters critical_parameters(double u0_ev, double energy_mev);

class ContinuumPotential;  // potentials.hpp

// E_perp = p_T^2/(2E) + charge_sign * e V^(Lin)(r_T), returned in eV.
// The potential table is gauged so its minimum is the E_perp zero.
double transverse_energy(const ParticleState& state, const ContinuumPotential& v_lin);

}  // namespace thornsim
