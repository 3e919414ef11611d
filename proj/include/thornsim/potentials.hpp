#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "thornsim/core.hpp"

namespace thornsim {

// Sum-of-Yukawas screening of the atomic potential,
//   e V_A(r) = Z alpha hbar*c / r * sum_i w_i exp(-mu_i r),
// with sum w_i = 1 so the bare Coulomb peak is recovered at r -> 0.
// Below r_N the potential is held at its r_N value (nuclear regulator).
struct ScreeningModel {
  struct Term {
    double weight;
    double mu_inv_nm;
  };
  std::vector<Term> terms;
  double mu_n_inv_nm = 0.0;  // 1/r_N

  void validate() const;
  // Moliere three-Yukawa parametrization, the standard channeling choice.
  static ScreeningModel moliere(double a_tf_nm, double r_n_nm);
};

// Energy of a unit positive test charge, in eV. r in nm.
double atomic_potential(double r_nm, const ScreeningModel& s, int Z);
// V_A convolved with the isotropic Gaussian displacement distribution
// (per-axis sigma = u1). Analytic per Yukawa term, finite at r = 0.
double smeared_atomic_potential(double r_nm, const ScreeningModel& s, int Z, double u1_nm);

// single smeared Yukawa g exp(-mu r)/r (x) Gauss(u1); g in eV*nm
double smeared_yukawa(double g, double mu_inv_nm, double u1_nm, double r_nm);
// scaled complementary error function exp(x^2) erfc(x), stable for large x
double erfcx(double x);

// Time/parallel-averaged channel potential on a 1-D (planar) or 2-D (axial)
// grid over one period, gauged so min = 0; values in eV for a unit positive
// charge. Gradient table kept consistent with the value table.
class ContinuumPotential {
 public:
  ChannelGeometry geometry = ChannelGeometry::planar;
  double period_nm = 0.0;  // planar: interplanar spacing
  std::vector<double> value_ev;      // planar: V(x_i), x_i = i*dx, i in [0,n)
  std::vector<double> gradient_ev_nm;
  // axial only: 2-D grid (row-major, ny rows), periods in x and y
  int nx = 0, ny = 0;
  double period_y_nm = 0.0;
  double depth_u0_ev = 0.0;

  double value(double x_nm) const;     // planar, periodic
  double gradient(double x_nm) const;  // planar, periodic, eV/nm
  double value2(double x_nm, double y_nm) const;  // axial (bilinear)
  double min_location_nm = 0.0;  // planar: x of the potential minimum for e-
};

struct ContinuumBuildOptions {
  int points_per_period = 512;  // must resolve u1/4
  int neighbor_planes = 12;
};

ContinuumPotential build_continuum(const CrystalModel& crystal, const ScreeningModel& s,
                                   const ContinuumBuildOptions& opt = {});

// Atomic ("vib") thorn: displaced atomic potential minus the thermally
// smeared potential at the mean site. Coordinates relative to the mean site.
struct ThornVib {
  const CrystalModel* crystal = nullptr;
  ScreeningModel screening;
  Vec3 displacement_nm{};
};

double thorn_vib_potential(const Vec3& r_nm, const ThornVib& t);

// Spherically averaged hydrogen-like orbital: |psi|^2 = exp(-2r/a)/(pi a^3).
struct OrbitalModel {
  double radius_nm = 0.02;
  int occupancy = 1;

  double density(double r_nm) const;           // nm^-3, normalized to 1
  double line_density(double b_nm) const;      // nm^-2, integral over z
  double cloud_potential_ev(double r_nm) const;  // potential of +e cloud
  double form_factor(double q_mev) const;      // f_k(q), f_k(0) = 1
};

// Electronic thorn: point electron at offset s from the (displaced) nucleus,
// plus the opposite-sign orbital cloud centred on the nucleus.
struct ThornElectron {
  OrbitalModel orbital;
  Vec3 offset_nm{};              // s, instantaneous electron offset
  Vec3 parent_displacement_nm{};  // u of the parent nucleus
  double cap_r_nm = 1e-6;        // evaluation cap at the electron point
};

// continuous part of the thorn charge density at r (units of e/nm^3);
// the -e delta sits at t.offset
double thorn_electron_density(const Vec3& r_nm, const ThornElectron& t);
double thorn_electron_potential(const Vec3& r_nm, const ThornElectron& t);

// (Z_eff alpha hbar c / r)[exp(-r/r_max) - exp(-r/r_min)]: the spherical
// stand-in for an asymmetric thorn, Coulomb peak regularized at r_min.
struct PhenomenologicalThorn {
  int z_eff = 1;
  double r_max_nm = 0.0075;
  double r_min_nm = 3e-6;

  void validate() const;
  double potential_ev(double r_nm) const;
  // 3-D Fourier transform of the interaction energy in natural units
  // (dimensionless * MeV^-2): 4 pi Z alpha [1/(q^2+mu_max^2) - 1/(q^2+mu_min^2)]
  double form_factor_nat(double q_mev) const;
};

// 1-D line-integrated profile of a radial potential, P(x) = 2 pi
// int rho W(sqrt(x^2+rho^2)) drho; used for Fig-1(a) style emitters.
struct ProjectedProfile {
  std::vector<double> x_nm;
  std::vector<double> value_ev_nm2;
};

ProjectedProfile projected_profile(const std::function<double(double)>& radial_ev,
                                   const std::vector<double>& x_nm);

// Analytic 3-D Fourier transforms of the thorn interaction energies, in
// natural units (input q vector in MeV, output MeV^-2). These feed the
// generic Born formula; cross-checked against real-space quadrature in tests.
std::complex<double> thorn_vib_ft_nat(const Vec3& q_mev, const ThornVib& t, double u1_nm);
std::complex<double> thorn_electron_ft_nat(const Vec3& q_mev, const ThornElectron& t);
double atomic_ft_nat(double q_mev, const ScreeningModel& s, int Z);

}  // namespace thornsim
