#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "thornsim/potentials.hpp"

namespace thornsim {

// Atomic charge form factor and per-orbital electron form factors, tied
// together by f_A(q^2) = 1 - sum_k f_k(q)/Z (enforced by construction:
// f_A is always derived from the orbital list).
class FormFactorModel {
 public:
  FormFactorModel() = default;
  FormFactorModel(int Z, std::vector<OrbitalModel> orbitals);

  double f_atom(double q_mev) const;          // f_A(q^2): 0 at q=0, ->1 at large q
  double f_orbital(std::size_t k, double q_mev) const;
  const std::vector<OrbitalModel>& orbitals() const { return orbitals_; }
  int Z() const { return z_; }

  static FormFactorModel silicon();

 private:
  int z_ = 0;
  std::vector<OrbitalModel> orbitals_;
};

// dsigma/d^2q tabulated on a (log|q|, azimuth) grid. Values in nm^2/MeV^2,
// azimuth measured from the direction of the thorn's transverse parameter
// (u_T or s_T). Marginal/conditional CDFs support inverse-transform sampling.
class DifferentialXS {
 public:
  std::vector<double> q_edges_mev;   // n_q+1 log-spaced bin edges
  std::vector<double> q_mid_mev;     // n_q
  int n_phi = 64;
  std::vector<double> value;         // n_q * n_phi, dsigma/d^2q at (q_mid, phi_mid)
  double total_nm2 = 0.0;
  std::string thorn_tag;

  // built by integrating value * q dq dphi per bin
  std::vector<double> q_marginal_mass;  // n_q, bin masses (nm^2)
  std::vector<double> q_cdf;            // n_q+1
  std::vector<double> phi_cdf;          // n_q * (n_phi+1), conditional per q bin

  double at(int iq, int iphi) const { return value[static_cast<std::size_t>(iq) * n_phi + iphi]; }
  double phi_mid(int iphi) const;
  void finalize();  // fills total, marginals, CDFs
  // first moment vector and |q| moment, by grid quadrature
  Vec2 first_moment_mev_nm2() const;
  double abs_q_moment_mev_nm2() const;
  double second_moment_mev2_nm2() const;

  static DifferentialXS make_grid(double q_lo_mev, double q_hi_mev, int points_per_decade,
                                  int n_phi);
};

// Generic Born cross section (1/4pi^2)|FT of interaction energy|^2, from an
// analytic momentum-space amplitude in natural units. Returns nm^2/MeV^2.
double born_dsigma_generic(const std::function<std::complex<double>(const Vec3&)>& ft_nat,
                           const Vec3& q_mev);

// Atomic thorn, closed form: 4 [Z alpha f_A/q^2]^2 |e^{iq.u} - e^{-q^2 u1^2/2}|^2.
double born_dsigma_atom(const Vec2& q_t_mev, const Vec2& u_t_nm, const FormFactorModel& ff,
                        double u1_nm);
// azimuth-averaged version (the integrand of the total cross section)
double born_dsigma_atom_avg(double q_mev, double abs_u_nm, const FormFactorModel& ff,
                            double u1_nm);
// total atomic-thorn cross section, nm^2 (adaptive quadrature, rel tol 1e-6)
double sigma_atom_total(double abs_u_t_nm, const FormFactorModel& ff, double u1_nm);

// Electronic thorn: 4 (alpha/q^2)^2 |e^{-iq.s} - f_k(q)|^2.
double born_dsigma_electron(const Vec2& q_t_mev, const Vec2& s_t_nm, const FormFactorModel& ff,
                            std::size_t orbital_k);
double born_dsigma_electron_avg(double q_mev, double abs_s_nm, const FormFactorModel& ff,
                                std::size_t orbital_k);
// total per-orbital cross section; infrared log divergence of the dipole
// tail is cut at q_min (default: hbar c / channel width scale)
double sigma_electron_total(double abs_s_t_nm, const FormFactorModel& ff, std::size_t orbital_k,
                            double q_min_mev, double q_max_mev);

// Spherical Yukawa-sum potentials: analytic eikonal kick
//   |q_cl(b)| = sum_i 2 g_i mu_i K1(mu_i b),  direction along b_hat.
Vec2 classical_kick(const Vec2& b_nm, const PhenomenologicalThorn& thorn);
double classical_kick_magnitude(double b_nm, const PhenomenologicalThorn& thorn);
// numeric straight-line quadrature of -d/db int dz W(b, z) for any radial
// potential (eV in, MeV out); the analytic route's independent check
double classical_kick_numeric(double b_nm, const std::function<double(double)>& radial_ev);
// location and value of the rainbow maximum of |q_cl|
struct RainbowPoint {
  double b_nm = 0.0;
  double q_mev = 0.0;
};
RainbowPoint classical_kick_maximum(const PhenomenologicalThorn& thorn);

struct ClassicalXSOptions {
  int b_samples = 400000;
  double b_max_factor = 12.0;  // disk radius in units of r_max
};

// Transports the impact-parameter area measure through b -> q_cl(b) into the
// q grid. Bins beyond max|q_cl| are exactly zero; the endpoint bin carries
// the integrable rainbow pile-up as finite mass.
DifferentialXS classical_dsigma(const PhenomenologicalThorn& thorn, const DifferentialXS& grid,
                                const ClassicalXSOptions& opt = {});

DifferentialXS quantum_dsigma_phenomenological(const PhenomenologicalThorn& thorn,
                                               const DifferentialXS& grid);
DifferentialXS quantum_dsigma_atom(const Vec2& u_t_nm, const FormFactorModel& ff, double u1_nm,
                                   const DifferentialXS& grid);
DifferentialXS quantum_dsigma_electron(const Vec2& s_t_nm, const FormFactorModel& ff,
                                       std::size_t orbital_k, const DifferentialXS& grid);

Vec2 sum_rule_first_moment(const DifferentialXS& xs);

struct SumRuleReport {
  Vec2 first_moment_mev_nm2{};
  double second_moment_quantum_mev2_nm2 = 0.0;
  double second_moment_classical_mev2_nm2 = 0.0;
  double quantum_quadrature_error = 0.0;
  double classical_quadrature_error = 0.0;
  bool converged = false;
  double ratio() const { return second_moment_classical_mev2_nm2 / second_moment_quantum_mev2_nm2; }
};

// Eq-type q^2 sum rule via two independent quadratures: the analytic
// momentum-space form factor vs the real-space eikonal kick integral.
// Throws if r_min = 0 (log divergence).
SumRuleReport sum_rule_second_moment(const PhenomenologicalThorn& thorn);

struct DechannelingEstimate {
  double q_c_mev = 0.0;
  double q_min_mev = 0.0;
  double q_max_mev = 0.0;
  double sigma_numeric_nm2 = 0.0;
  double sigma_closed_form_nm2 = 0.0;
  std::string model;  // "quantum" | "classical"
};

// Dechanneling-efficiency cross section on the sharp-cutoff Rutherford
// model: numeric two-integral evaluation plus the printed closed form
// 4 pi (Z alpha / q_c)^2 [2 ln(q_c/q_min) + 1].
DechannelingEstimate dechanneling_xs(double q_c_mev, double q_min_mev, double q_max_mev, int z_eff,
                                     const std::string& model = "quantum");

enum class DechCase { atom, electron };

struct DechRatioReport {
  DechannelingEstimate quantum;
  DechannelingEstimate classical;
  double ratio = 0.0;  // sigma_cl / sigma_quant, closed forms
};

// quantum q_min = hbar c / r_max, classical q_min = Z_eff alpha hbar c / r_max
DechRatioReport dech_ratio(DechCase c, const CrystalModel& crystal, double energy_mev,
                           double q_c_mev);

}  // namespace thornsim
