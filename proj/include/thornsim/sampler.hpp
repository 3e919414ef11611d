#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "thornsim/xs.hpp"

namespace thornsim {

// One independent, reproducible random stream per trajectory. Identical
// (seed, index) pairs replay bit-exactly regardless of worker count.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_index);

  double uniform();                 // [0,1)
  double normal(double sigma = 1.0);
  std::uint64_t raw();
  std::mt19937_64& engine() { return engine_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

 private:
  std::uint64_t master_seed_ = 0;
  std::uint64_t stream_index_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct CubicTable {
  double x0 = 0.0, dx = 0.0;
  std::vector<double> y;
  double operator()(double x) const;  // clamped cubic (Catmull-Rom) interpolation
  double last_x() const { return x0 + dx * (static_cast<double>(y.size()) - 1.0); }
};

struct KernelOptions {
  double q_lo_mev = 1e-4;
  double q_hi_mev = 100.0;
  int points_per_decade = 256;
  int n_phi = 64;
  int n_u_nodes = 16;          // |u_T| nodes for the vib sampling tables
  int n_s_nodes = 10;          // |s_T| nodes per orbital
  double u_node_max_u1 = 5.0;  // table span in units of u1
  double q_ir_electron_mev = 0.0;  // 0 -> hbar c / interplanar spacing
  double beam_energy_mev = 1000.0;  // sets the electron kinematic cutoff
};

// Collision probabilities and momentum-transfer sampling tables derived
// from the Born cross sections, shared read-only by all trajectories.
class CollisionKernel {
 public:
  CollisionKernel(const CrystalModel& crystal, const FormFactorModel& ff,
                  const KernelOptions& opt = {});

  const CrystalModel& crystal() const { return crystal_; }
  const FormFactorModel& form_factors() const { return ff_; }

  double sigma_vib(double abs_u_nm) const;                   // nm^2, interpolated
  double sigma_e(std::size_t k, double abs_s_nm) const;      // nm^2
  double q_max_electron_mev(double energy_mev) const;

  // per-site probability weight, Eq-(10) structure: 2-D Gaussian nucleus
  // density times sigma_A(u_T = r_T - Rbar_T)
  double p_vib(const Vec2& r_t_nm, const Vec2& mean_site_nm) const;
  // inelastic-collision weight at impact parameter b from the instantaneous
  // nucleus: sum_k sigma_k(s_T=b) int dz |psi_k(b,z)|^2
  double p_e(const Vec2& b_a_nm) const;
  // variant convolved with the u-Gaussian (depends only on r - Rbar)
  double p_e_convolved(const Vec2& r_minus_mean_nm) const;

  // planar line rates: collisions per nm of depth per plane, as a function
  // of distance x from the plane (Delta-y already integrated out)
  double vib_rate_per_nm(double dx_nm) const;
  double e_rate_per_nm(double dx_nm) const;

  // draw q (MeV, lab transverse frame) for a vib collision with thorn
  // parameter u_T; table nearest in |u_T|, azimuth rotated to u_T direction
  Vec2 sample_q_vib(const Vec2& u_t_nm, RandomStream& rng) const;
  Vec2 sample_q_electron(std::size_t k, const Vec2& s_t_nm, RandomStream& rng) const;
  // conditional Delta-y of the struck atom (vib) at plane distance dx
  double sample_vib_dy(double dx_nm, RandomStream& rng) const;
  std::size_t sample_electron_orbital(const Vec2& b_nm, RandomStream& rng) const;

  const DifferentialXS& vib_table(double abs_u_nm) const;  // nearest node
  const DifferentialXS& electron_table(std::size_t k, double abs_s_nm) const;
  double q_ir_electron() const { return q_ir_electron_mev_; }

  // diagnostic: number of weight evaluations at |u_T| > 3 u1 (approximation
  // A2 strained)
  mutable std::atomic<long> strained_count{0};

 private:
  CrystalModel crystal_;
  FormFactorModel ff_;
  KernelOptions opt_;
  double q_ir_electron_mev_ = 0.0;
  CubicTable sigma_vib_table_;                 // |u| in [0, 5 u1]
  std::vector<CubicTable> sigma_e_tables_;     // per orbital, |s| in [0, 8 a_k]
  CubicTable vib_rate_table_;                  // dx in [0, 6 u1]
  CubicTable e_rate_table_;                    // dx in [0, span]
  std::vector<double> u_nodes_nm_;
  std::vector<DifferentialXS> vib_xs_;         // per u node
  std::vector<std::vector<double>> s_nodes_nm_;
  std::vector<std::vector<DifferentialXS>> e_xs_;  // [orbital][s node]
};

// Inverse-CDF draw in |q| followed by the conditional azimuth draw; phi is
// measured from the thorn-parameter direction.
Vec2 sample_q(const DifferentialXS& xs, RandomStream& rng);

// isotropic Gaussian displacement, per-axis sigma = u1
Vec3 sample_displacement(double u1_nm, RandomStream& rng);
// draw from |psi_k|^2 (r ~ Gamma(3, a/2), isotropic direction)
Vec3 sample_electron_offset(const OrbitalModel& orbital, RandomStream& rng);

// chi-square upper tail probability (used by the sampler-fidelity tests)
double chi_square_p_value(double chi2, int dof);

}  // namespace thornsim
