#pragma once

#include <optional>
#include <vector>

#include "thornsim/sampler.hpp"

namespace thornsim {

// Long/short wavelength split of the thermal displacement field. Long modes
// (wavelength > lambda_c) move neighbouring atoms coherently; the residual
// per-site noise keeps the total variance at u1^2.
class PhononCorrelationModel {
 public:
  PhononCorrelationModel(const CrystalModel& crystal, double lambda_c_nm, RandomStream& rng,
                         int n_modes = 64);

  double lambda_c_nm() const { return lambda_c_nm_; }
  double u_long_nm() const { return u_long_nm_; }
  double u_short_nm() const { return u_short_nm_; }
  // smooth long-wavelength displacement field at a mean site position
  Vec3 long_displacement(const Vec3& mean_site_nm) const;

 private:
  struct Mode {
    Vec3 k_inv_nm{};
    Vec3 polarization{};
    double phase = 0.0;
    double amplitude_nm = 0.0;
  };
  double lambda_c_nm_ = 0.0;
  double u_long_nm_ = 0.0;
  double u_short_nm_ = 0.0;
  std::vector<Mode> modes_;
};

PhononCorrelationModel correlated_displacement_field(const CrystalModel& crystal,
                                                     double lambda_c_nm, RandomStream& rng);

// Instantaneous constituent positions near one trajectory segment.
struct Snapshot {
  struct Site {
    Vec3 mean_nm{};
    Vec3 displacement_nm{};
    std::vector<Vec3> electron_offsets_nm;  // relative to displaced nucleus
    Vec3 instantaneous() const { return mean_nm + displacement_nm; }
  };
  std::vector<Site> sites;
  double z0_nm = 0.0, z1_nm = 0.0;
};

struct SnapshotRegion {
  double z0_nm = 0.0;
  double z1_nm = 0.0;
  Vec2 transverse_center_nm{};
  double transverse_cutoff_nm = 0.25;
};

Snapshot make_snapshot(const CrystalModel& crystal, const SnapshotRegion& region,
                       const FormFactorModel& ff, RandomStream& rng,
                       const PhononCorrelationModel* correlations = nullptr,
                       const Vec2& plane_lattice_offset_nm = {});

struct KinkEvent {
  double z_um = 0.0;
  char kind = 'v';  // 'v' vib, 'e' electron
  Vec2 q_mev{};
  double eperp_before_ev = 0.0;
  double eperp_after_ev = 0.0;
  Vec2 p_t_before_mev{};  // lets the jump be checked against (2 p_T.q + q^2)/2E
};

struct KinkLog {
  std::vector<KinkEvent> events;
};

// One leapfrog update of the transverse phase space in the continuum
// potential; depth is the independent variable, E and p_par stay fixed.
ParticleState step_continuum(const ParticleState& state, const ContinuumPotential& v_lin,
                             double dz_nm);

struct CmStepOptions {
  double rel_tol = 1e-6;
  double dz_min_nm = 1e-7;
  double nuclear_cap_nm = 0.0;  // 0 -> crystal r_N
};

// Adaptive step through the full instantaneous potential: continuum
// gradient plus the residual thorn forces of every snapshot site.
ParticleState step_cm(const ParticleState& state, const Snapshot& snapshot,
                      const ContinuumPotential& v_lin, const CrystalModel& crystal,
                      const ScreeningModel& screening, const FormFactorModel& ff, double dz_nm,
                      const CmStepOptions& opt = {});

struct TrajectoryRecord {
  std::vector<double> z_um;
  std::vector<double> eperp_ev;
  std::optional<double> dechanneled_at_um;
  long n_vib_kinks = 0;
  long n_e_kinks = 0;
};

struct TransportConfig {
  double depth_um = 10.0;
  double record_every_nm = 100.0;
  double dz_continuum_nm = 0.0;  // 0 -> auto from oscillation period
  bool correlations_enabled = false;
  double lambda_c_nm = 0.0;
  double u0_ev = 0.0;  // dechanneling threshold; 0 -> continuum table depth
  double rate_scale = 1.0;  // multiplies the SCM collision rates (diagnostics)
};

struct BeamDraw {
  ParticleState state;
};

BeamDraw draw_entry(const BeamConfig& beam, const ContinuumPotential& v_lin,
                    const CrystalModel& crystal, RandomStream& rng);

// SCM: continuum transport interrupted by per-site-crossing collision rolls;
// each accepted roll applies a sampled transverse kick and is logged.
std::pair<TrajectoryRecord, KinkLog> run_scm_trajectory(const BeamDraw& draw,
                                                        const TransportConfig& config,
                                                        const ContinuumPotential& v_lin,
                                                        const CollisionKernel& kernel,
                                                        RandomStream& rng);

// CM: integrates through freshly generated snapshots, one per lattice
// period traversed.
TrajectoryRecord run_cm_trajectory(const BeamDraw& draw, const TransportConfig& config,
                                   const ContinuumPotential& v_lin, const CrystalModel& crystal,
                                   const ScreeningModel& screening, const FormFactorModel& ff,
                                   RandomStream& rng, const CmStepOptions& step_opt = {});

std::optional<double> detect_dechanneling(const TrajectoryRecord& record, double u0_ev);

struct DechannelingFit {
  double length_um = 0.0;
  double length_err_um = 0.0;
  bool decay_observed = false;
};

struct SimulationResult {
  std::vector<double> depth_um;
  std::vector<double> channeled_fraction;
  std::vector<double> fraction_stderr;
  DechannelingFit fit;
  long n_trajectories = 0;
  long n_dechanneled = 0;
  long n_vib_kinks = 0;
  long n_e_kinks = 0;
  double wall_seconds = 0.0;
};

// Weighted exponential fit of the survival tail; window defaults to the
// second half of the depth range.
DechannelingFit estimate_dechanneling_length(const std::vector<double>& depth_um,
                                             const std::vector<double>& fraction,
                                             const std::vector<double>& fraction_err,
                                             double window_start_fraction = 0.5);

enum class TransportModel { cm, scm };

struct EnsembleConfig {
  TransportModel model = TransportModel::scm;
  long n_trajectories = 500;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 -> hardware concurrency
  TransportConfig transport;
  BeamConfig beam;
  int depth_bins = 100;
};

// Trajectories run concurrently with per-index random streams and merge in
// index order, so output is independent of scheduling.
SimulationResult run_ensemble(const EnsembleConfig& config, const ContinuumPotential& v_lin,
                              const CrystalModel& crystal, const ScreeningModel& screening,
                              const FormFactorModel& ff, const CollisionKernel& kernel,
                              std::vector<KinkLog>* kink_logs = nullptr);

}  // namespace thornsim
