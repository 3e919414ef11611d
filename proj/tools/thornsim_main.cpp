#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thornsim/io.hpp"

namespace fs = std::filesystem;
using namespace thornsim;

namespace {

int resolve_threads(int threads_flag) {
  if (threads_flag > 0) return threads_flag;
  if (const char* env = std::getenv("THORNSIM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 0;  // transport picks hardware concurrency
}

PhenomenologicalThorn case_thorn(const std::string& dech_case, const CrystalModel& crystal) {
  PhenomenologicalThorn t;
  if (dech_case == "electron") {
    t.z_eff = 1;
    t.r_max_nm = crystal.a_tf_nm;
  } else if (dech_case == "atom") {
    t.z_eff = crystal.Z;
    t.r_max_nm = crystal.u1_nm;
  } else {
    throw std::invalid_argument("case must be electron or atom");
  }
  t.r_min_nm = crystal.r_n_nm;
  t.validate();
  return t;
}

void write_resolved_config(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream f(dir / "config_resolved.json");
  f << config.resolved().dump(2) << '\n';
}

SimulationResult run_model(const RunConfig& config, TransportModel model,
                           const ContinuumPotential& v_lin, const CrystalModel& crystal,
                           const ScreeningModel& screening, const FormFactorModel& ff,
                           const CollisionKernel& kernel, std::vector<KinkLog>* logs) {
  EnsembleConfig ec;
  ec.model = model;
  ec.n_trajectories = config.n_trajectories;
  ec.seed = config.seed;
  ec.threads = resolve_threads(config.threads);
  ec.beam = config.beam;
  ec.transport.depth_um = config.depth_um;
  ec.transport.correlations_enabled = config.correlations_enabled;
  ec.transport.lambda_c_nm = config.lambda_c_nm;
  return run_ensemble(ec, v_lin, crystal, screening, ff, kernel, logs);
}

void print_result(const char* tag, const SimulationResult& r) {
  std::cout << tag << ": " << r.n_dechanneled << "/" << r.n_trajectories
            << " dechanneled, final fraction " << r.channeled_fraction.back();
  if (r.fit.decay_observed)
    std::cout << ", L_d = " << r.fit.length_um << " +- " << r.fit.length_err_um << " um";
  else
    std::cout << ", no decay observed";
  std::cout << " (" << r.wall_seconds << " s, " << r.n_vib_kinks << " vib / " << r.n_e_kinks
            << " e kinks)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) + ": channeling incoherent-scattering toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed_flag = 0;
  int threads_flag = -1;
  app.add_option("--config", config_path, "JSON configuration file")->expected(1);
  auto* seed_opt = app.add_option("--seed", seed_flag, "master random seed");
  auto* threads_opt = app.add_option("--threads", threads_flag, "worker thread count");

  std::string dech_case = "electron";
  double qc_mev = 1.0;
  std::string model_flag;
  long n_flag = -1;
  double depth_flag = -1.0;
  std::string out_flag;

  auto* cmd_xsection = app.add_subcommand("xsection", "differential cross-section tables");
  cmd_xsection->add_option("--case", dech_case, "electron | atom");
  auto* cmd_sumrules = app.add_subcommand("sumrules", "first and second moment checks");
  cmd_sumrules->add_option("--case", dech_case, "electron | atom");
  auto* cmd_dech = app.add_subcommand("dech-ratio", "dechanneling cross-section ratio");
  cmd_dech->add_option("--case", dech_case, "electron | atom");
  cmd_dech->add_option("--qc", qc_mev, "critical momentum transfer, MeV");
  auto* cmd_sim = app.add_subcommand("simulate", "run one transport ensemble");
  cmd_sim->add_option("--model", model_flag, "cm | scm");
  cmd_sim->add_option("--n", n_flag, "trajectory count");
  cmd_sim->add_option("--depth", depth_flag, "crystal depth, um");
  cmd_sim->add_option("--out", out_flag, "output directory");
  auto* cmd_compare = app.add_subcommand("compare", "run both models on shared seeds");
  cmd_compare->add_option("--n", n_flag, "trajectory count");
  cmd_compare->add_option("--depth", depth_flag, "crystal depth, um");
  cmd_compare->add_option("--out", out_flag, "output directory");
  auto* cmd_profile = app.add_subcommand("profile", "projected potential profiles");
  cmd_profile->add_option("--out", out_flag, "output directory");
  auto* cmd_fig2 = app.add_subcommand("fig2", "q^4-weighted quantum vs classical tables");
  cmd_fig2->add_option("--case", dech_case, "electron | atom");
  cmd_fig2->add_option("--out", out_flag, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config;
    if (!config_path.empty()) {
      config = parse_config(config_path);
    } else {
      config.crystal = CrystalModel::silicon_110();
      config.validate();
    }
    if (seed_opt->count()) config.seed = seed_flag;
    if (threads_opt->count()) config.threads = threads_flag;
    if (!model_flag.empty()) config.model = model_flag;
    if (n_flag >= 0) config.n_trajectories = n_flag;
    if (depth_flag > 0.0) config.depth_um = depth_flag;
    if (!out_flag.empty()) config.output_dir = out_flag;
    config.validate();

    const CrystalModel& crystal = config.crystal;
    const ScreeningModel screening = ScreeningModel::moliere(crystal.a_tf_nm, crystal.r_n_nm);
    const FormFactorModel ff = FormFactorModel::silicon();
    const fs::path out_dir = config.output_dir;

    if (cmd_xsection->parsed() || cmd_fig2->parsed()) {
      const PhenomenologicalThorn thorn = case_thorn(dech_case, crystal);
      auto grid = DifferentialXS::make_grid(1e-3, 2.0 * classical_kick_maximum(thorn).q_mev, 96,
                                            32);
      const DifferentialXS quantum = quantum_dsigma_phenomenological(thorn, grid);
      const DifferentialXS classical = classical_dsigma(thorn, grid);
      write_resolved_config(config, out_dir);
      if (cmd_xsection->parsed()) {
        write_xsection_csv(out_dir / "xsection.csv", quantum, classical, config);
        std::cout << "sigma_quantum = " << quantum.total_nm2 << " nm^2, sigma_classical = "
                  << classical.total_nm2 << " nm^2 -> " << (out_dir / "xsection.csv").string()
                  << "\n";
      } else {
        write_fig2_csv(out_dir / "fig2.csv", quantum, classical, thorn, config);
        std::cout << "rainbow at q = " << classical_kick_maximum(thorn).q_mev << " MeV -> "
                  << (out_dir / "fig2.csv").string() << "\n";
      }
    } else if (cmd_sumrules->parsed()) {
      const PhenomenologicalThorn thorn = case_thorn(dech_case, crystal);
      const SumRuleReport rep = sum_rule_second_moment(thorn);
      std::cout << "second moment quantum   " << rep.second_moment_quantum_mev2_nm2
                << " MeV^2 nm^2\n"
                << "second moment classical " << rep.second_moment_classical_mev2_nm2
                << " MeV^2 nm^2\n"
                << "ratio " << rep.ratio() << (rep.converged ? "" : "  (quadrature not converged)")
                << "\n";
    } else if (cmd_dech->parsed()) {
      const DechRatioReport rep =
          dech_ratio(dech_case == "electron" ? DechCase::electron : DechCase::atom, crystal,
                     config.beam.energy_mev, qc_mev);
      std::cout << "case " << dech_case << ", q_c = " << qc_mev << " MeV\n"
                << "quantum:   numeric " << rep.quantum.sigma_numeric_nm2 << " nm^2, closed form "
                << rep.quantum.sigma_closed_form_nm2 << " nm^2 (q_min = " << rep.quantum.q_min_mev
                << " MeV)\n"
                << "classical: numeric " << rep.classical.sigma_numeric_nm2
                << " nm^2, closed form " << rep.classical.sigma_closed_form_nm2
                << " nm^2 (q_min = " << rep.classical.q_min_mev << " MeV)\n"
                << "ratio sigma_cl / sigma_quant = " << rep.ratio << "\n";
    } else if (cmd_profile->parsed()) {
      write_resolved_config(config, out_dir);
      std::vector<double> x;
      for (int i = 0; i <= 400; ++i) x.push_back(-0.06 + 0.12 * i / 400.0);
      auto emit = [&](const char* name, const std::function<double(double)>& radial,
                      const std::string& label) {
        write_profile_csv(out_dir / name, projected_profile(radial, x), config, label);
      };
      emit("profile_atomic.csv",
           [&](double r) { return atomic_potential(r, screening, crystal.Z); },
           "projected static atomic potential");
      emit("profile_smeared.csv",
           [&](double r) { return smeared_atomic_potential(r, screening, crystal.Z, crystal.u1_nm); },
           "projected thermally smeared potential");
      ThornVib vib{&crystal, screening, {crystal.u1_nm, 0.0, 0.0}};
      emit("profile_thorn.csv",
           [&](double r) { return thorn_vib_potential({r, 0.0, 0.0}, vib); },
           "projected residual thorn potential, displacement u1 x");
      std::cout << "profiles -> " << out_dir.string() << "\n";
    } else if (cmd_sim->parsed() || cmd_compare->parsed()) {
      ContinuumBuildOptions copt;
      const ContinuumPotential v_lin = build_continuum(crystal, screening, copt);
      KernelOptions kopt;
      kopt.beam_energy_mev = config.beam.energy_mev;
      kopt.q_ir_electron_mev = mev_from_inv_nm(1.0 / crystal.interplanar_spacing_nm);
      const CollisionKernel kernel(crystal, ff, kopt);
      write_resolved_config(config, out_dir);
      if (cmd_compare->parsed() || config.model == "both") {
        const SimulationResult cm =
            run_model(config, TransportModel::cm, v_lin, crystal, screening, ff, kernel, nullptr);
        std::vector<KinkLog> logs;
        const SimulationResult scm =
            run_model(config, TransportModel::scm, v_lin, crystal, screening, ff, kernel, &logs);
        write_survival_csv(out_dir / "survival_cm.csv", cm, config);
        write_survival_csv(out_dir / "survival_scm.csv", scm, config);
        write_events_jsonl(out_dir / "events.jsonl", logs, config);
        print_result("cm ", cm);
        print_result("scm", scm);
        const bool cm_overestimates =
            cm.channeled_fraction.back() <= scm.channeled_fraction.back();
        std::cout << "cm_dechanneled_fraction_ge_scm: " << (cm_overestimates ? "true" : "false")
                  << "\n";
        if (cm.fit.decay_observed && scm.fit.decay_observed)
          std::cout << "L_d ratio cm/scm = " << cm.fit.length_um / scm.fit.length_um << "\n";
      } else {
        const TransportModel model =
            (config.model == "cm") ? TransportModel::cm : TransportModel::scm;
        std::vector<KinkLog> logs;
        const SimulationResult r =
            run_model(config, model, v_lin, crystal, screening, ff, kernel,
                      model == TransportModel::scm ? &logs : nullptr);
        write_survival_csv(out_dir / "survival.csv", r, config);
        if (model == TransportModel::scm)
          write_events_jsonl(out_dir / "events.jsonl", logs, config);
        print_result(config.model.c_str(), r);
      }
    }
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
