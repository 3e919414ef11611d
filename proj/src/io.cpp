#include "thornsim/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace thornsim {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& block) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw std::invalid_argument("config: unknown key \"" + key + "\" in " + block);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

void write_header(std::ofstream& f, const RunConfig& config) {
  f << "# " << kToolVersion << "\n# config " << config.config_hash() << "\n";
}

double azimuth_avg(const DifferentialXS& xs, int iq) {
  double s = 0.0;
  for (int j = 0; j < xs.n_phi; ++j) s += xs.at(iq, j);
  return s / xs.n_phi;
}

}  // namespace

void RunConfig::validate() const {
  crystal.validate();
  beam.validate();
  if (model != "cm" && model != "scm" && model != "both")
    throw std::invalid_argument("config: model must be cm, scm or both");
  if (n_trajectories < 1) throw std::invalid_argument("config: n_trajectories must be >= 1");
  if (!(depth_um > 0.0)) throw std::invalid_argument("config: depth_um must be > 0");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
  if (correlations_enabled && !(lambda_c_nm >= crystal.lattice_constant_nm))
    throw std::invalid_argument(
        "config: correlation wavelength must be at least the lattice constant");
}

json RunConfig::resolved() const {
  json j;
  j["preset"] = preset;
  j["crystal"] = {{"Z", crystal.Z},
                  {"lattice_constant_nm", crystal.lattice_constant_nm},
                  {"geometry", crystal.geometry == ChannelGeometry::planar ? "planar" : "axial"},
                  {"orientation", crystal.orientation},
                  {"interplanar_spacing_nm", crystal.interplanar_spacing_nm},
                  {"u1_nm", crystal.u1_nm},
                  {"a_tf_nm", crystal.a_tf_nm},
                  {"r_n_nm", crystal.r_n_nm},
                  {"u0_ev", crystal.u0_ev},
                  {"site_density", crystal.site_density}};
  const char* entry = "delta";
  if (beam.entry == EntryDistribution::uniform_over_channel) entry = "uniform";
  if (beam.entry == EntryDistribution::gaussian) entry = "gaussian";
  j["beam"] = {{"particle", beam.particle == ParticleKind::electron ? "electron" : "positron"},
               {"energy_mev", beam.energy_mev},
               {"entry_angle_mrad", beam.entry_angle_mrad},
               {"entry", entry},
               {"entry_sigma_nm", beam.entry_sigma_nm}};
  j["run"] = {{"model", model},
              {"n_trajectories", n_trajectories},
              {"depth_um", depth_um},
              {"seed", seed},
              {"correlations", {{"enabled", correlations_enabled}, {"lambda_c_nm", lambda_c_nm}}}};
  j["output"] = {{"directory", output_dir}};
  return j;
}

std::string RunConfig::config_hash() const {
  const std::string dump = resolved().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

RunConfig parse_config_json(const json& j) {
  RunConfig c;
  c.crystal = CrystalModel::silicon_110();
  reject_unknown(j, {"preset", "E_MeV", "crystal", "beam", "run", "output"}, "top level");
  maybe(j, "preset", c.preset);
  if (c.preset != "Si")
    throw std::invalid_argument("config: unknown preset \"" + c.preset + "\"");
  if (j.contains("E_MeV")) c.beam.energy_mev = j.at("E_MeV").get<double>();
  if (j.contains("crystal")) {
    const json& cj = j.at("crystal");
    reject_unknown(cj,
                   {"preset", "Z", "lattice_constant_nm", "geometry", "orientation",
                    "interplanar_spacing_nm", "u1_nm", "a_tf_nm", "r_n_nm", "u0_ev",
                    "site_density"},
                   "crystal");
    maybe(cj, "Z", c.crystal.Z);
    maybe(cj, "lattice_constant_nm", c.crystal.lattice_constant_nm);
    if (cj.contains("geometry")) {
      const std::string g = cj.at("geometry").get<std::string>();
      if (g == "planar")
        c.crystal.geometry = ChannelGeometry::planar;
      else if (g == "axial")
        c.crystal.geometry = ChannelGeometry::axial;
      else
        throw std::invalid_argument("config: geometry must be planar or axial");
    }
    maybe(cj, "orientation", c.crystal.orientation);
    maybe(cj, "interplanar_spacing_nm", c.crystal.interplanar_spacing_nm);
    maybe(cj, "u1_nm", c.crystal.u1_nm);
    maybe(cj, "a_tf_nm", c.crystal.a_tf_nm);
    maybe(cj, "r_n_nm", c.crystal.r_n_nm);
    maybe(cj, "u0_ev", c.crystal.u0_ev);
    maybe(cj, "site_density", c.crystal.site_density);
  }
  if (j.contains("beam")) {
    const json& bj = j.at("beam");
    reject_unknown(bj, {"particle", "energy_mev", "entry_angle_mrad", "entry", "entry_sigma_nm"},
                   "beam");
    if (bj.contains("particle")) {
      const std::string p = bj.at("particle").get<std::string>();
      if (p == "electron")
        c.beam.particle = ParticleKind::electron;
      else if (p == "positron")
        c.beam.particle = ParticleKind::positron;
      else
        throw std::invalid_argument("config: particle must be electron or positron");
    }
    maybe(bj, "energy_mev", c.beam.energy_mev);
    maybe(bj, "entry_angle_mrad", c.beam.entry_angle_mrad);
    if (bj.contains("entry")) {
      const std::string e = bj.at("entry").get<std::string>();
      if (e == "delta")
        c.beam.entry = EntryDistribution::delta;
      else if (e == "uniform")
        c.beam.entry = EntryDistribution::uniform_over_channel;
      else if (e == "gaussian")
        c.beam.entry = EntryDistribution::gaussian;
      else
        throw std::invalid_argument("config: entry must be delta, uniform or gaussian");
    }
    maybe(bj, "entry_sigma_nm", c.beam.entry_sigma_nm);
  }
  if (j.contains("run")) {
    const json& rj = j.at("run");
    reject_unknown(rj, {"model", "n_trajectories", "depth_um", "seed", "threads", "correlations"},
                   "run");
    maybe(rj, "model", c.model);
    maybe(rj, "n_trajectories", c.n_trajectories);
    maybe(rj, "depth_um", c.depth_um);
    maybe(rj, "seed", c.seed);
    maybe(rj, "threads", c.threads);
    if (rj.contains("correlations")) {
      const json& kj = rj.at("correlations");
      reject_unknown(kj, {"enabled", "lambda_c_nm"}, "run.correlations");
      maybe(kj, "enabled", c.correlations_enabled);
      maybe(kj, "lambda_c_nm", c.lambda_c_nm);
    }
  }
  if (j.contains("output")) {
    const json& oj = j.at("output");
    reject_unknown(oj, {"directory", "formats"}, "output");
    maybe(oj, "directory", c.output_dir);
  }
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot read " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + std::string(e.what()));
  }
  return parse_config_json(j);
}

void write_survival_csv(const std::filesystem::path& path, const SimulationResult& result,
                        const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_header(f, config);
  f << "depth_um,fraction,stderr\n";
  for (std::size_t i = 0; i < result.depth_um.size(); ++i)
    f << fmt(result.depth_um[i]) << ',' << fmt(result.channeled_fraction[i]) << ','
      << fmt(result.fraction_stderr[i]) << '\n';
}

void write_events_jsonl(const std::filesystem::path& path, const std::vector<KinkLog>& logs,
                        const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "{\"tool\":\"" << kToolVersion << "\",\"config\":\"" << config.config_hash() << "\"}\n";
  for (std::size_t traj = 0; traj < logs.size(); ++traj) {
    for (const auto& ev : logs[traj].events) {
      json line = {{"traj", traj},
                   {"z_um", ev.z_um},
                   {"kind", ev.kind == 'v' ? "vib" : "electron"},
                   {"qx_MeV", ev.q_mev.x},
                   {"qy_MeV", ev.q_mev.y},
                   {"eperp_before_eV", ev.eperp_before_ev},
                   {"eperp_after_eV", ev.eperp_after_ev}};
      f << line.dump() << '\n';
    }
  }
}

void write_xsection_csv(const std::filesystem::path& path, const DifferentialXS& quantum,
                        const DifferentialXS& classical, const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_header(f, config);
  f << "q_MeV,dsigma_quant_nm2_per_MeV2,dsigma_class_nm2_per_MeV2\n";
  for (std::size_t i = 0; i < quantum.q_mid_mev.size(); ++i)
    f << fmt(quantum.q_mid_mev[i]) << ',' << fmt(azimuth_avg(quantum, static_cast<int>(i))) << ','
      << fmt(azimuth_avg(classical, static_cast<int>(i))) << '\n';
}

void write_fig2_csv(const std::filesystem::path& path, const DifferentialXS& quantum,
                    const DifferentialXS& classical, const PhenomenologicalThorn& thorn,
                    const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_header(f, config);
  f << "q_MeV,q4_dsigma_quantum,q4_dsigma_classical,rutherford_baseline\n";
  const double hbarc2 = constants::hbarc_mev_nm * constants::hbarc_mev_nm;
  const double zalpha = thorn.z_eff * constants::alpha;
  const double baseline = 4.0 * zalpha * zalpha * hbarc2;  // q^4 * Rutherford
  for (std::size_t i = 0; i < quantum.q_mid_mev.size(); ++i) {
    const double q = quantum.q_mid_mev[i];
    const double q4 = q * q * q * q;
    f << fmt(q) << ',' << fmt(q4 * azimuth_avg(quantum, static_cast<int>(i))) << ','
      << fmt(q4 * azimuth_avg(classical, static_cast<int>(i))) << ',' << fmt(baseline) << '\n';
  }
}

void write_profile_csv(const std::filesystem::path& path, const ProjectedProfile& profile,
                       const RunConfig& config, const std::string& label) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_header(f, config);
  f << "# " << label << "\ncoordinate_nm,value_eV_nm2\n";
  for (std::size_t i = 0; i < profile.x_nm.size(); ++i)
    f << fmt(profile.x_nm[i]) << ',' << fmt(profile.value_ev_nm2[i]) << '\n';
}

}  // namespace thornsim
