#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "thornsim/transport.hpp"

namespace thornsim {

inline constexpr const char* kToolVersion = "thornsim 0.1.0";

struct RunConfig {
  CrystalModel crystal;
  std::string preset = "Si";
  BeamConfig beam;
  std::string model = "scm";  // cm | scm | both
  long n_trajectories = 500;
  double depth_um = 10.0;
  std::uint64_t seed = 1;
  int threads = 0;
  bool correlations_enabled = false;
  double lambda_c_nm = 5.431;
  std::string output_dir = "out";

  void validate() const;
  nlohmann::json resolved() const;  // fully-populated, canonical
  std::string config_hash() const;  // FNV-1a of the canonical dump
};

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_json(const nlohmann::json& j);

// CSV/JSONL writers; every file carries the resolved config hash and tool
// version as a comment header.
void write_survival_csv(const std::filesystem::path& path, const SimulationResult& result,
                        const RunConfig& config);
void write_events_jsonl(const std::filesystem::path& path, const std::vector<KinkLog>& logs,
                        const RunConfig& config);
void write_xsection_csv(const std::filesystem::path& path, const DifferentialXS& quantum,
                        const DifferentialXS& classical, const RunConfig& config);
void write_fig2_csv(const std::filesystem::path& path, const DifferentialXS& quantum,
                    const DifferentialXS& classical, const PhenomenologicalThorn& thorn,
                    const RunConfig& config);
void write_profile_csv(const std::filesystem::path& path, const ProjectedProfile& profile,
                       const RunConfig& config, const std::string& label);

}  // namespace thornsim
