#ifndef KBLAB_LABCLI_HPP
#define KBLAB_LABCLI_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kblab/model.hpp"
#include "kblab/regmaps.hpp"
#include "kblab/riccati.hpp"
#include "kblab/suites.hpp"

namespace kblab {
namespace labcli {

inline constexpr const char* kVersion = "0.1.0";

/// Parsed experiment description. The model and map sections are optional;
/// seeds must be explicit (no wall-clock defaults).
struct RunConfig {
  std::optional<FilterModel> model;
  std::optional<regmaps::RegMap> map;
  double t_end = 2.0;
  double step = 1e-3;
  double v = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> ensemble_sizes;
  int replicates = 10;
  std::vector<std::string> suites;
  std::string out_dir = "out";
};

/// Load and validate a JSON config file. Environment variables with the
/// KBLAB_ prefix override config paths (KBLAB_RUN_STEP -> run.step).
RunConfig load_config(const std::string& path);

/// Apply prefix-namespaced overrides to a raw config document. Exposed
/// separately so the override logic is testable without the process
/// environment. Keys look like KBLAB_RUN_STEP; values are parsed as JSON
/// literals with a string fallback.
void apply_overrides(nlohmann::json& config,
                     const std::map<std::string, std::string>& env);

/// Build a regularization map from its config section (key "kind" plus
/// variant-specific keys); matrix files are resolved against base_dir.
regmaps::RegMap map_from_json(const nlohmann::json& section,
                              const std::string& base_dir, Eigen::Index dim);

nlohmann::json report_to_json(const SuiteReport& report);

/// Execute the configured experiment: optional trajectory exports, then the
/// selected suites with their artifacts and reports under out_dir. Returns
/// true iff every selected suite passed. Writes a stamp file always.
bool run(const RunConfig& config);

/// Run a single suite deterministically for the given seed.
SuiteReport verify(const std::string& suite_name, std::uint64_t seed,
                   const std::string& artifact_dir = "");

/// Convert raw artifacts (decay curves, mean-field sweeps) into tidy
/// long-format tables ready for external plotting.
void emit_plot_data(const std::string& in_dir, const std::string& out_dir);

void write_trajectory_csv(const std::string& path,
                          const riccati::FlowTrajectory& traj);

}  // namespace labcli
}  // namespace kblab

#endif  // KBLAB_LABCLI_HPP
