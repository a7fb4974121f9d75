#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherad/matching.hpp"
#include "spherad/synth.hpp"
#include "spherad/trainer.hpp"

namespace spherad {

// Every knob of the pipeline in one struct. Serialized as a flat JSON object
// whose keys match the CLI flag names one to one; unknown keys are rejected.
struct RunConfig {
  ConnectomeSpec connectome;
  DatasetCounts counts{200, 20};
  double anomaly_fraction = 0.5;
  AnomalyTemplate anomaly;
  std::uint64_t data_seed = 7;

  TrainConfig train;

  MatchConfig match;
  int k = 1;  // completion candidates to keep

  double mask_fraction = 0.2;
  std::uint64_t eval_seed = 1;

  std::string data_dir;
  std::string out_dir;
  std::string checkpoint_path;
  std::string graph_path;
  std::string mask_path;
};

enum class ConfigKind { kInt, kDouble, kBool, kString, kSeed };

struct ConfigKey {
  std::string name;
  ConfigKind kind;
};

// All recognized keys in serialization order.
const std::vector<ConfigKey>& config_keys();

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& context);
RunConfig load_run_config(const std::string& path);

// Resolved config: every key explicit, sorted, 2-space indent. Loading the
// emitted text reproduces the struct exactly.
std::string run_config_json(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& path);

// Applies one `key=value` override with the key's declared type.
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

}  // namespace spherad
