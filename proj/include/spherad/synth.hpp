#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spherad/graph.hpp"
#include "spherad/rng.hpp"

namespace spherad {

// Stochastic block model with two mirrored hemispheres. Nodes 0..n/2-1 form
// the left hemisphere; node i + n/2 is the mirror partner of node i and
// belongs to the same block. Block membership is drawn fresh per graph.
struct ConnectomeSpec {
  int n = 20;            // even, divisible by 2 * blocks
  int blocks = 2;
  double p_in = 0.8;     // intra-block edge probability
  double p_out = 0.05;   // inter-block edge probability
  double weight_location = 0.0;  // log-normal parameters for edge weights
  double weight_scale = 0.5;
  double mirror = 0.5;   // rho: blend of mirrored left half into the right
};

void validate_spec(const ConnectomeSpec& spec);

enum class AnomalyKind { kEdgeDeletion, kWeightDampening, kBlockRewire };
AnomalyKind anomaly_kind_from_string(const std::string& s);
std::string to_string(AnomalyKind k);

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kWeightDampening;
  int target_block = 0;
  double severity = 0.8;  // in (0, 1]
  std::uint64_t seed = 0;
};

struct LabeledGraph {
  Graph graph;
  std::set<std::pair<int, int>> edge_labels;  // perturbed pairs, i < j
  std::vector<int> node_labels;               // 1 = incident to a labeled edge
  std::string id;
  std::vector<int> block_of;  // block index per node
};

struct GeneratedConnectome {
  Graph graph;
  std::vector<int> block_of;
};

GeneratedConnectome generate_connectome(const ConnectomeSpec& spec,
                                        std::uint64_t seed);

// Applies the anomaly inside the target block and records exact labels.
// p_in and the weight distribution are needed by the rewire kind.
LabeledGraph inject_anomaly(const GeneratedConnectome& g,
                            const ConnectomeSpec& spec, const AnomalySpec& a);

struct DatasetCounts {
  int train = 0;
  int test = 0;
};

// target_block < 0 selects a seeded per-graph block.
struct AnomalyTemplate {
  AnomalyKind kind = AnomalyKind::kWeightDampening;
  double severity = 0.8;
  int target_block = -1;
};

struct DatasetManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  bool anomalous = false;
  std::uint64_t anomaly_seed = 0;
  int target_block = -1;
};

struct DatasetBundle {
  ConnectomeSpec spec;
  DatasetCounts counts;
  double anomaly_fraction = 0.0;
  AnomalyTemplate anomaly;
  std::uint64_t seed = 0;
  std::vector<Graph> train;
  std::vector<LabeledGraph> test;  // first round(fraction * test) are anomalous
  std::vector<DatasetManifestEntry> train_entries;
  std::vector<DatasetManifestEntry> test_entries;
};

// Pure function of its arguments; per-graph seeds are derived from `seed` by
// disjoint streams and recorded in the manifest entries.
DatasetBundle generate_dataset(const ConnectomeSpec& spec, DatasetCounts counts,
                               double anomaly_fraction,
                               const AnomalyTemplate& anomaly,
                               std::uint64_t seed);

// Writes adjacency CSVs, label files, and manifest.json into `dir`.
void write_dataset(const DatasetBundle& bundle, const std::string& dir);

// Reads a dataset back from its manifest (adjacency and label files).
DatasetBundle load_dataset(const std::string& manifest_path);

// Re-runs generation from the parameters stored in a manifest.
DatasetBundle regenerate_dataset(const std::string& manifest_path);

}  // namespace spherad
