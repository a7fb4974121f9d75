#include "spherad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spherad/error.hpp"
#include "spherad/number.hpp"

namespace spherad {

namespace {

using nlohmann::json;

// Disjoint seed streams for the pieces of a dataset.
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kAnomalyStream = 3;
constexpr std::uint64_t kBlockPickSalt = 99;

double draw_weight(const ConnectomeSpec& spec, Rng& rng) {
  return std::exp(spec.weight_location + spec.weight_scale * rng.normal());
}

// Presence then weight; absent edges consume no normal draw.
double draw_edge(const ConnectomeSpec& spec, double p, Rng& rng) {
  if (rng.uniform() < p) return draw_weight(spec, rng);
  return 0.0;
}

std::string graph_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", prefix, index);
  return buf;
}

std::vector<std::pair<int, int>> block_pairs(const std::vector<int>& block_of,
                                             int target) {
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(block_of.size());
  for (int i = 0; i < n; ++i) {
    if (block_of[i] != target) continue;
    for (int j = i + 1; j < n; ++j) {
      if (block_of[j] == target) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

}  // namespace

void validate_spec(const ConnectomeSpec& spec) {
  if (spec.blocks < 1) throw ConfigError("block count must be at least 1");
  if (spec.n < 2) throw ConfigError("connectome needs at least 2 nodes");
  if (spec.n % (2 * spec.blocks) != 0) {
    throw ConfigError("node count " + std::to_string(spec.n) +
                      " is not divisible by 2 * blocks = " +
                      std::to_string(2 * spec.blocks));
  }
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ConfigError("edge probabilities must satisfy 0 <= p_out < p_in <= 1");
  }
  if (!(spec.weight_scale >= 0.0) || !std::isfinite(spec.weight_scale) ||
      !std::isfinite(spec.weight_location)) {
    throw ConfigError("weight distribution parameters must be finite, scale >= 0");
  }
  if (!(spec.mirror >= 0.0 && spec.mirror <= 1.0)) {
    throw ConfigError("mirror strength must lie in [0, 1]");
  }
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
  if (s == "edge-deletion") return AnomalyKind::kEdgeDeletion;
  if (s == "weight-dampening") return AnomalyKind::kWeightDampening;
  if (s == "block-rewire") return AnomalyKind::kBlockRewire;
  throw ConfigError("unknown anomaly kind '" + s + "'");
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::kEdgeDeletion: return "edge-deletion";
    case AnomalyKind::kWeightDampening: return "weight-dampening";
    case AnomalyKind::kBlockRewire: return "block-rewire";
  }
  throw ConfigError("invalid anomaly kind value");
}

GeneratedConnectome generate_connectome(const ConnectomeSpec& spec,
                                        std::uint64_t seed) {
  validate_spec(spec);
  const int n = spec.n;
  const int half = n / 2;
  const int per_block = half / spec.blocks;
  Rng rng(seed);

  // Block labels are drawn fresh per graph and mirrored across hemispheres:
  // node i + half is the mirror partner of node i and shares its block.
  std::vector<int> base(half);
  for (int b = 0; b < spec.blocks; ++b) {
    for (int k = 0; k < per_block; ++k) base[b * per_block + k] = b;
  }
  const std::vector<int> perm = random_permutation(half, rng);
  std::vector<int> block_of(n);
  for (int i = 0; i < half; ++i) {
    block_of[i] = base[perm[i]];
    block_of[i + half] = base[perm[i]];
  }

  auto pair_prob = [&](int i, int j) {
    return block_of[i] == block_of[j] ? spec.p_in : spec.p_out;
  };

  Tensor w(n, n);

  // Left hemisphere pairs.
  for (int i = 0; i < half; ++i) {
    for (int j = i + 1; j < half; ++j) {
      const double v = draw_edge(spec, pair_prob(i, j), rng);
      w.at(i, j) = v;
      w.at(j, i) = v;
    }
  }
  // Independent draw for the right hemisphere, then blend with the mirrored
  // left pattern: right = rho * mirror(left) + (1 - rho) * independent.
  for (int i = 0; i < half; ++i) {
    for (int j = i + 1; j < half; ++j) {
      const int ri = i + half;
      const int rj = j + half;
      const double indep = draw_edge(spec, pair_prob(ri, rj), rng);
      const double v = spec.mirror * w.at(i, j) + (1.0 - spec.mirror) * indep;
      w.at(ri, rj) = v;
      w.at(rj, ri) = v;
    }
  }
  // Cross-hemisphere pairs, drawn independently.
  for (int i = 0; i < half; ++i) {
    for (int j = half; j < n; ++j) {
      const double v = draw_edge(spec, pair_prob(i, j), rng);
      w.at(i, j) = v;
      w.at(j, i) = v;
    }
  }

  GeneratedConnectome out;
  out.graph = make_graph(std::move(w));
  out.block_of = std::move(block_of);
  return out;
}

LabeledGraph inject_anomaly(const GeneratedConnectome& g,
                            const ConnectomeSpec& spec, const AnomalySpec& a) {
  if (!(a.severity > 0.0 && a.severity <= 1.0)) {
    throw ConfigError("anomaly severity must lie in (0, 1]");
  }
  if (a.target_block < 0 || a.target_block >= spec.blocks) {
    throw ConfigError("target block " + std::to_string(a.target_block) +
                      " out of range for " + std::to_string(spec.blocks) +
                      " blocks");
  }
  const auto pairs = block_pairs(g.block_of, a.target_block);
  if (pairs.empty()) {
    throw DataError("target block " + std::to_string(a.target_block) +
                    " is empty");
  }

  Tensor w = g.graph.w;
  std::set<std::pair<int, int>> labels;

  std::vector<std::pair<int, int>> edges;
  for (const auto& [i, j] : pairs) {
    if (w.at(i, j) > 0.0) edges.emplace_back(i, j);
  }

  switch (a.kind) {
    case AnomalyKind::kEdgeDeletion: {
      if (edges.empty()) {
        throw DataError("target block has no edges to delete");
      }
      const int m = static_cast<int>(edges.size());
      const int remove = static_cast<int>(std::ceil(a.severity * m));
      Rng rng(a.seed);
      const std::vector<int> order = random_permutation(m, rng);
      for (int k = 0; k < remove; ++k) {
        const auto [i, j] = edges[order[k]];
        w.at(i, j) = 0.0;
        w.at(j, i) = 0.0;
        labels.insert({i, j});
      }
      break;
    }
    case AnomalyKind::kWeightDampening: {
      if (edges.empty()) {
        throw DataError("target block has no edges to dampen");
      }
      const double keep = 1.0 - a.severity;
      for (const auto& [i, j] : edges) {
        const double v = w.at(i, j) * keep;
        w.at(i, j) = v;
        w.at(j, i) = v;
        labels.insert({i, j});
      }
      break;
    }
    case AnomalyKind::kBlockRewire: {
      Rng rng(a.seed);
      for (const auto& [i, j] : pairs) {
        const double v = draw_edge(spec, spec.p_in, rng);
        if (v != w.at(i, j)) labels.insert({i, j});
        w.at(i, j) = v;
        w.at(j, i) = v;
      }
      break;
    }
  }

  LabeledGraph out;
  out.graph = make_graph(std::move(w));
  out.edge_labels = std::move(labels);
  out.node_labels.assign(g.graph.n, 0);
  for (const auto& [i, j] : out.edge_labels) {
    out.node_labels[i] = 1;
    out.node_labels[j] = 1;
  }
  out.block_of = g.block_of;
  return out;
}

DatasetBundle generate_dataset(const ConnectomeSpec& spec, DatasetCounts counts,
                               double anomaly_fraction,
                               const AnomalyTemplate& anomaly,
                               std::uint64_t seed) {
  validate_spec(spec);
  if (counts.train < 0 || counts.test < 0 || counts.train + counts.test == 0) {
    throw ConfigError("dataset needs a positive number of graphs");
  }
  if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 1.0)) {
    throw ConfigError("anomaly fraction must lie in [0, 1]");
  }
  if (!(anomaly.severity > 0.0 && anomaly.severity <= 1.0)) {
    throw ConfigError("anomaly severity must lie in (0, 1]");
  }
  if (anomaly.target_block >= spec.blocks) {
    throw ConfigError("anomaly target block out of range");
  }

  DatasetBundle bundle;
  bundle.spec = spec;
  bundle.counts = counts;
  bundle.anomaly_fraction = anomaly_fraction;
  bundle.anomaly = anomaly;
  bundle.seed = seed;

  const std::uint64_t train_base = mix_seed(seed, kTrainStream);
  const std::uint64_t test_base = mix_seed(seed, kTestStream);
  const std::uint64_t anomaly_base = mix_seed(seed, kAnomalyStream);

  for (int t = 0; t < counts.train; ++t) {
    DatasetManifestEntry entry;
    entry.id = graph_id("train", t);
    entry.seed = mix_seed(train_base, static_cast<std::uint64_t>(t));
    bundle.train.push_back(generate_connectome(spec, entry.seed).graph);
    bundle.train_entries.push_back(entry);
  }

  const int n_anomalous =
      static_cast<int>(std::llround(anomaly_fraction * counts.test));
  for (int t = 0; t < counts.test; ++t) {
    DatasetManifestEntry entry;
    entry.id = graph_id("test", t);
    entry.seed = mix_seed(test_base, static_cast<std::uint64_t>(t));
    const GeneratedConnectome g = generate_connectome(spec, entry.seed);

    LabeledGraph labeled;
    if (t < n_anomalous) {
      entry.anomalous = true;
      entry.anomaly_seed = mix_seed(anomaly_base, static_cast<std::uint64_t>(t));
      AnomalySpec a;
      a.kind = anomaly.kind;
      a.severity = anomaly.severity;
      a.seed = entry.anomaly_seed;
      a.target_block =
          anomaly.target_block >= 0
              ? anomaly.target_block
              : static_cast<int>(mix_seed(entry.anomaly_seed, kBlockPickSalt) %
                                 static_cast<std::uint64_t>(spec.blocks));
      entry.target_block = a.target_block;
      labeled = inject_anomaly(g, spec, a);
    } else {
      labeled.graph = g.graph;
      labeled.node_labels.assign(g.graph.n, 0);
      labeled.block_of = g.block_of;
    }
    labeled.id = entry.id;
    bundle.test.push_back(std::move(labeled));
    bundle.test_entries.push_back(entry);
  }
  return bundle;
}

namespace {

json spec_to_json(const ConnectomeSpec& spec) {
  return json{{"n", spec.n},
              {"blocks", spec.blocks},
              {"p_in", spec.p_in},
              {"p_out", spec.p_out},
              {"weight_location", spec.weight_location},
              {"weight_scale", spec.weight_scale},
              {"mirror", spec.mirror}};
}

ConnectomeSpec spec_from_json(const json& j) {
  ConnectomeSpec spec;
  spec.n = j.at("n").get<int>();
  spec.blocks = j.at("blocks").get<int>();
  spec.p_in = j.at("p_in").get<double>();
  spec.p_out = j.at("p_out").get<double>();
  spec.weight_location = j.at("weight_location").get<double>();
  spec.weight_scale = j.at("weight_scale").get<double>();
  spec.mirror = j.at("mirror").get<double>();
  return spec;
}

void write_edge_labels(const std::set<std::pair<int, int>>& labels,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "i,j\n";
  for (const auto& [i, j] : labels) out << i << "," << j << "\n";
}

std::set<std::pair<int, int>> read_edge_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::set<std::pair<int, int>> labels;
  std::string line;
  if (!std::getline(in, line) || line != "i,j") {
    throw DataError("bad edge label header in " + path);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("bad edge label line '" + line + "' in " + path);
    }
    const int i = static_cast<int>(parse_long(line.substr(0, comma), path));
    const int j = static_cast<int>(parse_long(line.substr(comma + 1), path));
    labels.insert({i, j});
  }
  return labels;
}

void write_node_labels(const std::vector<int>& labels,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (int v : labels) out << v << "\n";
}

std::vector<int> read_node_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    labels.push_back(static_cast<int>(parse_long(line, path)));
  }
  return labels;
}

json load_manifest_json(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot read manifest " + manifest_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path + " is not valid JSON: " +
                    e.what());
  }
  if (!j.is_object() || j.value("format", "") != "spherad-dataset") {
    throw DataError("manifest " + manifest_path +
                    " does not describe a dataset");
  }
  return j;
}

AnomalyTemplate anomaly_from_json(const json& j) {
  AnomalyTemplate t;
  t.kind = anomaly_kind_from_string(j.at("kind").get<std::string>());
  t.severity = j.at("severity").get<double>();
  t.target_block = j.at("target_block").get<int>();
  return t;
}

}  // namespace

void write_dataset(const DatasetBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "train", ec);
  fs::create_directories(fs::path(dir) / "test", ec);
  if (ec) throw DataError("cannot create dataset directory " + dir);

  json manifest;
  manifest["format"] = "spherad-dataset";
  manifest["version"] = 1;
  manifest["spec"] = spec_to_json(bundle.spec);
  manifest["counts"] = {{"train", bundle.counts.train},
                        {"test", bundle.counts.test}};
  manifest["anomaly_fraction"] = bundle.anomaly_fraction;
  manifest["anomaly"] = {{"kind", to_string(bundle.anomaly.kind)},
                         {"severity", bundle.anomaly.severity},
                         {"target_block", bundle.anomaly.target_block}};
  manifest["seed"] = bundle.seed;

  json train_list = json::array();
  for (std::size_t k = 0; k < bundle.train.size(); ++k) {
    const auto& entry = bundle.train_entries[k];
    const std::string rel = "train/" + entry.id + ".csv";
    save_graph(bundle.train[k], (fs::path(dir) / rel).string());
    train_list.push_back(
        {{"id", entry.id}, {"seed", entry.seed}, {"path", rel}});
  }
  manifest["train"] = std::move(train_list);

  json test_list = json::array();
  for (std::size_t k = 0; k < bundle.test.size(); ++k) {
    const auto& entry = bundle.test_entries[k];
    const auto& labeled = bundle.test[k];
    const std::string rel = "test/" + entry.id + ".csv";
    const std::string edges_rel = "test/" + entry.id + ".edges.csv";
    const std::string nodes_rel = "test/" + entry.id + ".nodes.csv";
    save_graph(labeled.graph, (fs::path(dir) / rel).string());
    write_edge_labels(labeled.edge_labels, (fs::path(dir) / edges_rel).string());
    write_node_labels(labeled.node_labels, (fs::path(dir) / nodes_rel).string());
    test_list.push_back({{"id", entry.id},
                         {"seed", entry.seed},
                         {"anomalous", entry.anomalous},
                         {"anomaly_seed", entry.anomaly_seed},
                         {"target_block", entry.target_block},
                         {"path", rel},
                         {"edge_labels_path", edges_rel},
                         {"node_labels_path", nodes_rel}});
  }
  manifest["test"] = std::move(test_list);

  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw DataError("cannot write " + manifest_path);
  out << manifest.dump(2) << "\n";
}

DatasetBundle load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const json j = load_manifest_json(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();

  DatasetBundle bundle;
  try {
    bundle.spec = spec_from_json(j.at("spec"));
    bundle.counts.train = j.at("counts").at("train").get<int>();
    bundle.counts.test = j.at("counts").at("test").get<int>();
    bundle.anomaly_fraction = j.at("anomaly_fraction").get<double>();
    bundle.anomaly = anomaly_from_json(j.at("anomaly"));
    bundle.seed = j.at("seed").get<std::uint64_t>();

    for (const auto& item : j.at("train")) {
      DatasetManifestEntry entry;
      entry.id = item.at("id").get<std::string>();
      entry.seed = item.at("seed").get<std::uint64_t>();
      bundle.train.push_back(
          load_graph((root / item.at("path").get<std::string>()).string()));
      bundle.train_entries.push_back(entry);
    }
    for (const auto& item : j.at("test")) {
      DatasetManifestEntry entry;
      entry.id = item.at("id").get<std::string>();
      entry.seed = item.at("seed").get<std::uint64_t>();
      entry.anomalous = item.at("anomalous").get<bool>();
      entry.anomaly_seed = item.at("anomaly_seed").get<std::uint64_t>();
      entry.target_block = item.at("target_block").get<int>();

      LabeledGraph labeled;
      labeled.graph =
          load_graph((root / item.at("path").get<std::string>()).string());
      labeled.edge_labels = read_edge_labels(
          (root / item.at("edge_labels_path").get<std::string>()).string());
      labeled.node_labels = read_node_labels(
          (root / item.at("node_labels_path").get<std::string>()).string());
      labeled.id = entry.id;
      if (static_cast<int>(labeled.node_labels.size()) != labeled.graph.n) {
        throw DataError("node label count mismatch for " + entry.id);
      }
      bundle.test.push_back(std::move(labeled));
      bundle.test_entries.push_back(entry);
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path + " is malformed: " + e.what());
  }
  return bundle;
}

DatasetBundle regenerate_dataset(const std::string& manifest_path) {
  const json j = load_manifest_json(manifest_path);
  try {
    const ConnectomeSpec spec = spec_from_json(j.at("spec"));
    DatasetCounts counts;
    counts.train = j.at("counts").at("train").get<int>();
    counts.test = j.at("counts").at("test").get<int>();
    const double fraction = j.at("anomaly_fraction").get<double>();
    const AnomalyTemplate anomaly = anomaly_from_json(j.at("anomaly"));
    const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
    return generate_dataset(spec, counts, fraction, anomaly, seed);
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path + " is malformed: " + e.what());
  }
}

}  // namespace spherad
