#include "spherad/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "spherad/error.hpp"
#include "spherad/number.hpp"

namespace spherad {

namespace {

using nlohmann::json;

struct KeyEntry {
  ConfigKey key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

int get_int(const json& v, const std::string& name) {
  if (!v.is_number_integer()) {
    throw ConfigError("config key '" + name + "' must be an integer");
  }
  return v.get<int>();
}

double get_double(const json& v, const std::string& name) {
  if (!v.is_number()) {
    throw ConfigError("config key '" + name + "' must be a number");
  }
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& name) {
  if (!v.is_boolean()) {
    throw ConfigError("config key '" + name + "' must be true or false");
  }
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& name) {
  if (!v.is_string()) {
    throw ConfigError("config key '" + name + "' must be a string");
  }
  return v.get<std::string>();
}

std::uint64_t get_seed(const json& v, const std::string& name) {
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))) {
    throw ConfigError("config key '" + name + "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

// One table drives JSON reading/writing and CLI flag overrides. `ref` maps a
// RunConfig to the addressed field.
class KeyTable {
 public:
  KeyTable() {
    auto& c = entries_;

    add_int(c, "n", [](RunConfig& r) -> int& { return r.connectome.n; });
    add_int(c, "blocks",
            [](RunConfig& r) -> int& { return r.connectome.blocks; });
    add_double(c, "p_in",
               [](RunConfig& r) -> double& { return r.connectome.p_in; });
    add_double(c, "p_out",
               [](RunConfig& r) -> double& { return r.connectome.p_out; });
    add_double(c, "weight_location", [](RunConfig& r) -> double& {
      return r.connectome.weight_location;
    });
    add_double(c, "weight_scale", [](RunConfig& r) -> double& {
      return r.connectome.weight_scale;
    });
    add_double(c, "mirror",
               [](RunConfig& r) -> double& { return r.connectome.mirror; });
    add_int(c, "train_count",
            [](RunConfig& r) -> int& { return r.counts.train; });
    add_int(c, "test_count",
            [](RunConfig& r) -> int& { return r.counts.test; });
    add_double(c, "anomaly_fraction",
               [](RunConfig& r) -> double& { return r.anomaly_fraction; });
    add_enum(c, "anomaly_kind",
             [](RunConfig& r) -> AnomalyKind& { return r.anomaly.kind; },
             anomaly_kind_from_string,
             [](AnomalyKind k) { return to_string(k); });
    add_double(c, "anomaly_severity",
               [](RunConfig& r) -> double& { return r.anomaly.severity; });
    add_int(c, "anomaly_target_block",
            [](RunConfig& r) -> int& { return r.anomaly.target_block; });
    add_seed(c, "data_seed",
             [](RunConfig& r) -> std::uint64_t& { return r.data_seed; });

    add_int(c, "epochs", [](RunConfig& r) -> int& { return r.train.epochs; });
    add_double(c, "lr_gen",
               [](RunConfig& r) -> double& { return r.train.lr_gen; });
    add_double(c, "lr_disc",
               [](RunConfig& r) -> double& { return r.train.lr_disc; });
    add_double(c, "lambda1",
               [](RunConfig& r) -> double& { return r.train.lambda1; });
    add_double(c, "lambda2",
               [](RunConfig& r) -> double& { return r.train.lambda2; });
    add_int(c, "hidden_dim",
            [](RunConfig& r) -> int& { return r.train.hidden_dim; });
    add_int(c, "latent_dim",
            [](RunConfig& r) -> int& { return r.train.latent_dim; });
    add_double(c, "kappa",
               [](RunConfig& r) -> double& { return r.train.kappa; });
    add_int(c, "disc_filter_dim",
            [](RunConfig& r) -> int& { return r.train.disc_filter_dim; });
    add_int(c, "disc_hidden_dim",
            [](RunConfig& r) -> int& { return r.train.disc_hidden_dim; });
    add_int(c, "disc_steps",
            [](RunConfig& r) -> int& { return r.train.disc_steps; });
    add_bool(c, "sample_latent",
             [](RunConfig& r) -> bool& { return r.train.sample_latent; });
    // One knob steers training, completion, and scoring alike.
    c.push_back({{"loss_variant", ConfigKind::kString},
                 [](const RunConfig& r) { return json(to_string(r.train.variant)); },
                 [](RunConfig& r, const json& v) {
                   r.train.variant =
                       loss_variant_from_string(get_string(v, "loss_variant"));
                   r.match.variant = r.train.variant;
                 }});
    add_enum(c, "gan_form",
             [](RunConfig& r) -> GanForm& { return r.train.gan_form; },
             gan_form_from_string, [](GanForm f) { return to_string(f); });
    add_seed(c, "train_seed",
             [](RunConfig& r) -> std::uint64_t& { return r.train.seed; });
    add_int(c, "log_every",
            [](RunConfig& r) -> int& { return r.train.log_every; });

    add_int(c, "max_rounds",
            [](RunConfig& r) -> int& { return r.match.max_rounds; });
    add_double(c, "round_tol",
               [](RunConfig& r) -> double& { return r.match.round_tol; });
    add_int(c, "z_steps",
            [](RunConfig& r) -> int& { return r.match.z_steps; });
    add_double(c, "lr_z",
               [](RunConfig& r) -> double& { return r.match.lr_z; });
    add_double(c, "eta", [](RunConfig& r) -> double& { return r.match.eta; });
    add_double(c, "lambda_zeta",
               [](RunConfig& r) -> double& { return r.match.lambda_zeta; });
    add_double(c, "tau_scale",
               [](RunConfig& r) -> double& { return r.match.tau_scale; });
    add_double(c, "sigma",
               [](RunConfig& r) -> double& { return r.match.sigma; });
    add_int(c, "sinkhorn_max_iters",
            [](RunConfig& r) -> int& { return r.match.sinkhorn_max_iters; });
    add_double(c, "sinkhorn_tol",
               [](RunConfig& r) -> double& { return r.match.sinkhorn_tol; });
    add_double(c, "init_noise",
               [](RunConfig& r) -> double& { return r.match.init_noise; });
    add_int(c, "restarts",
            [](RunConfig& r) -> int& { return r.match.restarts; });
    add_double(c, "dedup_tol",
               [](RunConfig& r) -> double& { return r.match.dedup_tol; });
    add_int(c, "k", [](RunConfig& r) -> int& { return r.k; });

    add_double(c, "mask_fraction",
               [](RunConfig& r) -> double& { return r.mask_fraction; });
    add_seed(c, "eval_seed",
             [](RunConfig& r) -> std::uint64_t& { return r.eval_seed; });

    add_string(c, "data_dir",
               [](RunConfig& r) -> std::string& { return r.data_dir; });
    add_string(c, "out_dir",
               [](RunConfig& r) -> std::string& { return r.out_dir; });
    add_string(c, "checkpoint_path",
               [](RunConfig& r) -> std::string& { return r.checkpoint_path; });
    add_string(c, "graph_path",
               [](RunConfig& r) -> std::string& { return r.graph_path; });
    add_string(c, "mask_path",
               [](RunConfig& r) -> std::string& { return r.mask_path; });

    for (std::size_t i = 0; i < entries_.size(); ++i) {
      index_[entries_[i].key.name] = i;
    }
  }

  const std::vector<KeyEntry>& entries() const { return entries_; }

  const KeyEntry& find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) {
      throw ConfigError("unknown config key '" + name + "'");
    }
    return entries_[it->second];
  }

  bool contains(const std::string& name) const {
    return index_.count(name) != 0;
  }

 private:
  template <class Ref>
  static void add_int(std::vector<KeyEntry>& c, const char* name, Ref ref) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kInt},
                 [ref](const RunConfig& r) {
                   return json(ref(const_cast<RunConfig&>(r)));
                 },
                 [ref, key](RunConfig& r, const json& v) {
                   ref(r) = get_int(v, key);
                 }});
  }
  template <class Ref>
  static void add_double(std::vector<KeyEntry>& c, const char* name, Ref ref) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kDouble},
                 [ref](const RunConfig& r) {
                   return json(ref(const_cast<RunConfig&>(r)));
                 },
                 [ref, key](RunConfig& r, const json& v) {
                   ref(r) = get_double(v, key);
                 }});
  }
  template <class Ref>
  static void add_bool(std::vector<KeyEntry>& c, const char* name, Ref ref) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kBool},
                 [ref](const RunConfig& r) {
                   return json(ref(const_cast<RunConfig&>(r)));
                 },
                 [ref, key](RunConfig& r, const json& v) {
                   ref(r) = get_bool(v, key);
                 }});
  }
  template <class Ref>
  static void add_string(std::vector<KeyEntry>& c, const char* name, Ref ref) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kString},
                 [ref](const RunConfig& r) {
                   return json(ref(const_cast<RunConfig&>(r)));
                 },
                 [ref, key](RunConfig& r, const json& v) {
                   ref(r) = get_string(v, key);
                 }});
  }
  template <class Ref>
  static void add_seed(std::vector<KeyEntry>& c, const char* name, Ref ref) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kSeed},
                 [ref](const RunConfig& r) {
                   return json(ref(const_cast<RunConfig&>(r)));
                 },
                 [ref, key](RunConfig& r, const json& v) {
                   ref(r) = get_seed(v, key);
                 }});
  }
  template <class Ref, class Parse, class Print>
  static void add_enum(std::vector<KeyEntry>& c, const char* name, Ref ref,
                       Parse parse, Print print) {
    const std::string key = name;
    c.push_back({{key, ConfigKind::kString},
                 [ref, print](const RunConfig& r) {
                   return json(print(ref(const_cast<RunConfig&>(r))));
                 },
                 [ref, key, parse](RunConfig& r, const json& v) {
                   ref(r) = parse(get_string(v, key));
                 }});
  }

  std::vector<KeyEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

const KeyTable& key_table() {
  static const KeyTable table;
  return table;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : key_table().entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& context) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(context + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError(context + " must hold a JSON object");
  }
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    key_table().find(key).set(cfg, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), "config file " + path);
}

std::string run_config_json(const RunConfig& cfg) {
  json doc = json::object();
  for (const auto& e : key_table().entries()) {
    doc[e.key.name] = e.get(cfg);
  }
  return doc.dump(2) + "\n";
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << run_config_json(cfg);
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  const KeyEntry& entry = key_table().find(key);
  json v;
  switch (entry.key.kind) {
    case ConfigKind::kInt:
      v = json(static_cast<int>(
          parse_long(value, "override --" + key)));
      break;
    case ConfigKind::kDouble:
      v = json(parse_double(value, "override --" + key));
      break;
    case ConfigKind::kBool:
      if (value == "true" || value == "1") {
        v = json(true);
      } else if (value == "false" || value == "0") {
        v = json(false);
      } else {
        throw ConfigError("override --" + key + " expects true or false, got '" +
                          value + "'");
      }
      break;
    case ConfigKind::kString:
      v = json(value);
      break;
    case ConfigKind::kSeed: {
      const char* begin = value.c_str();
      char* end = nullptr;
      const unsigned long long parsed = std::strtoull(begin, &end, 10);
      if (end == begin || *end != '\0' || value[0] == '-') {
        throw ConfigError("override --" + key +
                          " expects a nonnegative integer, got '" + value + "'");
      }
      v = json(static_cast<std::uint64_t>(parsed));
      break;
    }
  }
  entry.set(cfg, v);
}

}  // namespace spherad
