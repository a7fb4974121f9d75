#include "spherad/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spherad/checkpoint.hpp"
#include "spherad/config.hpp"
#include "spherad/error.hpp"
#include "spherad/eval.hpp"
#include "spherad/matching.hpp"
#include "spherad/number.hpp"
#include "spherad/synth.hpp"
#include "spherad/trainer.hpp"

namespace spherad {

namespace {

namespace fs = std::filesystem;

struct SubState {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

// Every config key becomes a flag of the same name; a handful of path keys
// get short aliases to keep command lines readable.
void add_config_flags(CLI::App* sub, SubState& st) {
  sub->add_option("--config", st.config_path, "JSON config file");
  for (const auto& key : config_keys()) {
    std::string names = "--" + key.name;
    if (key.name == "data_dir") names += ",--data";
    if (key.name == "out_dir") names += ",--out";
    if (key.name == "checkpoint_path") names += ",--checkpoint";
    if (key.name == "graph_path") names += ",--graph";
    if (key.name == "mask_path") names += ",--mask";
    CLI::Option* opt = sub->add_option(names, st.values[key.name]);
    st.options.emplace_back(key.name, opt);
  }
}

RunConfig resolve_config(const SubState& st) {
  RunConfig cfg;
  if (!st.config_path.empty()) cfg = load_run_config(st.config_path);
  for (const auto& [name, opt] : st.options) {
    if (opt->count() > 0) apply_override(cfg, name, st.values.at(name));
  }
  return cfg;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << content;
}

std::string require_path(const std::string& value, const char* what,
                         const char* flag) {
  if (value.empty()) {
    throw ConfigError(std::string(what) + " (" + flag + ") is required");
  }
  return value;
}

std::string out_file(const RunConfig& cfg, const char* name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out_dir);
}

int cmd_generate(const RunConfig& cfg) {
  require_path(cfg.out_dir, "output directory", "--out");
  const DatasetBundle bundle =
      generate_dataset(cfg.connectome, cfg.counts, cfg.anomaly_fraction,
                       cfg.anomaly, cfg.data_seed);
  write_dataset(bundle, cfg.out_dir);
  write_resolved_config(cfg, out_file(cfg, "resolved_config.json"));
  std::cout << "wrote " << bundle.train.size() << " train and "
            << bundle.test.size() << " test graphs to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require_path(cfg.data_dir, "dataset directory", "--data");
  require_path(cfg.out_dir, "output directory", "--out");
  const DatasetBundle data =
      load_dataset((fs::path(cfg.data_dir) / "manifest.json").string());
  if (data.train.empty()) throw DataError("dataset has no training graphs");

  const TrainResult result = train(data.train, cfg.train);

  ensure_out_dir(cfg);
  Checkpoint ck;
  ck.config = cfg;
  ck.epoch = cfg.train.epochs;
  ck.rng_state = result.rng_state;
  ck.model = result.model;
  ck.has_disc = true;
  ck.disc = result.disc;
  save_checkpoint(ck, out_file(cfg, "checkpoint.json"));
  write_text_file(out_file(cfg, "history.csv"), history_csv(result.history));
  write_resolved_config(cfg, out_file(cfg, "resolved_config.json"));

  const double final_total = result.history.epochs.empty()
                                 ? 0.0
                                 : result.history.epochs.back().loss.total;
  std::cout << "trained " << cfg.train.epochs << " epochs on "
            << data.train.size() << " graphs, final total loss "
            << repr_double(final_total) << "\n";
  return 0;
}

PartialGraph load_partial_graph(const RunConfig& cfg) {
  const Graph g = load_graph(cfg.graph_path);
  PartialMask mask = full_mask(g.n);
  if (!cfg.mask_path.empty()) {
    mask.m = load_matrix_csv(cfg.mask_path);
  }
  validate_mask(mask, g.n);
  return apply_mask(g, mask);
}

int cmd_complete(const RunConfig& cfg) {
  require_path(cfg.checkpoint_path, "checkpoint", "--checkpoint");
  require_path(cfg.graph_path, "graph file", "--graph");
  require_path(cfg.out_dir, "output directory", "--out");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  const PartialGraph pg = load_partial_graph(cfg);

  Rng rng(cfg.eval_seed);
  const CompletionResult res =
      complete_graph(pg, ck.model, cfg.k, cfg.match, rng);

  ensure_out_dir(cfg);
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t i = 0; i < res.candidates.size(); ++i) {
    const CompletionCandidate& cand = res.candidates[i];
    char name[48];
    std::snprintf(name, sizeof(name), "completion_%02zu.csv", i);
    save_matrix_csv(cand.recon.probs, out_file(cfg, name));
    summary.push_back({{"rank", i},
                       {"restart", cand.restart_index},
                       {"objective", repr_double(cand.state.objective)},
                       {"rounds", cand.state.rounds},
                       {"converged", cand.state.converged},
                       {"path", name}});
  }
  write_text_file(out_file(cfg, "completions.json"), summary.dump(2) + "\n");
  write_resolved_config(cfg, out_file(cfg, "resolved_config.json"));
  std::cout << "wrote " << res.candidates.size()
            << " completion candidates to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_score(const RunConfig& cfg) {
  require_path(cfg.checkpoint_path, "checkpoint", "--checkpoint");
  require_path(cfg.graph_path, "graph file", "--graph");
  require_path(cfg.out_dir, "output directory", "--out");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  const Graph g = load_graph(cfg.graph_path);
  const PartialGraph pg = apply_mask(g, full_mask(g.n));

  Rng rng(cfg.eval_seed);
  const CompletionResult res = complete_graph(pg, ck.model, 1, cfg.match, rng);
  const Tensor scores =
      edge_anomaly_scores(g, res.candidates.front().recon, cfg.match.variant);
  const std::vector<double> node_scores = node_anomaly_scores(scores);

  ensure_out_dir(cfg);
  save_matrix_csv(scores, out_file(cfg, "edge_scores.csv"));
  std::string nodes_text;
  for (double s : node_scores) nodes_text += repr_double(s) + "\n";
  write_text_file(out_file(cfg, "node_scores.csv"), nodes_text);
  write_resolved_config(cfg, out_file(cfg, "resolved_config.json"));
  std::cout << "scored " << g.n << " nodes, outputs in " << cfg.out_dir
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  require_path(cfg.checkpoint_path, "checkpoint", "--checkpoint");
  require_path(cfg.data_dir, "dataset directory", "--data");
  require_path(cfg.out_dir, "output directory", "--out");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  const DatasetBundle data =
      load_dataset((fs::path(cfg.data_dir) / "manifest.json").string());

  EvalConfig ec;
  ec.match = cfg.match;
  ec.mask_fraction = cfg.mask_fraction;
  ec.seed = cfg.eval_seed;
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(fnv1a64(run_config_json(cfg))));
  ec.fingerprint = digest;

  const MetricsReport report = evaluate_run(ck.model, data.test, ec);

  ensure_out_dir(cfg);
  write_text_file(out_file(cfg, "metrics.csv"), metrics_csv(report));
  write_resolved_config(cfg, out_file(cfg, "resolved_config.json"));

  for (const auto& note : report.notes) std::cout << "note: " << note << "\n";
  if (report.node_auc.count > 0) {
    std::cout << "mean node AUC " << repr_double(report.node_auc.mean)
              << " over " << report.node_auc.count << " graphs\n";
  } else {
    std::cout << "node AUC undefined: every test graph has single-class labels\n";
  }
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{"hyperspherical graph autoencoder pipeline"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  SubState gen_state, train_state, complete_state, score_state, eval_state;
  CLI::App* gen =
      app.add_subcommand("generate", "generate a synthetic connectome dataset");
  add_config_flags(gen, gen_state);
  CLI::App* tr = app.add_subcommand("train", "train the autoencoder");
  add_config_flags(tr, train_state);
  CLI::App* comp =
      app.add_subcommand("complete", "complete a partially observed graph");
  add_config_flags(comp, complete_state);
  CLI::App* sc = app.add_subcommand("score", "score a graph for anomalies");
  add_config_flags(sc, score_state);
  CLI::App* ev =
      app.add_subcommand("eval", "evaluate a model on a labeled test set");
  add_config_flags(ev, eval_state);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(resolve_config(gen_state));
    if (tr->parsed()) return cmd_train(resolve_config(train_state));
    if (comp->parsed()) return cmd_complete(resolve_config(complete_state));
    if (sc->parsed()) return cmd_score(resolve_config(score_state));
    if (ev->parsed()) return cmd_eval(resolve_config(eval_state));
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace spherad
