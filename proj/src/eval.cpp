#include "spherad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spherad/error.hpp"
#include "spherad/number.hpp"
#include "spherad/rng.hpp"

namespace spherad {

namespace {

constexpr double kSymmetryTol = 1e-12;

}  // namespace

Tensor edge_anomaly_scores(const Graph& g, const ReconstructedGraph& best,
                           LossVariant variant) {
  validate_graph(g);
  if (best.probs.rows != g.n || best.probs.cols != g.n) {
    throw ShapeError("reconstruction is " + std::to_string(best.probs.rows) +
                     "x" + std::to_string(best.probs.cols) + " but graph has " +
                     std::to_string(g.n) + " nodes");
  }
  const Tensor target = recon_target(g, variant);
  Tensor scores(g.n, g.n);
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == j) continue;
      scores.at(i, j) = std::fabs(target.at(i, j) - best.probs.at(i, j));
    }
  }
  return scores;
}

std::vector<double> node_anomaly_scores(const Tensor& edge_scores) {
  const int n = edge_scores.rows;
  if (n != edge_scores.cols) {
    throw ShapeError("edge score matrix must be square");
  }
  if (n < 2) throw ShapeError("node scores need at least 2 nodes");
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::fabs(edge_scores.at(i, j) - edge_scores.at(j, i)) >
          kSymmetryTol) {
        throw DataError("edge score matrix is not symmetric at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  std::vector<double> node(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) s += edge_scores.at(i, j);
    }
    node[i] = s / (n - 1);
  }
  return node;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
  const int n = static_cast<int>(scores.size());
  int positives = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DataError("labels must be 0 or 1");
    }
    if (!std::isfinite(scores[i])) throw DataError("scores must be finite");
    positives += labels[i];
  }
  const int negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("AUC undefined: labels are single-class");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // Average ranks across ties, then the rank-sum form of Mann-Whitney U.
  double positive_rank_sum = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * ((i + 1) + j);  // ranks are 1-based
    for (int k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  const double u =
      positive_rank_sum - 0.5 * positives * (positives + 1.0);
  return u / (static_cast<double>(positives) * negatives);
}

namespace {

MetricsAggregate aggregate_metric(const std::vector<GraphMetrics>& rows,
                                  double GraphMetrics::*member) {
  MetricsAggregate agg;
  double sum = 0.0;
  for (const auto& row : rows) {
    const double v = row.*member;
    if (!std::isfinite(v)) continue;
    sum += v;
    agg.count += 1;
  }
  if (agg.count == 0) {
    agg.mean = std::nan("");
    agg.sd = std::nan("");
    return agg;
  }
  agg.mean = sum / agg.count;
  double sq = 0.0;
  for (const auto& row : rows) {
    const double v = row.*member;
    if (!std::isfinite(v)) continue;
    const double d = v - agg.mean;
    sq += d * d;
  }
  agg.sd = std::sqrt(sq / agg.count);
  return agg;
}

void fill_aggregates(MetricsReport& report) {
  report.edge_auc = aggregate_metric(report.rows, &GraphMetrics::edge_auc);
  report.node_auc = aggregate_metric(report.rows, &GraphMetrics::node_auc);
  report.masked_auc = aggregate_metric(report.rows, &GraphMetrics::masked_auc);
  report.mean_residual =
      aggregate_metric(report.rows, &GraphMetrics::mean_residual);
}

std::string default_fingerprint(const EvalConfig& cfg) {
  std::ostringstream text;
  const MatchConfig& m = cfg.match;
  text << "rounds=" << m.max_rounds << ";round_tol=" << repr_double(m.round_tol)
       << ";z_steps=" << m.z_steps << ";lr_z=" << repr_double(m.lr_z)
       << ";eta=" << repr_double(m.eta)
       << ";lambda_zeta=" << repr_double(m.lambda_zeta)
       << ";tau_scale=" << repr_double(m.tau_scale)
       << ";sigma=" << repr_double(m.sigma)
       << ";variant=" << to_string(m.variant)
       << ";init_noise=" << repr_double(m.init_noise)
       << ";restarts=" << m.restarts
       << ";mask_fraction=" << repr_double(cfg.mask_fraction)
       << ";seed=" << cfg.seed;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text.str())));
  return buf;
}

}  // namespace

MetricsReport evaluate_run(const GaeModel& model,
                           const std::vector<LabeledGraph>& tests,
                           const EvalConfig& cfg) {
  validate_model(model);
  if (!(cfg.mask_fraction >= 0.0 && cfg.mask_fraction <= 1.0)) {
    throw ConfigError("mask fraction must lie in [0, 1]");
  }

  std::vector<int> order(tests.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return tests[a].id < tests[b].id; });

  MetricsReport report;
  report.config_fingerprint =
      cfg.fingerprint.empty() ? default_fingerprint(cfg) : cfg.fingerprint;

  for (int idx : order) {
    const LabeledGraph& labeled = tests[idx];
    const Graph& g = labeled.graph;
    if (static_cast<int>(labeled.node_labels.size()) != g.n) {
      throw DataError("graph " + labeled.id + " has " +
                      std::to_string(labeled.node_labels.size()) +
                      " node labels for " + std::to_string(g.n) + " nodes");
    }
    // One stream per graph id so the result is order-independent.
    Rng rng(mix_seed(cfg.seed, fnv1a64(labeled.id)));

    GraphMetrics row;
    row.id = labeled.id;

    const PartialGraph full = apply_mask(g, full_mask(g.n));
    const CompletionResult completion =
        complete_graph(full, model, 1, cfg.match, rng);
    const ReconstructedGraph& best = completion.candidates.front().recon;

    const Tensor scores = edge_anomaly_scores(g, best, cfg.match.variant);
    double residual_sum = 0.0;
    std::vector<double> pair_scores;
    std::vector<int> pair_labels;
    for (int i = 0; i < g.n; ++i) {
      for (int j = i + 1; j < g.n; ++j) {
        const double s = scores.at(i, j);
        residual_sum += s;
        pair_scores.push_back(s);
        pair_labels.push_back(labeled.edge_labels.count({i, j}) ? 1 : 0);
      }
    }
    row.mean_residual = residual_sum / pair_scores.size();

    try {
      row.edge_auc = roc_auc(pair_scores, pair_labels);
    } catch (const DataError&) {
      row.edge_auc = std::nan("");
      report.notes.push_back("edge AUC undefined for " + labeled.id +
                             ": single-class labels");
    }

    const std::vector<double> node_scores = node_anomaly_scores(scores);
    try {
      row.node_auc = roc_auc(node_scores, labeled.node_labels);
    } catch (const DataError&) {
      row.node_auc = std::nan("");
      report.notes.push_back("node AUC undefined for " + labeled.id +
                             ": single-class labels");
    }

    // Masked-edge recovery: hide a seeded pair subset, complete, and rank the
    // hidden pairs by reconstruction probability against true edge presence.
    const PartialMask mask = random_pair_mask(g.n, cfg.mask_fraction, rng);
    const PartialGraph masked = apply_mask(g, mask);
    const CompletionResult recovered =
        complete_graph(masked, model, 1, cfg.match, rng);
    const Tensor& rec_probs = recovered.candidates.front().recon.probs;
    std::vector<double> hidden_scores;
    std::vector<int> hidden_labels;
    for (int i = 0; i < g.n; ++i) {
      for (int j = i + 1; j < g.n; ++j) {
        if (mask.m.at(i, j) != 0.0) continue;
        hidden_scores.push_back(rec_probs.at(i, j));
        hidden_labels.push_back(g.w.at(i, j) > 0.0 ? 1 : 0);
      }
    }
    try {
      if (hidden_scores.empty()) throw DataError("no hidden pairs");
      row.masked_auc = roc_auc(hidden_scores, hidden_labels);
    } catch (const DataError&) {
      row.masked_auc = std::nan("");
      report.notes.push_back("masked AUC undefined for " + labeled.id +
                             ": single-class labels");
    }

    report.rows.push_back(std::move(row));
  }

  fill_aggregates(report);
  return report;
}

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "graph_id,edge_auc,node_auc,masked_auc,mean_residual\n";
  auto emit = [&](const std::string& id, double e, double n, double m,
                  double r) {
    out << id << "," << repr_double(e) << "," << repr_double(n) << ","
        << repr_double(m) << "," << repr_double(r) << "\n";
  };
  for (const auto& row : report.rows) {
    emit(row.id, row.edge_auc, row.node_auc, row.masked_auc,
         row.mean_residual);
  }
  if (!report.rows.empty()) {
    emit("mean", report.edge_auc.mean, report.node_auc.mean,
         report.masked_auc.mean, report.mean_residual.mean);
    emit("sd", report.edge_auc.sd, report.node_auc.sd, report.masked_auc.sd,
         report.mean_residual.sd);
  }
  return out.str();
}

MetricsReport parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "graph_id,edge_auc,node_auc,masked_auc,mean_residual") {
    throw DataError("metrics CSV header missing or wrong");
  }
  MetricsReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (cells.size() != 5) {
      throw DataError("metrics CSV row '" + line + "' has " +
                      std::to_string(cells.size()) + " cells");
    }
    if (cells[0] == "mean" || cells[0] == "sd") continue;
    GraphMetrics row;
    row.id = cells[0];
    row.edge_auc = parse_double(cells[1], "metrics edge_auc");
    row.node_auc = parse_double(cells[2], "metrics node_auc");
    row.masked_auc = parse_double(cells[3], "metrics masked_auc");
    row.mean_residual = parse_double(cells[4], "metrics mean_residual");
    report.rows.push_back(std::move(row));
  }
  fill_aggregates(report);
  return report;
}

}  // namespace spherad
