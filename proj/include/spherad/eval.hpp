#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherad/gae.hpp"
#include "spherad/matching.hpp"
#include "spherad/synth.hpp"
#include "spherad/tensor.hpp"

namespace spherad {

// Residual between the observed graph and a reconstruction, entrywise:
// cross-entropy variant compares against the binarized adjacency, quadratic
// against min-max scaled weights. Symmetric with zero diagonal, values in
// [0, 1].
Tensor edge_anomaly_scores(const Graph& g, const ReconstructedGraph& best,
                           LossVariant variant);

// Node score = mean of the node's incident off-diagonal edge scores.
std::vector<double> node_anomaly_scores(const Tensor& edge_scores);

// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 * P(tie). Throws DataError
// when labels are single-class.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct EvalConfig {
  MatchConfig match;
  double mask_fraction = 0.2;  // hidden pair fraction for recovery scoring
  std::uint64_t seed = 1;
  std::string fingerprint;  // caller-supplied config digest, free-form
};

// NaN marks an AUC left undefined because its labels were single-class; the
// report carries a note for each such cell.
struct GraphMetrics {
  std::string id;
  double edge_auc = 0.0;
  double node_auc = 0.0;
  double masked_auc = 0.0;
  double mean_residual = 0.0;
};

struct MetricsAggregate {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation over defined rows
  int count = 0;    // rows with a defined value
};

struct MetricsReport {
  std::vector<GraphMetrics> rows;  // sorted by graph id
  MetricsAggregate edge_auc, node_auc, masked_auc, mean_residual;
  std::vector<std::string> notes;
  std::string config_fingerprint;
};

// Completes every test graph under a full observation mask, scores edges and
// nodes against the ground-truth labels, and measures masked-edge recovery on
// a seeded hidden subset. Each graph's result depends only on (graph, model,
// config), so test-set order never changes the report.
MetricsReport evaluate_run(const GaeModel& model,
                           const std::vector<LabeledGraph>& tests,
                           const EvalConfig& cfg);

// Fixed column order: graph_id, edge_auc, node_auc, masked_auc, mean_residual.
// One row per graph, then `mean` and `sd` rows (omitted for an empty report).
std::string metrics_csv(const MetricsReport& report);

// Recomputes the four aggregates from the rows (used to cross-check reports
// parsed back from CSV).
MetricsReport parse_metrics_csv(const std::string& text);

}  // namespace spherad
