#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "spherad/error.hpp"
#include "spherad/eval.hpp"
#include "spherad/gae.hpp"
#include "spherad/graph.hpp"
#include "spherad/synth.hpp"
#include "spherad/trainer.hpp"

using namespace spherad;

namespace {

Tensor symmetric_scores(int n, double off_value) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) t.at(i, j) = off_value;
    }
  }
  return t;
}

// One modestly trained model shared by the report tests; training runs once.
struct EvalFixture {
  DatasetBundle clean;
  DatasetBundle anomalous;
  GaeModel model;
};

const EvalFixture& fixture() {
  static const EvalFixture fx = [] {
    EvalFixture f;
    const ConnectomeSpec spec;
    f.clean = generate_dataset(spec, DatasetCounts{6, 3}, 0.0,
                               AnomalyTemplate{}, 71);
    AnomalyTemplate damp;
    damp.kind = AnomalyKind::kWeightDampening;
    damp.severity = 0.9;
    f.anomalous = generate_dataset(spec, DatasetCounts{0, 3}, 1.0, damp, 72);

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.lambda2 = 0.0;
    cfg.sample_latent = false;
    cfg.hidden_dim = 8;
    cfg.latent_dim = 4;
    cfg.kappa = 10.0;
    cfg.lr_gen = 0.02;
    cfg.seed = 9;
    f.model = train(f.clean.train, cfg).model;
    return f;
  }();
  return fx;
}

EvalConfig quick_eval_config() {
  EvalConfig cfg;
  cfg.match.max_rounds = 5;
  cfg.match.z_steps = 10;
  cfg.match.restarts = 1;
  cfg.mask_fraction = 0.2;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("scores identical to labels rank perfectly") {
  const std::vector<double> scores{0.0, 1.0, 0.0, 1.0, 1.0};
  const std::vector<int> labels{0, 1, 0, 1, 1};
  CHECK(roc_auc(scores, labels) == 1.0);
  CHECK(roc_auc({1.0, 0.0}, {0, 1}) == 0.0);
}

TEST_CASE("all-equal scores give half by tie handling") {
  CHECK(roc_auc({0.7, 0.7, 0.7, 0.7}, {0, 1, 0, 1}) == 0.5);
  CHECK(roc_auc({0.0, 0.0, 0.0}, {1, 0, 1}) == 0.5);
}

TEST_CASE("four-point ranking wins three of four pairs") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
}

TEST_CASE("single-class labels leave the area undefined") {
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 0}), DataError);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {1, 1}), DataError);
  CHECK_THROWS_AS(roc_auc({}, {}), DataError);
}

TEST_CASE("score negation complements the area") {
  const std::vector<double> scores{0.3, 0.1, 0.3, 0.9, 0.5, 0.1, 0.7};
  const std::vector<int> labels{1, 0, 0, 1, 0, 1, 1};
  std::vector<double> negated(scores.size());
  std::transform(scores.begin(), scores.end(), negated.begin(),
                 [](double s) { return -s; });
  CHECK(roc_auc(scores, labels) + roc_auc(negated, labels) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("strictly increasing transforms preserve the area") {
  const std::vector<double> scores{0.3, 0.1, 0.3, 0.9, 0.5, 0.1, 0.7};
  const std::vector<int> labels{1, 0, 0, 1, 0, 1, 1};
  const double base = roc_auc(scores, labels);

  std::vector<double> affine(scores.size());
  std::vector<double> expo(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    affine[k] = 2.0 * scores[k] + 1.0;
    expo[k] = std::exp(scores[k]);
  }
  CHECK(roc_auc(affine, labels) == base);
  CHECK(roc_auc(expo, labels) == base);
}

TEST_CASE("area inputs are validated") {
  CHECK_THROWS_AS(roc_auc({0.1, 0.2, 0.3}, {0, 1}), ShapeError);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 2}), DataError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(roc_auc({0.1, inf}, {0, 1}), DataError);
}

TEST_CASE("a perfect reconstruction scores zero everywhere") {
  Tensor w(4, 4);
  w.at(0, 1) = w.at(1, 0) = 2.0;
  w.at(2, 3) = w.at(3, 2) = 0.5;
  w.at(0, 3) = w.at(3, 0) = 1.0;
  const Graph g = make_graph(std::move(w));

  for (LossVariant variant :
       {LossVariant::kCrossEntropy, LossVariant::kQuadratic}) {
    const ReconstructedGraph perfect{recon_target(g, variant)};
    const Tensor scores = edge_anomaly_scores(g, perfect, variant);
    for (double v : scores.v) CHECK(v == 0.0);
  }
}

TEST_CASE("edge scores are absolute residuals against the target") {
  Tensor w(3, 3);
  w.at(0, 1) = w.at(1, 0) = 2.0;
  const Graph g = make_graph(std::move(w));

  Tensor probs(3, 3);
  probs.at(0, 1) = probs.at(1, 0) = 0.3;
  probs.at(0, 2) = probs.at(2, 0) = 0.2;
  probs.at(1, 2) = probs.at(2, 1) = 0.9;

  // Binarized target: pair (0,1) is an edge, the others are not.
  const Tensor scores =
      edge_anomaly_scores(g, ReconstructedGraph{probs},
                          LossVariant::kCrossEntropy);
  CHECK(scores.at(0, 1) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(scores.at(0, 2) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(scores.at(1, 2) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("edge scores stay in range, symmetric, zero diagonal") {
  const GeneratedConnectome g = generate_connectome(ConnectomeSpec{}, 23);
  Rng rng(4);
  Tensor probs(g.graph.n, g.graph.n);
  for (int i = 0; i < g.graph.n; ++i) {
    for (int j = i + 1; j < g.graph.n; ++j) {
      const double p = 0.01 + 0.98 * rng.uniform();
      probs.at(i, j) = p;
      probs.at(j, i) = p;
    }
  }
  for (LossVariant variant :
       {LossVariant::kCrossEntropy, LossVariant::kQuadratic}) {
    const Tensor scores =
        edge_anomaly_scores(g.graph, ReconstructedGraph{probs}, variant);
    for (int i = 0; i < g.graph.n; ++i) {
      CHECK(scores.at(i, i) == 0.0);
      for (int j = 0; j < g.graph.n; ++j) {
        CHECK(scores.at(i, j) >= 0.0);
        CHECK(scores.at(i, j) <= 1.0);
        CHECK(scores.at(i, j) == scores.at(j, i));
      }
    }
  }
}

TEST_CASE("edge score shapes are validated") {
  const GeneratedConnectome g = generate_connectome(ConnectomeSpec{}, 3);
  CHECK_THROWS_AS(edge_anomaly_scores(g.graph, ReconstructedGraph{Tensor(5, 5)},
                                      LossVariant::kCrossEntropy),
                  ShapeError);
}

TEST_CASE("zero edge scores give zero node scores") {
  const std::vector<double> node = node_anomaly_scores(Tensor(6, 6));
  REQUIRE(node.size() == 6);
  for (double v : node) CHECK(v == 0.0);
}

TEST_CASE("one scored edge marks exactly its endpoints") {
  Tensor scores(5, 5);
  scores.at(1, 3) = 0.8;
  scores.at(3, 1) = 0.8;
  const std::vector<double> node = node_anomaly_scores(scores);
  CHECK(node[1] == 0.2);
  CHECK(node[3] == 0.2);
  CHECK(node[0] == 0.0);
  CHECK(node[2] == 0.0);
  CHECK(node[4] == 0.0);
}

TEST_CASE("constant edge scores average to the same constant") {
  const std::vector<double> node = node_anomaly_scores(symmetric_scores(5, 0.25));
  for (double v : node) CHECK(v == 0.25);
  const std::vector<double> frac = node_anomaly_scores(symmetric_scores(7, 0.35));
  for (double v : frac) CHECK(v == doctest::Approx(0.35).epsilon(1e-15));
}

TEST_CASE("node scores demand a symmetric square matrix") {
  CHECK_THROWS_AS(node_anomaly_scores(Tensor(1, 1)), ShapeError);
  CHECK_THROWS_AS(node_anomaly_scores(Tensor(3, 4)), ShapeError);
  Tensor lopsided(3, 3);
  lopsided.at(0, 1) = 0.5;
  CHECK_THROWS_AS(node_anomaly_scores(lopsided), DataError);
}

TEST_CASE("clean test sets report undefined label areas as notes") {
  const EvalFixture& fx = fixture();
  const MetricsReport report =
      evaluate_run(fx.model, fx.clean.test, quick_eval_config());

  REQUIRE(report.rows.size() == 3);
  for (const GraphMetrics& row : report.rows) {
    CHECK(std::isnan(row.edge_auc));
    CHECK(std::isnan(row.node_auc));
    CHECK(std::isfinite(row.masked_auc));
    CHECK(row.masked_auc >= 0.0);
    CHECK(row.masked_auc <= 1.0);
    CHECK(row.mean_residual >= 0.0);
    CHECK(row.mean_residual <= 1.0);
  }
  CHECK(report.edge_auc.count == 0);
  CHECK(std::isnan(report.edge_auc.mean));
  CHECK(report.masked_auc.count == 3);
  REQUIRE(report.notes.size() >= 2);
  for (const std::string& note : report.notes) {
    CHECK(note.find("single-class") != std::string::npos);
  }
}

TEST_CASE("test order never changes the report") {
  const EvalFixture& fx = fixture();
  const EvalConfig cfg = quick_eval_config();

  std::vector<LabeledGraph> shuffled = fx.anomalous.test;
  std::reverse(shuffled.begin(), shuffled.end());

  const MetricsReport a = evaluate_run(fx.model, fx.anomalous.test, cfg);
  const MetricsReport b = evaluate_run(fx.model, shuffled, cfg);
  CHECK(metrics_csv(a) == metrics_csv(b));
}

TEST_CASE("labeled test sets yield defined in-range areas") {
  const EvalFixture& fx = fixture();
  const MetricsReport report =
      evaluate_run(fx.model, fx.anomalous.test, quick_eval_config());

  REQUIRE(report.rows.size() == 3);
  for (const GraphMetrics& row : report.rows) {
    CHECK(std::isfinite(row.edge_auc));
    CHECK(row.edge_auc >= 0.0);
    CHECK(row.edge_auc <= 1.0);
    CHECK(std::isfinite(row.node_auc));
    CHECK(row.node_auc >= 0.0);
    CHECK(row.node_auc <= 1.0);
  }
  CHECK(report.edge_auc.count == 3);
  CHECK(report.node_auc.count == 3);
}

TEST_CASE("aggregates equal a recomputation from the rows") {
  const EvalFixture& fx = fixture();
  const MetricsReport report =
      evaluate_run(fx.model, fx.anomalous.test, quick_eval_config());

  auto recompute = [&](double GraphMetrics::*member) {
    double sum = 0.0;
    int count = 0;
    for (const GraphMetrics& row : report.rows) {
      const double v = row.*member;
      if (!std::isfinite(v)) continue;
      sum += v;
      count += 1;
    }
    REQUIRE(count > 0);
    const double mean = sum / count;
    double sq = 0.0;
    for (const GraphMetrics& row : report.rows) {
      const double v = row.*member;
      if (!std::isfinite(v)) continue;
      sq += (v - mean) * (v - mean);
    }
    return std::pair<double, double>{mean, std::sqrt(sq / count)};
  };

  const auto [edge_mean, edge_sd] = recompute(&GraphMetrics::edge_auc);
  CHECK(report.edge_auc.mean == edge_mean);
  CHECK(report.edge_auc.sd == edge_sd);
  const auto [res_mean, res_sd] = recompute(&GraphMetrics::mean_residual);
  CHECK(report.mean_residual.mean == res_mean);
  CHECK(report.mean_residual.sd == res_sd);
}

TEST_CASE("evaluation is deterministic for a fixed seed") {
  const EvalFixture& fx = fixture();
  const EvalConfig cfg = quick_eval_config();
  const std::string a = metrics_csv(evaluate_run(fx.model, fx.clean.test, cfg));
  const std::string b = metrics_csv(evaluate_run(fx.model, fx.clean.test, cfg));
  CHECK(a == b);

  EvalConfig other = cfg;
  other.seed = 18;
  const std::string c =
      metrics_csv(evaluate_run(fx.model, fx.clean.test, other));
  CHECK(a != c);
}

TEST_CASE("evaluation validates its inputs") {
  const EvalFixture& fx = fixture();
  EvalConfig cfg = quick_eval_config();
  cfg.mask_fraction = 1.5;
  CHECK_THROWS_AS(evaluate_run(fx.model, fx.clean.test, cfg),
                  ConfigError);

  std::vector<LabeledGraph> bad = fx.clean.test;
  bad[0].node_labels.pop_back();
  CHECK_THROWS_AS(evaluate_run(fx.model, bad, quick_eval_config()), DataError);
}

TEST_CASE("metrics CSV keeps its column order and summary rows") {
  const EvalFixture& fx = fixture();
  const MetricsReport report =
      evaluate_run(fx.model, fx.anomalous.test, quick_eval_config());
  const std::string csv = metrics_csv(report);

  REQUIRE(csv.rfind("graph_id,edge_auc,node_auc,masked_auc,mean_residual\n",
                    0) == 0);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 1 + 3 + 2);
  CHECK(csv.find("\nmean,") != std::string::npos);
  CHECK(csv.find("\nsd,") != std::string::npos);
}

TEST_CASE("metrics CSV round trips byte-identically") {
  const EvalFixture& fx = fixture();
  for (const auto* tests : {&fx.anomalous.test, &fx.clean.test}) {
    const MetricsReport report =
        evaluate_run(fx.model, *tests, quick_eval_config());
    const std::string csv = metrics_csv(report);
    const MetricsReport parsed = parse_metrics_csv(csv);
    CHECK(metrics_csv(parsed) == csv);
  }
}

TEST_CASE("hand-built metrics rows survive a CSV round trip") {
  MetricsReport report;
  GraphMetrics a;
  a.id = "test-0000";
  a.edge_auc = 0.5;
  a.node_auc = 1.0 / 3.0;
  a.masked_auc = 0.875;
  a.mean_residual = 0.123456789012345;
  GraphMetrics b;
  b.id = "test-0001";
  b.edge_auc = 1.0;
  b.node_auc = 0.25;
  b.masked_auc = 0.0;
  b.mean_residual = 1e-17;
  report.rows = {a, b};

  const MetricsReport parsed = parse_metrics_csv(metrics_csv(report));
  REQUIRE(parsed.rows.size() == 2);
  CHECK(parsed.rows[0].id == "test-0000");
  CHECK(parsed.rows[0].edge_auc == a.edge_auc);
  CHECK(parsed.rows[0].node_auc == a.node_auc);
  CHECK(parsed.rows[0].masked_auc == a.masked_auc);
  CHECK(parsed.rows[0].mean_residual == a.mean_residual);
  CHECK(parsed.rows[1].edge_auc == b.edge_auc);
  CHECK(parsed.rows[1].mean_residual == b.mean_residual);
  CHECK(parsed.edge_auc.mean == 0.75);
  CHECK(parsed.edge_auc.count == 2);
}

TEST_CASE("an empty report emits only the header") {
  CHECK(metrics_csv(MetricsReport{}) ==
        "graph_id,edge_auc,node_auc,masked_auc,mean_residual\n");
}

TEST_CASE("malformed metrics CSVs are rejected") {
  CHECK_THROWS_AS(parse_metrics_csv("wrong,header\n"), DataError);
  CHECK_THROWS_AS(
      parse_metrics_csv("graph_id,edge_auc,node_auc,masked_auc,mean_residual\n"
                        "test-0000,0.5,0.5\n"),
      DataError);
  CHECK_THROWS_AS(
      parse_metrics_csv("graph_id,edge_auc,node_auc,masked_auc,mean_residual\n"
                        "test-0000,abc,0.5,0.5,0.5\n"),
      DataError);
}
