#pragma once

#include <vector>

#include "spherad/gae.hpp"
#include "spherad/graph.hpp"
#include "spherad/rng.hpp"

namespace spherad {

struct CorrespondenceResult {
  Tensor p;            // doubly stochastic (within tolerance)
  int iterations = 0;  // row/column sweeps performed
  bool converged = false;
};

// Alternating row/column normalization of a strictly positive square matrix.
// A matrix that is already doubly stochastic is returned unchanged after one
// sweep.
CorrespondenceResult sinkhorn_project(const Tensor& m, int max_iters,
                                      double tol);

// Nonrigid deformation of signature space:
// zeta(x) = x + sum_c coeffs_c * exp(-|x - center_c|^2 / (2 sigma^2)).
struct RbfTransform {
  Tensor centers;  // k x d
  Tensor coeffs;   // k x d
  double sigma = 1.0;
  double ridge = 0.0;

  Tensor apply(const Tensor& points) const;
  double coeff_penalty() const;  // ridge * squared Frobenius norm of coeffs
};

RbfTransform identity_transform(const Tensor& centers, double sigma,
                                double ridge);

// K_ij = exp(-|a_i - b_j|^2 / (2 sigma^2)).
Tensor rbf_kernel(const Tensor& a, const Tensor& b, double sigma);

double median_pairwise_distance(const Tensor& points);

// Ridge fit of the deformation against soft correspondences: minimizes
// sum_ij p_ij |target_j - zeta(source_i)|^2 + ridge |coeffs|_F^2 over the
// coefficients, with centers fixed at the source rows. The stationarity
// system is (K R K + ridge I) C = K (P T - R V) with R = diag of row sums of
// p, solved by Cholesky.
RbfTransform rbf_fit(const Tensor& source, const Tensor& target,
                     const Tensor& p, double sigma, double ridge);

// j(p, zeta) = sum_ij p_ij |target_j - zeta(source_i)|^2
//            + ridge_weight * |coeffs|_F^2.
double matching_objective(const Tensor& p, const RbfTransform& zeta,
                          const Tensor& source, const Tensor& target,
                          double ridge_weight);

struct MatchConfig {
  int max_rounds = 100;
  double round_tol = 1e-5;
  int z_steps = 20;     // latent gradient steps per round
  double lr_z = 0.02;
  double eta = 0.1;     // weight of the matching term in the latent objective
  double lambda_zeta = 0.1;
  double tau_scale = 0.1;  // softmax temperature = tau_scale * mean cost
  double sigma = 0.0;      // 0 = median pairwise distance of source signatures
  int sinkhorn_max_iters = 2000;
  double sinkhorn_tol = 1e-9;
  LossVariant variant = LossVariant::kCrossEntropy;
  double init_noise = 0.25;
  int restarts = 4;
  double dedup_tol = 1e-3;
};

enum class MatchPhase {
  kRoundStart,          // after the previous round's latent steps
  kAfterCorrespondence,
  kAfterTransform,
};

struct MatchTraceEntry {
  int round = 0;
  MatchPhase phase = MatchPhase::kRoundStart;
  double objective = 0.0;
};

struct MatchState {
  Tensor z;
  Tensor p;
  RbfTransform zeta;
  Tensor probs;
  double objective = 0.0;  // masked reconstruction + eta * matching objective
  int rounds = 0;
  bool converged = false;
  std::vector<MatchTraceEntry> trace;
};

// Block-coordinate descent over (latent, correspondence, transform) from the
// given latent start. Deterministic: no randomness inside. Returns the state
// with the smallest recorded objective, not necessarily the last one.
MatchState alternating_minimize(const PartialGraph& pg, const GaeModel& model,
                                const MatchConfig& cfg, const Tensor& z_init);

struct CompletionCandidate {
  ReconstructedGraph recon;
  MatchState state;
  int restart_index = 0;
};

struct CompletionResult {
  // Best objective first; near-identical reconstructions (Frobenius distance
  // below dedup_tol) are collapsed, so fewer than k candidates may remain.
  std::vector<CompletionCandidate> candidates;
};

// Multi-restart completion: restart 0 starts from the encoding of the masked
// graph, later restarts perturb it. A restart that fails numerically is
// dropped; only all restarts failing is an error.
CompletionResult complete_graph(const PartialGraph& pg, const GaeModel& model,
                                int k, const MatchConfig& cfg, Rng& rng);

}  // namespace spherad
