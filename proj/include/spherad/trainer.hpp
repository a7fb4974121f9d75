#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spherad/adam.hpp"
#include "spherad/gae.hpp"
#include "spherad/graph.hpp"

namespace spherad {

// Graph-level critic: one polynomial filter layer, tanh, mean readout over
// nodes, then a two-layer dense head to a single logit. Inputs are an
// adjacency matrix and per-node features with d_in = n (connectivity
// profiles), so a critic is tied to the node count it was built for.
struct Discriminator {
  int feat_dim = 0;
  int filter_dim = 0;
  int hidden_dim = 0;
  PolyFilterLayer filt;
  Tensor w1, b1;  // filter_dim x hidden, 1 x hidden
  Tensor w2, b2;  // hidden x 1, 1 x 1

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  static std::vector<std::string> param_names();
};

// Final layer starts at zero so an untrained critic outputs probability 1/2.
Discriminator init_discriminator(int feat_dim, int filter_dim, int hidden_dim,
                                 Rng& rng);
void validate_discriminator(const Discriminator& d);

// Probability that (a, v) is a real graph under the critic.
double discriminate(const Discriminator& d, const Tensor& a, const Tensor& v);

struct GanLosses {
  double disc = 0.0;  // -(log d_real + log(1 - d_fake))
  double gen = 0.0;   // -log d_fake (non-saturating form)
};

// Probabilities are clamped away from {0, 1} before the logs.
GanLosses gan_losses(double d_real, double d_fake);

double total_loss(const LossBreakdown& b);

enum class GanForm { kNonSaturating, kMinimax };
GanForm gan_form_from_string(const std::string& s);
std::string to_string(GanForm f);

struct TrainConfig {
  int epochs = 300;
  double lr_gen = 0.01;
  double lr_disc = 0.005;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  int hidden_dim = 32;
  int latent_dim = 8;
  double kappa = 20.0;
  int disc_filter_dim = 16;
  int disc_hidden_dim = 16;
  int disc_steps = 1;  // critic updates per generator update
  bool sample_latent = true;
  LossVariant variant = LossVariant::kCrossEntropy;
  GanForm gan_form = GanForm::kNonSaturating;
  std::uint64_t seed = 1;
  int log_every = 0;  // 0 = silent; otherwise progress line every k epochs

  // Test instrumentation. `train_unweighted_critic` forces critic updates
  // even when lambda2 = 0 (the generator objective is unchanged, which the
  // weighted-term isolation test relies on). `check_isolation` checksums each
  // network around the other's optimizer step and throws on any cross-write.
  bool train_unweighted_critic = false;
  bool check_isolation = false;
};

struct EpochRecord {
  LossBreakdown loss;       // per-graph means; total recomputed from means
  double disc_loss = 0.0;   // mean critic loss (0 when the critic is off)
  double seconds = 0.0;     // wall clock; excluded from determinism contracts
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  GaeModel model;
  Discriminator disc;
  TrainHistory history;
  std::string rng_state;  // generator state after the final epoch
};

// Trains on a homogeneous dataset (equal node counts and feature dims).
// Deterministic given (dataset, config): records and learned parameters
// reproduce bit for bit, although the `seconds` fields will differ.
TrainResult train(const std::vector<Graph>& dataset, const TrainConfig& cfg);

// Serialize the loss columns of a history as CSV (excludes wall-clock).
std::string history_csv(const TrainHistory& h);

}  // namespace spherad
