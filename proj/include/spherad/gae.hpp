#pragma once

#include <string>
#include <vector>

#include "spherad/graph.hpp"
#include "spherad/rng.hpp"
#include "spherad/tape.hpp"

namespace spherad {

// Polynomial filter in the adjacency with three matrix-valued taps:
// out = V h0 + (A V) h1 + (A^2 V) h2 + bias.
struct PolyFilterLayer {
  Tensor h0, h1, h2;  // d_in x d_out
  Tensor bias;        // 1 x d_out
};

PolyFilterLayer init_filter_layer(int d_in, int d_out, Rng& rng);
Tensor poly_filter_forward(const PolyFilterLayer& layer, const Tensor& a,
                           const Tensor& v);

enum class LossVariant { kCrossEntropy, kQuadratic };
LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

// Spherical graph autoencoder. The encoder stacks two filter layers with a
// tanh between and row-normalizes the output onto the unit sphere; the
// decoder scores node pairs with a symmetric bilinear form plus bias through
// a logistic. The posterior concentration kappa is a fixed model constant.
struct GaeModel {
  int feat_dim = 0;
  int hidden_dim = 0;
  int latent_dim = 0;
  double kappa = 0.0;
  PolyFilterLayer enc1, enc2;
  Tensor dec_u;     // latent x latent, used as the symmetric part (u + u^T)/2
  Tensor dec_bias;  // 1x1

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  static std::vector<std::string> param_names();
};

GaeModel init_gae_model(int feat_dim, int hidden_dim, int latent_dim,
                        double kappa, Rng& rng);
void validate_model(const GaeModel& model);

struct VmfPosterior {
  Tensor mu;  // n x latent, unit rows
  double kappa = 0.0;
};

struct ReconstructedGraph {
  Tensor probs;  // n x n, symmetric, zero diagonal, off-diagonal in (0, 1)
};

VmfPosterior encode(const GaeModel& model, const Graph& g);
Tensor sample_posterior(const VmfPosterior& post, Rng& rng);
ReconstructedGraph decode(const GaeModel& model, const Tensor& z);

struct LossBreakdown {
  double recon = 0.0;
  double prior = 0.0;
  double adversarial = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double total = 0.0;
};

// Reconstruction target: binarized adjacency (cross-entropy) or min-max
// scaled weights (quadratic), zero diagonal either way.
Tensor recon_target(const Graph& g, LossVariant variant);

// Entrywise loss mask: observation mask (if any) with the diagonal zeroed.
// The diagonal never contributes, reconstructions are structurally zero there.
Tensor make_loss_mask(const Tensor* observation_mask, int n);

// Mean per-entry loss over unmasked off-diagonal entries.
double reconstruction_loss(const Graph& g, const ReconstructedGraph& recon,
                           const Tensor* observation_mask, LossVariant variant);

// Prior alignment term: n * KL(vMF(., kappa) || uniform sphere). Constant in
// the model parameters because kappa is fixed.
double prior_alignment_loss(const GaeModel& model, int n);

LossBreakdown elbo_loss(const GaeModel& model, const Graph& g,
                        bool sample_latent, Rng* rng, double lambda1,
                        LossVariant variant);

// --- Tape wiring -----------------------------------------------------------
// The helpers below append the model's computation to a caller-owned tape so
// that training, gradient checks, and completion all share one definition of
// the forward pass. Leaf structs mirror the parameter structs; bind_* copies
// current parameter values onto the tape.

struct FilterLeaves {
  int h0 = -1, h1 = -1, h2 = -1, bias = -1;
};

struct GaeLeaves {
  FilterLeaves enc1, enc2;
  int dec_u = -1, dec_bias = -1;
};

FilterLeaves add_filter_leaves(Tape& tape, int d_in, int d_out);
void bind_filter_leaves(Tape& tape, const FilterLeaves& leaves,
                        const PolyFilterLayer& layer);
std::vector<int> filter_leaf_list(const FilterLeaves& leaves);

// out = V h0 + (A V) h1 + (A^2 V) h2 + bias (bias broadcast over rows).
int build_filter(Tape& tape, const FilterLeaves& leaves, int a, int v);

GaeLeaves add_gae_leaves(Tape& tape, const GaeModel& model);
void bind_gae_leaves(Tape& tape, const GaeLeaves& leaves,
                     const GaeModel& model);
std::vector<int> gae_leaf_list(const GaeLeaves& leaves);

int build_encoder(Tape& tape, const GaeLeaves& leaves, int a, int v);

// Reflects pole-frame unit draws (noise leaf, one row per node, pole on the
// last axis) onto each row's posterior mean direction.
int build_pole_transport(Tape& tape, int mu, int noise);

int build_decoder(Tape& tape, const GaeLeaves& leaves, int z);

// Masked mean reconstruction loss over the probs node. `mask` must already
// exclude the diagonal; `inv_count` is a 1x1 leaf holding 1/#unmasked.
int build_recon_loss(Tape& tape, int probs, int target, int mask,
                     int inv_count, LossVariant variant);

}  // namespace spherad
