#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spherad/rng.hpp"
#include "spherad/tensor.hpp"

namespace spherad {

// Undirected weighted graph. `w` is a symmetric nonnegative adjacency matrix
// with zero diagonal; `x` holds one feature row per node. When no external
// features are supplied, `x` defaults to connectivity profiles (row-normalized
// adjacency) and `x_is_profile` stays true so downstream masking can re-derive
// features from observed entries only.
struct Graph {
  int n = 0;
  Tensor w;
  Tensor x;
  bool x_is_profile = true;
};

Tensor profile_features(const Tensor& w);

Graph make_graph(Tensor w);
Graph make_graph(Tensor w, Tensor x);
void validate_graph(const Graph& g);

// Adjacency is a CSV matrix or an edge list ("# edgelist n=<N>" header, then
// "i,j,w" lines). Features, when given, are a CSV with one row per node.
Graph load_graph(const std::string& adjacency_path,
                 const std::optional<std::string>& features_path = {});
void save_graph(const Graph& g, const std::string& adjacency_path,
                const std::optional<std::string>& features_path = {});

// Divides all weights by the maximum row sum (no-op for an empty graph).
Graph normalize_adjacency(const Graph& g);

// Relabels nodes: node i becomes node perm[i].
Graph permute_graph(const Graph& g, const std::vector<int>& perm);
std::vector<int> random_permutation(int n, Rng& rng);

// Observation mask over adjacency entries: 1 = observed, 0 = hidden.
// Symmetric with an all-ones diagonal (self weights are structurally zero).
struct PartialMask {
  Tensor m;
};

PartialMask full_mask(int n);
// Hides a deterministic count round(hide_fraction * pair_count) of off-diagonal
// pairs chosen by seeded shuffle.
PartialMask random_pair_mask(int n, double hide_fraction, Rng& rng);
void validate_mask(const PartialMask& mask, int n);

struct PartialGraph {
  Graph g;     // hidden entries zeroed; profile features re-derived
  Tensor mask; // the observation mask that produced it
};

PartialGraph apply_mask(const Graph& g, const PartialMask& mask);

// Generic CSV matrix helpers (scores, masks, evaluation outputs).
Tensor load_matrix_csv(const std::string& path);
void save_matrix_csv(const Tensor& t, const std::string& path);

}  // namespace spherad
