#pragma once

#include <cstdint>
#include <vector>

#include "spherad/tensor.hpp"

namespace spherad {

enum class Op : std::uint8_t {
  kInput,
  kMatMul,
  kAdd,
  kHadamard,
  kScalarMul,
  kTanh,
  kLogistic,
  kRowNormalize,
  kSum,
  kMean,
  kSquaredNorm,
  kLog,
  kExp,
  kClamp,
  kTranspose,
};

const char* op_name(Op op);

// Reverse-mode expression tape over Tensor values.
//
// Nodes are created in topological order and identified by index. Input
// leaves are rebindable: once created with a shape, new values of the same
// shape can be bound and the graph re-evaluated, so one tape serves many
// forward/backward passes. evaluate() recomputes every node up to the
// requested root and checks each intermediate for non-finite entries.
class Tape {
 public:
  int input(const Tensor& value);
  int input(int rows, int cols);
  void bind(int leaf, const Tensor& value);

  int matmul(int a, int b);
  int add(int a, int b);
  int hadamard(int a, int b);
  // Elementwise product by a scalar held in a 1x1 node.
  int scalar_mul(int a, int scalar_node);
  int tanh(int a);
  int logistic(int a);
  int row_normalize(int a);
  int sum(int a);
  int mean(int a);
  int squared_norm(int a);
  int log(int a);
  int exp(int a);
  int clamp(int a, double lo, double hi);
  int transpose(int a);

  // Recomputes nodes [0, root] and returns the root value.
  const Tensor& evaluate(int root);

  // Gradients of the scalar at `root` with respect to each node in `wrt`.
  // Runs a fresh forward pass first. Nodes that do not influence the root
  // get a zero gradient of their own shape.
  std::vector<Tensor> gradient(int root, const std::vector<int>& wrt);

  // Central-difference validation of d(root)/d(leaf): perturbs every entry of
  // the leaf by +/- eps and returns the maximum over entries of
  // |fd - ad| / max(1, |fd|, |ad|).
  double finite_difference_check(int root, int leaf, double eps);

  const Tensor& value(int id) const;
  int rows(int id) const;
  int cols(int id) const;
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int r = 0;
    int c = 0;
    double lo = 0.0;
    double hi = 0.0;
    Tensor val;
    Tensor adj;
  };

  int push(Node n);
  void check_id(int id) const;
  void forward_node(int id);
  void backward_node(int id);

  std::vector<Node> nodes_;
};

}  // namespace spherad
