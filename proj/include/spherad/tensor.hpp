#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace spherad {

// Dense row-major matrix of doubles. Scalars are represented as 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0);

  static Tensor scalar(double x);
  static Tensor identity(int n);
  static Tensor ones(int r, int c);

  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return v[static_cast<std::size_t>(i) * cols + j];
  }

  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }
  std::string shape_str() const;

  // Value of a 1x1 tensor; throws ShapeError otherwise.
  double scalar_value() const;

  void fill(double x);
  bool operator==(const Tensor& o) const = default;
};

bool all_finite(const Tensor& t);

// Ones everywhere except an exactly-zero diagonal.
Tensor offdiag_ones(int n);

// C = A * B. C is resized; inputs must conform.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& c);
// C += A * B^T (used by backward passes).
void matmul_nt_accum(const Tensor& a, const Tensor& b, Tensor& c);
// C += A^T * B.
void matmul_tn_accum(const Tensor& a, const Tensor& b, Tensor& c);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& t);

double frobenius_distance(const Tensor& a, const Tensor& b);

// Numerically stable 1 / (1 + exp(-x)).
double logistic_scalar(double x);

// Normalizes each row to unit Euclidean length in place; rows that are
// exactly zero become the first basis vector.
void row_normalize_inplace(Tensor& t);

}  // namespace spherad
