#include "spherad/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "spherad/error.hpp"

namespace spherad {

Tensor::Tensor(int r, int c, double fill)
    : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
}

Tensor Tensor::scalar(double x) {
  Tensor t(1, 1);
  t.v[0] = x;
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::ones(int r, int c) { return Tensor(r, c, 1.0); }

std::string Tensor::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

double Tensor::scalar_value() const {
  if (rows != 1 || cols != 1)
    throw ShapeError("expected 1x1 tensor, got " + shape_str());
  return v[0];
}

void Tensor::fill(double x) { std::fill(v.begin(), v.end(), x); }

Tensor offdiag_ones(int n) {
  Tensor t = Tensor::ones(n, n);
  for (int i = 0; i < n; ++i) t.at(i, i) = 0.0;
  return t;
}

bool all_finite(const Tensor& t) {
  // Summing first is cheaper than per-entry isfinite in the common case; a
  // non-finite sum triggers the exact scan. A finite sum of finite values can
  // only be reported finite, and any NaN/Inf entry poisons the sum.
  double s = 0.0;
  for (double x : t.v) s += x;
  if (std::isfinite(s)) return true;
  return std::all_of(t.v.begin(), t.v.end(),
                     [](double x) { return std::isfinite(x); });
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols != b.rows)
    throw ShapeError("matmul mismatch: " + a.shape_str() + " * " +
                     b.shape_str());
  const int m = a.rows, k = a.cols, n = b.cols;
  c.rows = m;
  c.cols = n;
  c.v.assign(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    double* crow = &c.v[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double aip = a.v[static_cast<std::size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = &b.v[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_nt_accum(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt mismatch: " + a.shape_str() + " * " +
                     b.shape_str() + "^T");
  if (c.rows != a.rows || c.cols != b.rows)
    throw ShapeError("matmul_nt output shape mismatch");
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.v[static_cast<std::size_t>(i) * k];
    double* crow = &c.v[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) {
      const double* brow = &b.v[static_cast<std::size_t>(j) * k];
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void matmul_tn_accum(const Tensor& a, const Tensor& b, Tensor& c) {
  if (a.rows != b.rows)
    throw ShapeError("matmul_tn mismatch: " + a.shape_str() + "^T * " +
                     b.shape_str());
  if (c.rows != a.cols || c.cols != b.cols)
    throw ShapeError("matmul_tn output shape mismatch");
  const int m = a.cols, k = a.rows, n = b.cols;
  for (int p = 0; p < k; ++p) {
    const double* arow = &a.v[static_cast<std::size_t>(p) * m];
    const double* brow = &b.v[static_cast<std::size_t>(p) * n];
    for (int i = 0; i < m; ++i) {
      const double aip = arow[i];
      if (aip == 0.0) continue;
      double* crow = &c.v[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c;
  matmul_into(a, b, c);
  return c;
}

Tensor transpose(const Tensor& t) {
  Tensor r(t.cols, t.rows);
  for (int i = 0; i < t.rows; ++i)
    for (int j = 0; j < t.cols; ++j) r.at(j, i) = t.at(i, j);
  return r;
}

double frobenius_distance(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError("frobenius_distance shape mismatch: " + a.shape_str() +
                     " vs " + b.shape_str());
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) {
    const double d = a.v[k] - b.v[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double logistic_scalar(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void row_normalize_inplace(Tensor& t) {
  for (int i = 0; i < t.rows; ++i) {
    double* row = &t.v[static_cast<std::size_t>(i) * t.cols];
    double s = 0.0;
    for (int j = 0; j < t.cols; ++j) s += row[j] * row[j];
    if (s == 0.0) {
      if (t.cols > 0) row[0] = 1.0;
      continue;
    }
    const double inv = 1.0 / std::sqrt(s);
    for (int j = 0; j < t.cols; ++j) row[j] *= inv;
  }
}

}  // namespace spherad
