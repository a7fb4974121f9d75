#include "doctest.h"

#include <cmath>

#include "spherad/error.hpp"
#include "spherad/rng.hpp"
#include "spherad/tensor.hpp"

using namespace spherad;

TEST_CASE("tensor construction and accessors") {
  Tensor t(2, 3, 1.5);
  CHECK(t.rows == 2);
  CHECK(t.cols == 3);
  CHECK(t.size() == 6);
  for (double v : t.v) CHECK(v == 1.5);
  t.at(1, 2) = -4.0;
  CHECK(t.at(1, 2) == -4.0);
  CHECK(t.v[5] == -4.0);

  CHECK(Tensor::scalar(3.25).scalar_value() == 3.25);
  CHECK_THROWS_AS(Tensor(2, 2).scalar_value(), ShapeError);

  const Tensor id = Tensor::identity(3);
  CHECK(id.at(0, 0) == 1.0);
  CHECK(id.at(0, 1) == 0.0);

  const Tensor od = offdiag_ones(3);
  CHECK(od.at(1, 1) == 0.0);
  CHECK(od.at(0, 2) == 1.0);
}

TEST_CASE("matmul against hand-computed product") {
  Tensor a(2, 3);
  Tensor b(3, 2);
  double av[] = {1, 2, 3, 4, 5, 6};
  double bv[] = {7, 8, 9, 10, 11, 12};
  a.v.assign(av, av + 6);
  b.v.assign(bv, bv + 6);
  const Tensor c = matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.at(0, 0) == 58.0);
  CHECK(c.at(0, 1) == 64.0);
  CHECK(c.at(1, 0) == 139.0);
  CHECK(c.at(1, 1) == 154.0);

  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("matmul by identity is the identity map") {
  Rng rng(11);
  Tensor m(3, 3);
  for (double& v : m.v) v = rng.uniform() * 2.0 - 1.0;
  CHECK(matmul(Tensor::identity(3), m) == m);
  CHECK(matmul(m, Tensor::identity(3)) == m);
}

TEST_CASE("transpose and frobenius distance") {
  Tensor a(2, 3);
  for (int i = 0; i < 6; ++i) a.v[i] = i;
  const Tensor at = transpose(a);
  CHECK(at.rows == 3);
  CHECK(at.cols == 2);
  CHECK(at.at(2, 1) == a.at(1, 2));

  Tensor b = a;
  b.at(0, 0) += 3.0;
  b.at(1, 2) += 4.0;
  CHECK(frobenius_distance(a, b) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("logistic scalar is stable and symmetric") {
  CHECK(logistic_scalar(0.0) == 0.5);
  CHECK(std::isfinite(logistic_scalar(800.0)));
  CHECK(std::isfinite(logistic_scalar(-800.0)));
  CHECK(logistic_scalar(800.0) <= 1.0);
  CHECK(logistic_scalar(-800.0) >= 0.0);
  CHECK(logistic_scalar(-700.0) > 0.0);
  CHECK(logistic_scalar(-700.0) < 1e-300);
  const double p = logistic_scalar(1.7);
  CHECK(p + logistic_scalar(-1.7) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("row normalization gives unit rows, zero rows map to e1") {
  Rng rng(5);
  Tensor t(6, 4);
  for (double& v : t.v) v = rng.uniform() * 2.0 - 1.0;
  for (int j = 0; j < 4; ++j) t.at(2, j) = 0.0;
  row_normalize_inplace(t);
  for (int i = 0; i < 6; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < 4; ++j) norm2 += t.at(i, j) * t.at(i, j);
    CHECK(std::fabs(std::sqrt(norm2) - 1.0) <= 1e-12);
  }
  CHECK(t.at(2, 0) == 1.0);
  CHECK(t.at(2, 1) == 0.0);
  CHECK(t.at(2, 2) == 0.0);
  CHECK(t.at(2, 3) == 0.0);
}

TEST_CASE("all_finite flags NaN and infinity anywhere") {
  Tensor t(2, 2, 1.0);
  CHECK(all_finite(t));
  t.at(1, 0) = std::nan("");
  CHECK_FALSE(all_finite(t));
  t.at(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(t));
}
