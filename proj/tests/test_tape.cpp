#include "doctest.h"

#include <cmath>
#include <string>

#include "spherad/error.hpp"
#include "spherad/rng.hpp"
#include "spherad/tape.hpp"
#include "spherad/tensor.hpp"

using namespace spherad;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.v) v = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("logistic at zero evaluates to one half") {
  Tape tape;
  const int x = tape.input(Tensor(2, 2, 0.0));
  const Tensor out = tape.evaluate(tape.logistic(x));
  for (double v : out.v) CHECK(v == 0.5);
}

TEST_CASE("matmul with the identity reproduces the operand") {
  Rng rng(3);
  const Tensor m = random_tensor(3, 3, rng);
  Tape tape;
  const int a = tape.input(Tensor::identity(3));
  const int b = tape.input(m);
  CHECK(tape.evaluate(tape.matmul(a, b)) == m);
}

TEST_CASE("sum of [[1,2],[3,4]] times identity is 10") {
  Tensor m(2, 2);
  m.v = {1, 2, 3, 4};
  Tape tape;
  const int prod = tape.matmul(tape.input(m), tape.input(Tensor::identity(2)));
  CHECK(tape.evaluate(tape.sum(prod)).scalar_value() == 10.0);
}

TEST_CASE("evaluate is deterministic bit for bit") {
  Rng rng(17);
  Tape tape;
  const int x = tape.input(random_tensor(4, 4, rng));
  const int y = tape.input(random_tensor(4, 4, rng));
  const int root = tape.sum(tape.tanh(tape.matmul(x, y)));
  const Tensor first = tape.evaluate(root);
  const Tensor second = tape.evaluate(root);
  CHECK(first == second);
}

TEST_CASE("derivative of x squared at 3 is 6") {
  Tape tape;
  const int x = tape.input(Tensor::scalar(3.0));
  const int root = tape.hadamard(x, x);
  const auto grads = tape.gradient(root, {x});
  CHECK(grads[0].scalar_value() == 6.0);
}

TEST_CASE("gradient of sum(A I) is all ones and matches differences") {
  Rng rng(7);
  Tape tape;
  const int a = tape.input(random_tensor(3, 3, rng));
  const int root = tape.sum(tape.matmul(a, tape.input(Tensor::identity(3))));
  const auto grads = tape.gradient(root, {a});
  for (double v : grads[0].v) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tape.finite_difference_check(root, a, 1e-5) < 1e-7);
}

TEST_CASE("leaf outside the graph gets a zero gradient of its own shape") {
  Tape tape;
  const int x = tape.input(Tensor::scalar(2.0));
  const int unused = tape.input(Tensor(3, 2, 1.0));
  const int root = tape.hadamard(x, x);
  const auto grads = tape.gradient(root, {unused});
  CHECK(grads[0].rows == 3);
  CHECK(grads[0].cols == 2);
  for (double v : grads[0].v) CHECK(v == 0.0);
}

TEST_CASE("gradient requires a scalar root") {
  Tape tape;
  const int x = tape.input(Tensor(2, 2, 1.0));
  CHECK_THROWS_AS(tape.gradient(x, {x}), ShapeError);
}

TEST_CASE("shape mismatch errors carry both shapes") {
  Tape tape;
  const int a = tape.input(Tensor(2, 3));
  const int b = tape.input(Tensor(2, 3));
  try {
    tape.matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(tape.add(a, tape.input(Tensor(3, 2))), ShapeError);
  CHECK_THROWS_AS(tape.hadamard(a, tape.input(Tensor(2, 2))), ShapeError);
  CHECK_THROWS_AS(tape.scalar_mul(a, b), ShapeError);
}

TEST_CASE("non-finite intermediates are reported with the op kind") {
  Tape tape;
  const int x = tape.input(Tensor::scalar(-1.0));
  const int root = tape.log(x);
  try {
    tape.evaluate(root);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
}

TEST_CASE("binding a non-finite tensor is rejected") {
  Tape tape;
  const int x = tape.input(2, 2);
  Tensor bad(2, 2, 1.0);
  bad.at(0, 1) = std::nan("");
  CHECK_THROWS_AS(tape.bind(x, bad), NumericError);
  CHECK_THROWS_AS(tape.bind(x, Tensor(3, 2, 1.0)), ShapeError);
}

TEST_CASE("finite difference error is zero for a constant expression") {
  Tape tape;
  const int x = tape.input(Tensor(2, 2, 0.25));
  const int c = tape.input(Tensor::scalar(4.0));
  const int root = tape.hadamard(c, c);  // independent of x
  CHECK(tape.finite_difference_check(root, x, 1e-5) == 0.0);
}

TEST_CASE("quadratic loss gradient error stays below 1e-7") {
  Rng rng(23);
  Tape tape;
  const int x = tape.input(random_tensor(4, 3, rng));
  const int t = tape.input(random_tensor(4, 3, rng));
  const int neg = tape.input(Tensor::scalar(-1.0));
  const int diff = tape.add(x, tape.scalar_mul(t, neg));
  const int root = tape.squared_norm(diff);
  CHECK(tape.finite_difference_check(root, x, 1e-5) < 1e-7);
}

TEST_CASE("every op kind passes the gradient check on random inputs") {
  Rng rng(101);
  const double eps = 1e-5;
  const double tol = 1e-4;

  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 4, rng));
    const int b = tape.input(random_tensor(4, 2, rng));
    const int root = tape.squared_norm(tape.matmul(a, b));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
    CHECK(tape.finite_difference_check(root, b, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int b = tape.input(random_tensor(3, 3, rng));
    const int root = tape.squared_norm(tape.add(a, b));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int b = tape.input(random_tensor(3, 3, rng));
    const int root = tape.squared_norm(tape.hadamard(a, b));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
    CHECK(tape.finite_difference_check(root, b, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int s = tape.input(Tensor::scalar(0.7));
    const int root = tape.squared_norm(tape.scalar_mul(a, s));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
    CHECK(tape.finite_difference_check(root, s, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int root = tape.squared_norm(tape.tanh(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int root = tape.squared_norm(tape.logistic(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 4, rng, 0.2, 1.0));
    const int root = tape.squared_norm(tape.row_normalize(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    CHECK(tape.finite_difference_check(tape.sum(a), a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    CHECK(tape.finite_difference_check(tape.mean(a), a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    CHECK(tape.finite_difference_check(tape.squared_norm(a), a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng, 0.5, 1.5));
    const int root = tape.sum(tape.log(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 3, rng));
    const int root = tape.sum(tape.exp(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    // Entries kept clear of the clamp edges so central differences are valid.
    Tape tape;
    Tensor t = random_tensor(3, 3, rng);
    for (double& v : t.v) {
      if (std::fabs(v - 0.5) < 0.01) v = 0.4;
      if (std::fabs(v + 0.5) < 0.01) v = -0.4;
    }
    const int a = tape.input(t);
    const int root = tape.squared_norm(tape.clamp(a, -0.5, 0.5));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
  {
    Tape tape;
    const int a = tape.input(random_tensor(3, 4, rng));
    const int root = tape.squared_norm(tape.transpose(a));
    CHECK(tape.finite_difference_check(root, a, eps) < tol);
  }
}

TEST_CASE("row normalize zero rows map to e1 with zero gradient") {
  Tape tape;
  Tensor t(2, 3);
  t.at(0, 0) = 3.0;  // row 1 stays all zero
  const int a = tape.input(t);
  const int rn = tape.row_normalize(a);
  const Tensor out = tape.evaluate(rn);
  CHECK(out.at(0, 0) == 1.0);
  CHECK(out.at(1, 0) == 1.0);
  CHECK(out.at(1, 1) == 0.0);

  const int root = tape.squared_norm(tape.hadamard(rn, rn));
  const auto grads = tape.gradient(root, {a});
  CHECK(grads[0].at(1, 0) == 0.0);
  CHECK(grads[0].at(1, 1) == 0.0);
  CHECK(grads[0].at(1, 2) == 0.0);
}

TEST_CASE("clamp gradient passes only strictly inside the interval") {
  Tape tape;
  Tensor t(1, 3);
  t.v = {-2.0, 0.0, 2.0};
  const int a = tape.input(t);
  const int root = tape.sum(tape.clamp(a, -1.0, 1.0));
  const auto grads = tape.gradient(root, {a});
  CHECK(grads[0].v[0] == 0.0);
  CHECK(grads[0].v[1] == 1.0);
  CHECK(grads[0].v[2] == 0.0);
  CHECK_THROWS_AS(tape.clamp(a, 1.0, -1.0), ConfigError);
}

TEST_CASE("rebinding an input leaf re-evaluates the same graph") {
  Tape tape;
  const int x = tape.input(Tensor::scalar(2.0));
  const int root = tape.hadamard(x, x);
  CHECK(tape.evaluate(root).scalar_value() == 4.0);
  tape.bind(x, Tensor::scalar(5.0));
  CHECK(tape.evaluate(root).scalar_value() == 25.0);
  const auto grads = tape.gradient(root, {x});
  CHECK(grads[0].scalar_value() == 10.0);
}
