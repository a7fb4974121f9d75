#include "spherad/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spherad/error.hpp"

namespace spherad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kHadamard: return "hadamard";
    case Op::kScalarMul: return "scalar-mul";
    case Op::kTanh: return "tanh";
    case Op::kLogistic: return "logistic";
    case Op::kRowNormalize: return "row-normalize";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSquaredNorm: return "squared-norm";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kClamp: return "clamp";
    case Op::kTranspose: return "transpose";
  }
  return "?";
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw ShapeError("invalid tape node id " + std::to_string(id));
}

int Tape::input(const Tensor& value) {
  const int id = input(value.rows, value.cols);
  bind(id, value);
  return id;
}

int Tape::input(int rows, int cols) {
  Node n;
  n.op = Op::kInput;
  n.r = rows;
  n.c = cols;
  n.val = Tensor(rows, cols);
  return push(n);
}

void Tape::bind(int leaf, const Tensor& value) {
  check_id(leaf);
  Node& n = nodes_[leaf];
  if (n.op != Op::kInput)
    throw ShapeError("bind target is not an input leaf");
  if (value.rows != n.r || value.cols != n.c)
    throw ShapeError("bind shape mismatch: leaf is " +
                     std::to_string(n.r) + "x" + std::to_string(n.c) +
                     ", value is " + value.shape_str());
  if (!all_finite(value))
    throw NumericError("non-finite value bound to input leaf");
  n.val = value;
}

int Tape::matmul(int a, int b) {
  check_id(a);
  check_id(b);
  if (nodes_[a].c != nodes_[b].r)
    throw ShapeError(std::string("matmul mismatch: ") +
                     std::to_string(nodes_[a].r) + "x" +
                     std::to_string(nodes_[a].c) + " * " +
                     std::to_string(nodes_[b].r) + "x" +
                     std::to_string(nodes_[b].c));
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.r = nodes_[a].r;
  n.c = nodes_[b].c;
  return push(n);
}

static void require_same(const char* what, int ar, int ac, int br, int bc) {
  if (ar != br || ac != bc)
    throw ShapeError(std::string(what) + " shape mismatch: " +
                     std::to_string(ar) + "x" + std::to_string(ac) + " vs " +
                     std::to_string(br) + "x" + std::to_string(bc));
}

int Tape::add(int a, int b) {
  check_id(a);
  check_id(b);
  require_same("add", nodes_[a].r, nodes_[a].c, nodes_[b].r, nodes_[b].c);
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::hadamard(int a, int b) {
  check_id(a);
  check_id(b);
  require_same("hadamard", nodes_[a].r, nodes_[a].c, nodes_[b].r, nodes_[b].c);
  Node n;
  n.op = Op::kHadamard;
  n.a = a;
  n.b = b;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::scalar_mul(int a, int scalar_node) {
  check_id(a);
  check_id(scalar_node);
  if (nodes_[scalar_node].r != 1 || nodes_[scalar_node].c != 1)
    throw ShapeError("scalar-mul multiplier must be 1x1");
  Node n;
  n.op = Op::kScalarMul;
  n.a = a;
  n.b = scalar_node;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::tanh(int a) {
  check_id(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::logistic(int a) {
  check_id(a);
  Node n;
  n.op = Op::kLogistic;
  n.a = a;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::row_normalize(int a) {
  check_id(a);
  Node n;
  n.op = Op::kRowNormalize;
  n.a = a;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::sum(int a) {
  check_id(a);
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.r = 1;
  n.c = 1;
  return push(n);
}

int Tape::mean(int a) {
  check_id(a);
  if (nodes_[a].r * nodes_[a].c == 0)
    throw ShapeError("mean of empty tensor");
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.r = 1;
  n.c = 1;
  return push(n);
}

int Tape::squared_norm(int a) {
  check_id(a);
  Node n;
  n.op = Op::kSquaredNorm;
  n.a = a;
  n.r = 1;
  n.c = 1;
  return push(n);
}

int Tape::log(int a) {
  check_id(a);
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::exp(int a) {
  check_id(a);
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::clamp(int a, double lo, double hi) {
  check_id(a);
  if (!(lo < hi)) throw ConfigError("clamp requires lo < hi");
  Node n;
  n.op = Op::kClamp;
  n.a = a;
  n.lo = lo;
  n.hi = hi;
  n.r = nodes_[a].r;
  n.c = nodes_[a].c;
  return push(n);
}

int Tape::transpose(int a) {
  check_id(a);
  Node n;
  n.op = Op::kTranspose;
  n.a = a;
  n.r = nodes_[a].c;
  n.c = nodes_[a].r;
  return push(n);
}

namespace {

void ensure_shape(Tensor& t, int r, int c) {
  if (t.rows != r || t.cols != c) {
    t.rows = r;
    t.cols = c;
    t.v.assign(static_cast<std::size_t>(r) * c, 0.0);
  }
}

}  // namespace

void Tape::forward_node(int id) {
  Node& n = nodes_[id];
  const Tensor* x = n.a >= 0 ? &nodes_[n.a].val : nullptr;
  const Tensor* y = n.b >= 0 ? &nodes_[n.b].val : nullptr;
  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kMatMul:
      matmul_into(*x, *y, n.val);
      break;
    case Op::kAdd:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = x->v[k] + y->v[k];
      break;
    case Op::kHadamard:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = x->v[k] * y->v[k];
      break;
    case Op::kScalarMul: {
      ensure_shape(n.val, n.r, n.c);
      const double s = y->v[0];
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = x->v[k] * s;
      break;
    }
    case Op::kTanh:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = std::tanh(x->v[k]);
      break;
    case Op::kLogistic:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k)
        n.val.v[k] = logistic_scalar(x->v[k]);
      break;
    case Op::kRowNormalize:
      n.val = *x;
      row_normalize_inplace(n.val);
      break;
    case Op::kSum: {
      double s = 0.0;
      for (double t : x->v) s += t;
      ensure_shape(n.val, 1, 1);
      n.val.v[0] = s;
      break;
    }
    case Op::kMean: {
      double s = 0.0;
      for (double t : x->v) s += t;
      ensure_shape(n.val, 1, 1);
      n.val.v[0] = s / x->size();
      break;
    }
    case Op::kSquaredNorm: {
      double s = 0.0;
      for (double t : x->v) s += t * t;
      ensure_shape(n.val, 1, 1);
      n.val.v[0] = s;
      break;
    }
    case Op::kLog:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = std::log(x->v[k]);
      break;
    case Op::kExp:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k) n.val.v[k] = std::exp(x->v[k]);
      break;
    case Op::kClamp:
      ensure_shape(n.val, n.r, n.c);
      for (int k = 0; k < n.val.size(); ++k)
        n.val.v[k] = std::min(n.hi, std::max(n.lo, x->v[k]));
      break;
    case Op::kTranspose:
      ensure_shape(n.val, n.r, n.c);
      for (int i = 0; i < x->rows; ++i)
        for (int j = 0; j < x->cols; ++j) n.val.at(j, i) = x->at(i, j);
      break;
  }
  if (!all_finite(n.val))
    throw NumericError(std::string("non-finite value produced by '") +
                       op_name(n.op) + "' at tape node " + std::to_string(id));
}

const Tensor& Tape::evaluate(int root) {
  check_id(root);
  for (int i = 0; i <= root; ++i) forward_node(i);
  return nodes_[root].val;
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  if (n.op == Op::kInput) return;
  const Tensor& g = n.adj;
  Tensor* da = n.a >= 0 ? &nodes_[n.a].adj : nullptr;
  Tensor* db = n.b >= 0 ? &nodes_[n.b].adj : nullptr;
  const Tensor* xa = n.a >= 0 ? &nodes_[n.a].val : nullptr;
  const Tensor* xb = n.b >= 0 ? &nodes_[n.b].val : nullptr;
  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kMatMul:
      matmul_nt_accum(g, *xb, *da);
      matmul_tn_accum(*xa, g, *db);
      break;
    case Op::kAdd:
      for (int k = 0; k < g.size(); ++k) da->v[k] += g.v[k];
      for (int k = 0; k < g.size(); ++k) db->v[k] += g.v[k];
      break;
    case Op::kHadamard:
      for (int k = 0; k < g.size(); ++k) da->v[k] += g.v[k] * xb->v[k];
      for (int k = 0; k < g.size(); ++k) db->v[k] += g.v[k] * xa->v[k];
      break;
    case Op::kScalarMul: {
      const double s = xb->v[0];
      double acc = 0.0;
      for (int k = 0; k < g.size(); ++k) {
        da->v[k] += g.v[k] * s;
        acc += g.v[k] * xa->v[k];
      }
      db->v[0] += acc;
      break;
    }
    case Op::kTanh:
      for (int k = 0; k < g.size(); ++k) {
        const double y = n.val.v[k];
        da->v[k] += g.v[k] * (1.0 - y * y);
      }
      break;
    case Op::kLogistic:
      for (int k = 0; k < g.size(); ++k) {
        const double y = n.val.v[k];
        da->v[k] += g.v[k] * y * (1.0 - y);
      }
      break;
    case Op::kRowNormalize:
      for (int i = 0; i < n.r; ++i) {
        const double* xrow = &xa->v[static_cast<std::size_t>(i) * n.c];
        const double* yrow = &n.val.v[static_cast<std::size_t>(i) * n.c];
        const double* grow = &g.v[static_cast<std::size_t>(i) * n.c];
        double* drow = &da->v[static_cast<std::size_t>(i) * n.c];
        double s = 0.0;
        for (int j = 0; j < n.c; ++j) s += xrow[j] * xrow[j];
        if (s == 0.0) continue;  // zero rows map to a constant, gradient 0
        const double inv = 1.0 / std::sqrt(s);
        double gy = 0.0;
        for (int j = 0; j < n.c; ++j) gy += grow[j] * yrow[j];
        for (int j = 0; j < n.c; ++j)
          drow[j] += (grow[j] - gy * yrow[j]) * inv;
      }
      break;
    case Op::kSum: {
      const double s = g.v[0];
      for (int k = 0; k < da->size(); ++k) da->v[k] += s;
      break;
    }
    case Op::kMean: {
      const double s = g.v[0] / xa->size();
      for (int k = 0; k < da->size(); ++k) da->v[k] += s;
      break;
    }
    case Op::kSquaredNorm: {
      const double s = 2.0 * g.v[0];
      for (int k = 0; k < da->size(); ++k) da->v[k] += s * xa->v[k];
      break;
    }
    case Op::kLog:
      for (int k = 0; k < g.size(); ++k) da->v[k] += g.v[k] / xa->v[k];
      break;
    case Op::kExp:
      for (int k = 0; k < g.size(); ++k) da->v[k] += g.v[k] * n.val.v[k];
      break;
    case Op::kClamp:
      for (int k = 0; k < g.size(); ++k) {
        const double x = xa->v[k];
        if (x > n.lo && x < n.hi) da->v[k] += g.v[k];
      }
      break;
    case Op::kTranspose:
      for (int i = 0; i < n.r; ++i)
        for (int j = 0; j < n.c; ++j)
          da->at(j, i) += g.at(i, j);
      break;
  }
}

std::vector<Tensor> Tape::gradient(int root, const std::vector<int>& wrt) {
  check_id(root);
  if (nodes_[root].r != 1 || nodes_[root].c != 1)
    throw ShapeError("gradient root must be a 1x1 scalar, got " +
                     std::to_string(nodes_[root].r) + "x" +
                     std::to_string(nodes_[root].c));
  evaluate(root);
  for (int i = 0; i <= root; ++i) {
    ensure_shape(nodes_[i].adj, nodes_[i].r, nodes_[i].c);
    nodes_[i].adj.fill(0.0);
  }
  nodes_[root].adj.v[0] = 1.0;
  for (int i = root; i >= 0; --i) backward_node(i);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (int w : wrt) {
    check_id(w);
    if (w <= root) {
      out.push_back(nodes_[w].adj);
    } else {
      out.push_back(Tensor(nodes_[w].r, nodes_[w].c));
    }
  }
  return out;
}

double Tape::finite_difference_check(int root, int leaf, double eps) {
  check_id(root);
  check_id(leaf);
  if (!(eps > 0.0)) throw DataError("finite difference step must be positive");
  if (nodes_[leaf].op != Op::kInput)
    throw ShapeError("finite difference target must be an input leaf");
  const Tensor analytic = gradient(root, {leaf})[0];
  const Tensor saved = nodes_[leaf].val;
  Tensor probe = saved;
  double worst = 0.0;
  for (int k = 0; k < saved.size(); ++k) {
    probe.v[k] = saved.v[k] + eps;
    bind(leaf, probe);
    const double f_plus = evaluate(root).scalar_value();
    probe.v[k] = saved.v[k] - eps;
    bind(leaf, probe);
    const double f_minus = evaluate(root).scalar_value();
    probe.v[k] = saved.v[k];
    const double fd = (f_plus - f_minus) / (2.0 * eps);
    const double ad = analytic.v[k];
    const double scale = std::max({1.0, std::abs(fd), std::abs(ad)});
    worst = std::max(worst, std::abs(fd - ad) / scale);
  }
  bind(leaf, saved);
  evaluate(root);
  return worst;
}

const Tensor& Tape::value(int id) const {
  check_id(id);
  return nodes_[id].val;
}

int Tape::rows(int id) const {
  check_id(id);
  return nodes_[id].r;
}

int Tape::cols(int id) const {
  check_id(id);
  return nodes_[id].c;
}

}  // namespace spherad
