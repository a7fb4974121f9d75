#include "spherad/gae.hpp"

#include <cmath>
#include <string>

#include "spherad/error.hpp"
#include "spherad/vmf.hpp"

namespace spherad {

namespace {

constexpr double kProbClamp = 1e-7;

Tensor gaussian_init(int rows, int cols, double stddev, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.v) v = stddev * rng.normal();
  return t;
}

}  // namespace

PolyFilterLayer init_filter_layer(int d_in, int d_out, Rng& rng) {
  if (d_in <= 0 || d_out <= 0)
    throw ConfigError("filter layer dimensions must be positive");
  const double stddev = std::sqrt(2.0 / (d_in + d_out));
  PolyFilterLayer layer;
  layer.h0 = gaussian_init(d_in, d_out, stddev, rng);
  layer.h1 = gaussian_init(d_in, d_out, stddev, rng);
  layer.h2 = gaussian_init(d_in, d_out, stddev, rng);
  layer.bias = Tensor(1, d_out);
  return layer;
}

FilterLeaves add_filter_leaves(Tape& tape, int d_in, int d_out) {
  FilterLeaves leaves;
  leaves.h0 = tape.input(d_in, d_out);
  leaves.h1 = tape.input(d_in, d_out);
  leaves.h2 = tape.input(d_in, d_out);
  leaves.bias = tape.input(1, d_out);
  return leaves;
}

void bind_filter_leaves(Tape& tape, const FilterLeaves& leaves,
                        const PolyFilterLayer& layer) {
  tape.bind(leaves.h0, layer.h0);
  tape.bind(leaves.h1, layer.h1);
  tape.bind(leaves.h2, layer.h2);
  tape.bind(leaves.bias, layer.bias);
}

std::vector<int> filter_leaf_list(const FilterLeaves& leaves) {
  return {leaves.h0, leaves.h1, leaves.h2, leaves.bias};
}

int build_filter(Tape& tape, const FilterLeaves& leaves, int a, int v) {
  const int n = tape.rows(v);
  const int av = tape.matmul(a, v);
  const int aav = tape.matmul(a, av);
  const int t0 = tape.matmul(v, leaves.h0);
  const int t1 = tape.matmul(av, leaves.h1);
  const int t2 = tape.matmul(aav, leaves.h2);
  const int ones_col = tape.input(Tensor::ones(n, 1));
  const int bias_rows = tape.matmul(ones_col, leaves.bias);
  return tape.add(tape.add(t0, t1), tape.add(t2, bias_rows));
}

Tensor poly_filter_forward(const PolyFilterLayer& layer, const Tensor& a,
                           const Tensor& v) {
  if (a.rows != a.cols)
    throw ShapeError("filter adjacency must be square, got " + a.shape_str());
  if (v.rows != a.rows)
    throw ShapeError("filter feature rows " + std::to_string(v.rows) +
                     " do not match adjacency size " + std::to_string(a.rows));
  Tape tape;
  const int al = tape.input(a);
  const int vl = tape.input(v);
  FilterLeaves leaves = add_filter_leaves(tape, layer.h0.rows, layer.h0.cols);
  bind_filter_leaves(tape, leaves, layer);
  return tape.evaluate(build_filter(tape, leaves, al, vl));
}

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "cross-entropy") return LossVariant::kCrossEntropy;
  if (s == "quadratic") return LossVariant::kQuadratic;
  throw ConfigError("unknown loss variant '" + s +
                    "' (expected 'cross-entropy' or 'quadratic')");
}

std::string to_string(LossVariant v) {
  return v == LossVariant::kCrossEntropy ? "cross-entropy" : "quadratic";
}

std::vector<Tensor*> GaeModel::params() {
  return {&enc1.h0, &enc1.h1, &enc1.h2, &enc1.bias,
          &enc2.h0, &enc2.h1, &enc2.h2, &enc2.bias,
          &dec_u,   &dec_bias};
}

std::vector<const Tensor*> GaeModel::params() const {
  return {&enc1.h0, &enc1.h1, &enc1.h2, &enc1.bias,
          &enc2.h0, &enc2.h1, &enc2.h2, &enc2.bias,
          &dec_u,   &dec_bias};
}

std::vector<std::string> GaeModel::param_names() {
  return {"enc1.h0", "enc1.h1", "enc1.h2", "enc1.bias",
          "enc2.h0", "enc2.h1", "enc2.h2", "enc2.bias",
          "dec.u",   "dec.bias"};
}

GaeModel init_gae_model(int feat_dim, int hidden_dim, int latent_dim,
                        double kappa, Rng& rng) {
  if (latent_dim < 2)
    throw ConfigError("latent dimension must be at least 2 for a spherical "
                      "posterior, got " + std::to_string(latent_dim));
  GaeModel m;
  m.feat_dim = feat_dim;
  m.hidden_dim = hidden_dim;
  m.latent_dim = latent_dim;
  m.kappa = kappa;
  m.enc1 = init_filter_layer(feat_dim, hidden_dim, rng);
  m.enc2 = init_filter_layer(hidden_dim, latent_dim, rng);
  m.dec_u = gaussian_init(latent_dim, latent_dim,
                          std::sqrt(1.0 / latent_dim), rng);
  m.dec_bias = Tensor(1, 1);
  validate_model(m);
  return m;
}

void validate_model(const GaeModel& m) {
  if (m.feat_dim <= 0 || m.hidden_dim <= 0 || m.latent_dim < 2)
    throw ConfigError("model dimensions invalid");
  if (!(m.kappa >= 0.0) || !std::isfinite(m.kappa))
    throw ConfigError("model concentration must be finite and nonnegative");
  auto expect = [](const Tensor& t, int r, int c, const std::string& name) {
    if (t.rows != r || t.cols != c)
      throw ConfigError("parameter " + name + " has shape " + t.shape_str() +
                        ", expected " + std::to_string(r) + "x" +
                        std::to_string(c));
    if (!all_finite(t))
      throw NumericError("non-finite entries in parameter " + name);
  };
  expect(m.enc1.h0, m.feat_dim, m.hidden_dim, "enc1.h0");
  expect(m.enc1.h1, m.feat_dim, m.hidden_dim, "enc1.h1");
  expect(m.enc1.h2, m.feat_dim, m.hidden_dim, "enc1.h2");
  expect(m.enc1.bias, 1, m.hidden_dim, "enc1.bias");
  expect(m.enc2.h0, m.hidden_dim, m.latent_dim, "enc2.h0");
  expect(m.enc2.h1, m.hidden_dim, m.latent_dim, "enc2.h1");
  expect(m.enc2.h2, m.hidden_dim, m.latent_dim, "enc2.h2");
  expect(m.enc2.bias, 1, m.latent_dim, "enc2.bias");
  expect(m.dec_u, m.latent_dim, m.latent_dim, "dec.u");
  expect(m.dec_bias, 1, 1, "dec.bias");
}

GaeLeaves add_gae_leaves(Tape& tape, const GaeModel& model) {
  GaeLeaves leaves;
  leaves.enc1 = add_filter_leaves(tape, model.feat_dim, model.hidden_dim);
  leaves.enc2 = add_filter_leaves(tape, model.hidden_dim, model.latent_dim);
  leaves.dec_u = tape.input(model.latent_dim, model.latent_dim);
  leaves.dec_bias = tape.input(1, 1);
  return leaves;
}

void bind_gae_leaves(Tape& tape, const GaeLeaves& leaves,
                     const GaeModel& model) {
  bind_filter_leaves(tape, leaves.enc1, model.enc1);
  bind_filter_leaves(tape, leaves.enc2, model.enc2);
  tape.bind(leaves.dec_u, model.dec_u);
  tape.bind(leaves.dec_bias, model.dec_bias);
}

std::vector<int> gae_leaf_list(const GaeLeaves& leaves) {
  std::vector<int> out = filter_leaf_list(leaves.enc1);
  for (int id : filter_leaf_list(leaves.enc2)) out.push_back(id);
  out.push_back(leaves.dec_u);
  out.push_back(leaves.dec_bias);
  return out;
}

int build_encoder(Tape& tape, const GaeLeaves& leaves, int a, int v) {
  const int pre1 = build_filter(tape, leaves.enc1, a, v);
  const int act1 = tape.tanh(pre1);
  const int pre2 = build_filter(tape, leaves.enc2, a, act1);
  return tape.row_normalize(pre2);
}

int build_pole_transport(Tape& tape, int mu, int noise) {
  const int n = tape.rows(mu);
  const int m = tape.cols(mu);
  Tensor pole_rows(n, m);
  for (int i = 0; i < n; ++i) pole_rows.at(i, m - 1) = 1.0;
  const int pole = tape.input(pole_rows);
  const int neg1 = tape.input(Tensor::scalar(-1.0));
  const int neg2 = tape.input(Tensor::scalar(-2.0));
  const int diff = tape.add(pole, tape.scalar_mul(mu, neg1));
  // When a posterior mean equals the pole exactly, its difference row is zero
  // and row_normalize maps it to the first basis vector. That vector is
  // orthogonal to the pole (the last axis), so the induced reflection fixes
  // the pole and the transported draw keeps the intended distribution.
  const int u = tape.row_normalize(diff);
  const int rowdot =
      tape.matmul(tape.hadamard(u, noise), tape.input(Tensor::ones(m, 1)));
  const int bcast = tape.matmul(rowdot, tape.input(Tensor::ones(1, m)));
  return tape.add(noise, tape.scalar_mul(tape.hadamard(bcast, u), neg2));
}

namespace {

int build_decoder_impl(Tape& tape, int z, int dec_u, int dec_bias) {
  const int n = tape.rows(z);
  const int half = tape.input(Tensor::scalar(0.5));
  const int bsym = tape.scalar_mul(tape.add(dec_u, tape.transpose(dec_u)), half);
  const int s0 = tape.matmul(tape.matmul(z, bsym), tape.transpose(z));
  // Averaging with the transpose makes the score matrix symmetric at the bit
  // level, not just mathematically.
  const int ssym = tape.scalar_mul(tape.add(s0, tape.transpose(s0)), half);
  const int biased =
      tape.add(ssym, tape.scalar_mul(tape.input(Tensor::ones(n, n)), dec_bias));
  return tape.hadamard(tape.logistic(biased), tape.input(offdiag_ones(n)));
}

}  // namespace

int build_decoder(Tape& tape, const GaeLeaves& leaves, int z) {
  return build_decoder_impl(tape, z, leaves.dec_u, leaves.dec_bias);
}

int build_recon_loss(Tape& tape, int probs, int target, int mask,
                     int inv_count, LossVariant variant) {
  const int neg1 = tape.input(Tensor::scalar(-1.0));
  if (variant == LossVariant::kQuadratic) {
    const int diff = tape.add(probs, tape.scalar_mul(target, neg1));
    const int masked = tape.hadamard(diff, mask);
    return tape.scalar_mul(tape.squared_norm(masked), inv_count);
  }
  const int n = tape.rows(probs);
  const int ones = tape.input(Tensor::ones(n, n));
  const int log_p = tape.log(tape.clamp(probs, kProbClamp, 1.0 - kProbClamp));
  const int one_minus_p = tape.add(ones, tape.scalar_mul(probs, neg1));
  const int log_q =
      tape.log(tape.clamp(one_minus_p, kProbClamp, 1.0 - kProbClamp));
  const int one_minus_t = tape.add(ones, tape.scalar_mul(target, neg1));
  const int ll = tape.add(tape.hadamard(target, log_p),
                          tape.hadamard(one_minus_t, log_q));
  const int neg_mean = tape.scalar_mul(tape.sum(tape.hadamard(ll, mask)),
                                       tape.input(Tensor::scalar(-1.0)));
  // neg_mean currently holds -sum; scale by 1/count.
  return tape.scalar_mul(neg_mean, inv_count);
}

VmfPosterior encode(const GaeModel& model, const Graph& g) {
  validate_model(model);
  validate_graph(g);
  if (g.x.cols != model.feat_dim)
    throw DataError("graph feature dimension " + std::to_string(g.x.cols) +
                    " does not match model input dimension " +
                    std::to_string(model.feat_dim));
  const Graph gn = normalize_adjacency(g);
  Tape tape;
  const int a = tape.input(gn.w);
  const int v = tape.input(gn.x);
  GaeLeaves leaves = add_gae_leaves(tape, model);
  bind_gae_leaves(tape, leaves, model);
  const int mu = build_encoder(tape, leaves, a, v);
  VmfPosterior post;
  post.mu = tape.evaluate(mu);
  post.kappa = model.kappa;
  return post;
}

Tensor sample_posterior(const VmfPosterior& post, Rng& rng) {
  const int n = post.mu.rows;
  const int m = post.mu.cols;
  Tensor z(n, m);
  VmfParams p;
  p.kappa = post.kappa;
  p.mu.resize(m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) p.mu[j] = post.mu.at(i, j);
    const auto row = sample_vmf(p, rng);
    for (int j = 0; j < m; ++j) z.at(i, j) = row[j];
  }
  return z;
}

ReconstructedGraph decode(const GaeModel& model, const Tensor& z) {
  validate_model(model);
  if (z.cols != model.latent_dim)
    throw DataError("latent matrix has " + std::to_string(z.cols) +
                    " columns, model expects " +
                    std::to_string(model.latent_dim));
  if (z.rows < 1) throw DataError("latent matrix is empty");
  for (int i = 0; i < z.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < z.cols; ++j) s += z.at(i, j) * z.at(i, j);
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
      throw DataError("latent row " + std::to_string(i) +
                      " is not on the unit sphere");
  }
  Tape tape;
  const int zl = tape.input(z);
  const int du = tape.input(model.dec_u);
  const int db = tape.input(model.dec_bias);
  ReconstructedGraph out;
  out.probs = tape.evaluate(build_decoder_impl(tape, zl, du, db));
  return out;
}

Tensor recon_target(const Graph& g, LossVariant variant) {
  Tensor t(g.n, g.n);
  if (variant == LossVariant::kCrossEntropy) {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        t.at(i, j) = (i != j && g.w.at(i, j) > 0.0) ? 1.0 : 0.0;
    return t;
  }
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == j) continue;
      const double w = g.w.at(i, j);
      if (first) {
        lo = hi = w;
        first = false;
      } else {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
    }
  }
  const double span = hi - lo;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i == j) continue;
      t.at(i, j) = span > 0.0 ? (g.w.at(i, j) - lo) / span
                              : (g.w.at(i, j) > 0.0 ? 1.0 : 0.0);
    }
  }
  return t;
}

Tensor make_loss_mask(const Tensor* observation_mask, int n) {
  Tensor mask = offdiag_ones(n);
  if (observation_mask) {
    if (observation_mask->rows != n || observation_mask->cols != n)
      throw ShapeError("observation mask shape " +
                       observation_mask->shape_str() +
                       " does not match graph size " + std::to_string(n));
    for (int k = 0; k < mask.size(); ++k)
      if (observation_mask->v[k] == 0.0) mask.v[k] = 0.0;
  }
  return mask;
}

double reconstruction_loss(const Graph& g, const ReconstructedGraph& recon,
                           const Tensor* observation_mask,
                           LossVariant variant) {
  if (recon.probs.rows != g.n || recon.probs.cols != g.n)
    throw ShapeError("reconstruction shape " + recon.probs.shape_str() +
                     " does not match graph size " + std::to_string(g.n));
  const Tensor mask = make_loss_mask(observation_mask, g.n);
  double count = 0.0;
  for (double m : mask.v) count += m;
  if (count == 0.0)
    throw DataError("loss mask excludes every off-diagonal entry");
  const Tensor target = recon_target(g, variant);
  // Accumulation mirrors the tape wiring entry for entry so that plain and
  // taped evaluations of the same quantities agree bitwise.
  if (variant == LossVariant::kQuadratic) {
    double s = 0.0;
    for (int k = 0; k < mask.size(); ++k) {
      const double d = (recon.probs.v[k] + target.v[k] * -1.0) * mask.v[k];
      s += d * d;
    }
    return s * (1.0 / count);
  }
  constexpr double lo = kProbClamp;
  constexpr double hi = 1.0 - kProbClamp;
  double s = 0.0;
  for (int k = 0; k < mask.size(); ++k) {
    const double p = recon.probs.v[k];
    const double t = target.v[k];
    const double lp = std::log(std::min(hi, std::max(lo, p)));
    const double lq = std::log(std::min(hi, std::max(lo, 1.0 + p * -1.0)));
    const double ll = t * lp + (1.0 + t * -1.0) * lq;
    s += ll * mask.v[k];
  }
  return (s * -1.0) * (1.0 / count);
}

double prior_alignment_loss(const GaeModel& model, int n) {
  if (n < 1) throw DataError("prior alignment needs at least one node");
  return n * kl_to_uniform(model.latent_dim, model.kappa);
}

LossBreakdown elbo_loss(const GaeModel& model, const Graph& g,
                        bool sample_latent, Rng* rng, double lambda1,
                        LossVariant variant) {
  if (sample_latent && rng == nullptr)
    throw DataError("sampling the posterior requires a random source");
  validate_model(model);
  validate_graph(g);
  const Graph gn = normalize_adjacency(g);
  Tape tape;
  const int a = tape.input(gn.w);
  const int v = tape.input(gn.x);
  GaeLeaves leaves = add_gae_leaves(tape, model);
  bind_gae_leaves(tape, leaves, model);
  const int mu = build_encoder(tape, leaves, a, v);
  int z = mu;
  int noise = -1;
  if (sample_latent) {
    noise = tape.input(g.n, model.latent_dim);
    z = build_pole_transport(tape, mu, noise);
  }
  const int probs = build_decoder(tape, leaves, z);
  const Tensor mask = make_loss_mask(nullptr, g.n);
  double count = 0.0;
  for (double m : mask.v) count += m;
  if (count == 0.0) throw DataError("graph has no off-diagonal entries");
  const int target = tape.input(recon_target(g, variant));
  const int mask_leaf = tape.input(mask);
  const int inv_count = tape.input(Tensor::scalar(1.0 / count));
  const int recon =
      build_recon_loss(tape, probs, target, mask_leaf, inv_count, variant);
  if (sample_latent) {
    Tensor draws(g.n, model.latent_dim);
    for (int i = 0; i < g.n; ++i) {
      const auto row = sample_vmf_pole(model.latent_dim, model.kappa, *rng);
      for (int j = 0; j < model.latent_dim; ++j) draws.at(i, j) = row[j];
    }
    tape.bind(noise, draws);
  }
  LossBreakdown out;
  out.recon = tape.evaluate(recon).scalar_value();
  out.prior = prior_alignment_loss(model, g.n);
  out.adversarial = 0.0;
  out.lambda1 = lambda1;
  out.lambda2 = 0.0;
  out.total = out.recon + lambda1 * out.prior + out.lambda2 * out.adversarial;
  return out;
}

}  // namespace spherad
