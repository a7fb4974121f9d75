#include "spherad/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spherad/adam.hpp"
#include "spherad/error.hpp"

namespace spherad {

namespace {

// Cholesky solve of A X = B for symmetric positive definite A.
Tensor cholesky_solve(Tensor a, Tensor b) {
  const int n = a.rows;
  if (a.cols != n || b.rows != n)
    throw ShapeError("cholesky_solve shape mismatch");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= a.at(i, k) * a.at(j, k);
      if (i == j) {
        if (s <= 0.0)
          throw NumericError("matrix not positive definite in ridge solve");
        a.at(i, i) = std::sqrt(s);
      } else {
        a.at(i, j) = s / a.at(j, j);
      }
    }
  }
  // Forward then backward substitution, one right-hand column at a time.
  for (int col = 0; col < b.cols; ++col) {
    for (int i = 0; i < n; ++i) {
      double s = b.at(i, col);
      for (int k = 0; k < i; ++k) s -= a.at(i, k) * b.at(k, col);
      b.at(i, col) = s / a.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = b.at(i, col);
      for (int k = i + 1; k < n; ++k) s -= a.at(k, i) * b.at(k, col);
      b.at(i, col) = s / a.at(i, i);
    }
  }
  return b;
}

}  // namespace

CorrespondenceResult sinkhorn_project(const Tensor& m, int max_iters,
                                      double tol) {
  if (m.rows != m.cols)
    throw DataError("doubly stochastic projection needs a square matrix, got " +
                    m.shape_str());
  if (m.rows == 0) throw DataError("empty matrix");
  if (max_iters < 1) throw ConfigError("projection needs at least 1 sweep");
  if (!(tol > 0.0)) throw ConfigError("projection tolerance must be positive");
  for (int k = 0; k < m.size(); ++k)
    if (!(m.v[k] > 0.0))
      throw DataError("projection input must be strictly positive, entry (" +
                      std::to_string(k / m.cols) + "," +
                      std::to_string(k % m.cols) + ") is not");
  CorrespondenceResult out;
  out.p = m;
  Tensor& p = out.p;
  const int n = p.rows;
  for (int iter = 1; iter <= max_iters; ++iter) {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += p.at(i, j);
      for (int j = 0; j < n; ++j) p.at(i, j) /= s;
    }
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += p.at(i, j);
      for (int i = 0; i < n; ++i) p.at(i, j) /= s;
    }
    double dev = 0.0;
    for (int i = 0; i < n; ++i) {
      double rs = 0.0, cs = 0.0;
      for (int j = 0; j < n; ++j) {
        rs += p.at(i, j);
        cs += p.at(j, i);
      }
      dev = std::max({dev, std::abs(rs - 1.0), std::abs(cs - 1.0)});
    }
    out.iterations = iter;
    if (dev <= tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Tensor rbf_kernel(const Tensor& a, const Tensor& b, double sigma) {
  if (a.cols != b.cols)
    throw ShapeError("kernel point dimensions differ: " + a.shape_str() +
                     " vs " + b.shape_str());
  if (!(sigma > 0.0)) throw DataError("kernel width must be positive");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Tensor k(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double d2 = 0.0;
      for (int c = 0; c < a.cols; ++c) {
        const double d = a.at(i, c) - b.at(j, c);
        d2 += d * d;
      }
      k.at(i, j) = std::exp(-d2 * inv);
    }
  }
  return k;
}

Tensor RbfTransform::apply(const Tensor& points) const {
  if (points.cols != centers.cols)
    throw ShapeError("transform input dimension " + points.shape_str() +
                     " does not match centers " + centers.shape_str());
  const Tensor k = rbf_kernel(points, centers, sigma);
  Tensor out = points;
  for (int i = 0; i < points.rows; ++i)
    for (int c = 0; c < centers.rows; ++c) {
      const double kic = k.at(i, c);
      if (kic == 0.0) continue;
      for (int d = 0; d < points.cols; ++d)
        out.at(i, d) += kic * coeffs.at(c, d);
    }
  return out;
}

double RbfTransform::coeff_penalty() const {
  double s = 0.0;
  for (double c : coeffs.v) s += c * c;
  return ridge * s;
}

RbfTransform identity_transform(const Tensor& centers, double sigma,
                                double ridge) {
  RbfTransform t;
  t.centers = centers;
  t.coeffs = Tensor(centers.rows, centers.cols);
  t.sigma = sigma;
  t.ridge = ridge;
  return t;
}

double median_pairwise_distance(const Tensor& points) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(points.rows) * (points.rows - 1) / 2);
  for (int i = 0; i < points.rows; ++i)
    for (int j = i + 1; j < points.rows; ++j) {
      double s = 0.0;
      for (int c = 0; c < points.cols; ++c) {
        const double t = points.at(i, c) - points.at(j, c);
        s += t * t;
      }
      d.push_back(std::sqrt(s));
    }
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  const std::size_t mid = d.size() / 2;
  return d.size() % 2 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
}

RbfTransform rbf_fit(const Tensor& source, const Tensor& target,
                     const Tensor& p, double sigma, double ridge) {
  if (p.rows != source.rows || p.cols != target.rows)
    throw ShapeError("correspondence shape " + p.shape_str() +
                     " does not pair " + std::to_string(source.rows) +
                     " sources with " + std::to_string(target.rows) +
                     " targets");
  if (source.cols != target.cols)
    throw ShapeError("source and target dimensions differ");
  // ridge = 0 would leave K R K singular whenever the kernel is
  // rank-deficient, so the closed-form solve demands a strictly positive
  // weight.
  if (!(ridge > 0.0)) throw DataError("ridge weight must be positive");
  const int k = source.rows;
  const int d = source.cols;
  const Tensor kern = rbf_kernel(source, source, sigma);
  std::vector<double> r(k, 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < p.cols; ++j) r[i] += p.at(i, j);
  // Residual targets M - R V with M = P T.
  Tensor rhs_points = matmul(p, target);
  for (int i = 0; i < k; ++i)
    for (int c = 0; c < d; ++c) rhs_points.at(i, c) -= r[i] * source.at(i, c);
  // A = K R K + ridge I (symmetric positive definite for ridge > 0).
  Tensor krk(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += kern.at(i, t) * r[t] * kern.at(t, j);
      krk.at(i, j) = s;
    }
  for (int i = 0; i < k; ++i) krk.at(i, i) += ridge;
  const Tensor rhs = matmul(kern, rhs_points);
  RbfTransform out;
  out.centers = source;
  out.coeffs = cholesky_solve(std::move(krk), rhs);
  out.sigma = sigma;
  out.ridge = ridge;
  return out;
}

double matching_objective(const Tensor& p, const RbfTransform& zeta,
                          const Tensor& source, const Tensor& target,
                          double ridge_weight) {
  if (p.rows != source.rows || p.cols != target.rows)
    throw ShapeError("correspondence shape " + p.shape_str() +
                     " does not pair the given point sets");
  const Tensor moved = zeta.apply(source);
  double j = 0.0;
  for (int i = 0; i < p.rows; ++i)
    for (int jj = 0; jj < p.cols; ++jj) {
      double d2 = 0.0;
      for (int c = 0; c < source.cols; ++c) {
        const double t = target.at(jj, c) - moved.at(i, c);
        d2 += t * t;
      }
      j += p.at(i, jj) * d2;
    }
  double c2 = 0.0;
  for (double c : zeta.coeffs.v) c2 += c * c;
  return j + ridge_weight * c2;
}

MatchState alternating_minimize(const PartialGraph& pg, const GaeModel& model,
                                const MatchConfig& cfg, const Tensor& z_init) {
  validate_model(model);
  validate_graph(pg.g);
  const int n = pg.g.n;
  if (z_init.rows != n || z_init.cols != model.latent_dim)
    throw ShapeError("latent start shape " + z_init.shape_str() +
                     " does not match " + std::to_string(n) + "x" +
                     std::to_string(model.latent_dim));
  if (cfg.max_rounds < 1 || cfg.z_steps < 1)
    throw ConfigError("round and latent step counts must be positive");
  if (!(cfg.eta >= 0.0) || !(cfg.lambda_zeta >= 0.0))
    throw ConfigError("matching weights must be nonnegative");

  // Node signatures on both sides are connectivity profiles, so source and
  // target live in the same n-dimensional space.
  const Tensor v_src = profile_features(pg.g.w);
  double sigma = cfg.sigma;
  if (!(sigma > 0.0)) {
    sigma = median_pairwise_distance(v_src);
    if (!(sigma > 0.0)) sigma = 1.0;
  }

  const Tensor loss_mask = make_loss_mask(&pg.mask, n);
  double count = 0.0;
  for (double m : loss_mask.v) count += m;
  if (count == 0.0)
    throw DataError("mask hides every off-diagonal entry, nothing to fit");
  const Tensor target = recon_target(pg.g, cfg.variant);

  // Latent refinement program: decoder + masked reconstruction + the
  // z-dependent part of the matching objective. With column sums of p at 1,
  // sum_ij p_ij |t_j - zeta_i|^2 = |T|^2 - 2 <T, U> + const in z, where
  // T = row_normalize(probs) and U = p^T zeta(source).
  Tape tape;
  const int z_leaf = tape.input(n, model.latent_dim);
  const int dec_u = tape.input(model.dec_u);
  const int dec_b = tape.input(model.dec_bias);
  const int half = tape.input(Tensor::scalar(0.5));
  const int bsym = tape.scalar_mul(tape.add(dec_u, tape.transpose(dec_u)), half);
  const int s0 = tape.matmul(tape.matmul(z_leaf, bsym), tape.transpose(z_leaf));
  const int ssym = tape.scalar_mul(tape.add(s0, tape.transpose(s0)), half);
  const int biased = tape.add(
      ssym, tape.scalar_mul(tape.input(Tensor::ones(n, n)), dec_b));
  const int probs_node =
      tape.hadamard(tape.logistic(biased), tape.input(offdiag_ones(n)));
  const int target_leaf = tape.input(target);
  const int mask_leaf = tape.input(loss_mask);
  const int inv_count = tape.input(Tensor::scalar(1.0 / count));
  const int recon_node = build_recon_loss(tape, probs_node, target_leaf,
                                          mask_leaf, inv_count, cfg.variant);
  const int v_tgt_node = tape.row_normalize(probs_node);
  const int u_leaf = tape.input(n, n);
  const int neg2 = tape.input(Tensor::scalar(-2.0));
  const int jz = tape.add(
      tape.squared_norm(v_tgt_node),
      tape.scalar_mul(tape.sum(tape.hadamard(v_tgt_node, u_leaf)), neg2));
  const int eta_leaf = tape.input(Tensor::scalar(cfg.eta));
  const int phi_node = tape.add(recon_node, tape.scalar_mul(jz, eta_leaf));

  Tensor z = z_init;
  tape.bind(z_leaf, z);
  std::vector<Tensor*> z_group = {&z};
  AdamState z_state({cfg.lr_z, 0.9, 0.999, 1e-8}, z_group);

  Tensor p(n, n, 1.0 / n);
  RbfTransform zeta = identity_transform(v_src, sigma, cfg.lambda_zeta);

  MatchState best;
  best.objective = std::numeric_limits<double>::infinity();
  MatchState cur;
  cur.trace.reserve(static_cast<std::size_t>(cfg.max_rounds) * 3);

  auto record = [&](int round, MatchPhase phase, double value,
                    const Tensor& probs_value) {
    cur.trace.push_back({round, phase, value});
    if (value < best.objective) {
      best.z = z;
      best.p = p;
      best.zeta = zeta;
      best.probs = probs_value;
      best.objective = value;
    }
  };

  double prev_phi = std::numeric_limits<double>::infinity();
  int rounds_done = 0;
  bool converged = false;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    // Runs every node through v_tgt (recon included); u_leaf sits later on
    // the tape and stays untouched until the latent steps bind it.
    tape.evaluate(v_tgt_node);
    const double recon_value = tape.value(recon_node).scalar_value();
    const Tensor probs_value = tape.value(probs_node);
    const Tensor v_tgt = tape.value(v_tgt_node);

    const double phi_start =
        recon_value + cfg.eta * matching_objective(p, zeta, v_src, v_tgt,
                                                   cfg.lambda_zeta);
    record(round, MatchPhase::kRoundStart, phi_start, probs_value);
    rounds_done = round;
    if (std::isfinite(prev_phi) &&
        std::abs(phi_start - prev_phi) <=
            cfg.round_tol * std::max(1.0, std::abs(prev_phi))) {
      converged = true;
      break;
    }
    prev_phi = phi_start;

    // Correspondence update: softmax of negative costs at a temperature tied
    // to the mean cost, floored to keep the projection input positive.
    Tensor moved = zeta.apply(v_src);
    double mean_cost = 0.0;
    Tensor cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double d2 = 0.0;
        for (int c = 0; c < n; ++c) {
          const double t = moved.at(i, c) - v_tgt.at(j, c);
          d2 += t * t;
        }
        cost.at(i, j) = d2;
        mean_cost += d2;
      }
    mean_cost /= (static_cast<double>(n) * n);
    if (mean_cost > 0.0) {
      const double tau = cfg.tau_scale * mean_cost;
      Tensor s(n, n);
      for (int k = 0; k < s.size(); ++k)
        s.v[k] = std::exp(-cost.v[k] / tau) + 1e-12;
      p = sinkhorn_project(s, cfg.sinkhorn_max_iters, cfg.sinkhorn_tol).p;
    } else {
      p = Tensor(n, n, 1.0 / n);
    }
    record(round, MatchPhase::kAfterCorrespondence,
           recon_value + cfg.eta * matching_objective(p, zeta, v_src, v_tgt,
                                                      cfg.lambda_zeta),
           probs_value);

    // Transform update: exact minimizer of the matching term given p.
    zeta = rbf_fit(v_src, v_tgt, p, sigma, cfg.lambda_zeta);
    record(round, MatchPhase::kAfterTransform,
           recon_value + cfg.eta * matching_objective(p, zeta, v_src, v_tgt,
                                                      cfg.lambda_zeta),
           probs_value);

    // Latent refinement against the updated correspondence and transform.
    moved = zeta.apply(v_src);
    tape.bind(u_leaf, matmul(transpose(p), moved));
    for (int s = 0; s < cfg.z_steps; ++s) {
      const auto grads = tape.gradient(phi_node, {z_leaf});
      adam_step(z_group, grads, z_state);
      row_normalize_inplace(z);
      tape.bind(z_leaf, z);
    }
  }

  best.rounds = rounds_done;
  best.converged = converged;
  best.trace = std::move(cur.trace);
  return best;
}

CompletionResult complete_graph(const PartialGraph& pg, const GaeModel& model,
                                int k, const MatchConfig& cfg, Rng& rng) {
  if (k < 1) throw ConfigError("candidate count must be at least 1");
  if (cfg.restarts < 1) throw ConfigError("restart count must be at least 1");
  if (k > cfg.restarts)
    throw ConfigError("candidate count " + std::to_string(k) +
                      " exceeds restart count " +
                      std::to_string(cfg.restarts));
  const Tensor z0 = encode(model, pg.g).mu;
  std::vector<CompletionCandidate> all;
  for (int r = 0; r < cfg.restarts; ++r) {
    Tensor z = z0;
    if (r > 0) {
      for (double& v : z.v) v += cfg.init_noise * rng.normal();
      row_normalize_inplace(z);
    }
    try {
      CompletionCandidate cand;
      cand.state = alternating_minimize(pg, model, cfg, z);
      cand.recon.probs = cand.state.probs;
      cand.restart_index = r;
      all.push_back(std::move(cand));
    } catch (const NumericError&) {
      // A diverged restart is dropped; the search continues.
    }
  }
  if (all.empty())
    throw NumericError("every completion restart failed numerically");
  std::sort(all.begin(), all.end(),
            [](const CompletionCandidate& a, const CompletionCandidate& b) {
              if (a.state.objective != b.state.objective)
                return a.state.objective < b.state.objective;
              return a.restart_index < b.restart_index;
            });
  CompletionResult out;
  for (auto& cand : all) {
    bool dup = false;
    for (const auto& kept : out.candidates) {
      if (frobenius_distance(cand.recon.probs, kept.recon.probs) <
          cfg.dedup_tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.candidates.push_back(std::move(cand));
    if (static_cast<int>(out.candidates.size()) == k) break;
  }
  return out;
}

}  // namespace spherad
