#include "spherad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>

#include "spherad/error.hpp"
#include "spherad/number.hpp"
#include "spherad/vmf.hpp"

namespace spherad {

namespace {

constexpr double kProbClamp = 1e-7;

struct DiscLeaves {
  FilterLeaves filt;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

DiscLeaves add_disc_leaves(Tape& tape, const Discriminator& d) {
  DiscLeaves leaves;
  leaves.filt = add_filter_leaves(tape, d.feat_dim, d.filter_dim);
  leaves.w1 = tape.input(d.filter_dim, d.hidden_dim);
  leaves.b1 = tape.input(1, d.hidden_dim);
  leaves.w2 = tape.input(d.hidden_dim, 1);
  leaves.b2 = tape.input(1, 1);
  return leaves;
}

void bind_disc_leaves(Tape& tape, const DiscLeaves& leaves,
                      const Discriminator& d) {
  bind_filter_leaves(tape, leaves.filt, d.filt);
  tape.bind(leaves.w1, d.w1);
  tape.bind(leaves.b1, d.b1);
  tape.bind(leaves.w2, d.w2);
  tape.bind(leaves.b2, d.b2);
}

std::vector<int> disc_leaf_list(const DiscLeaves& leaves) {
  std::vector<int> out = filter_leaf_list(leaves.filt);
  out.push_back(leaves.w1);
  out.push_back(leaves.b1);
  out.push_back(leaves.w2);
  out.push_back(leaves.b2);
  return out;
}

// Filter, tanh, mean readout over nodes, dense head, logistic probability.
int build_disc_prob(Tape& tape, const DiscLeaves& leaves, int a, int v) {
  const int n = tape.rows(v);
  const int act = tape.tanh(build_filter(tape, leaves.filt, a, v));
  const int readout =
      tape.matmul(tape.input(Tensor(1, n, 1.0 / n)), act);
  const int hidden =
      tape.tanh(tape.add(tape.matmul(readout, leaves.w1), leaves.b1));
  const int logit = tape.add(tape.matmul(hidden, leaves.w2), leaves.b2);
  return tape.logistic(logit);
}

struct GenProgram {
  Tape tape;
  int adj = -1, feat = -1, target = -1, noise = -1;
  int prior = -1;
  GaeLeaves gae;
  DiscLeaves disc;
  bool has_gan = false;
  int mu = -1, z = -1, probs = -1, recon = -1, gan = -1, total = -1;
  std::vector<int> gen_leaves;
  std::vector<int> disc_leaves_list;
};

GenProgram build_gen_program(const GaeModel& model, const Discriminator& disc,
                             int n, double count, const TrainConfig& cfg) {
  GenProgram p;
  Tape& t = p.tape;
  p.adj = t.input(n, n);
  p.feat = t.input(n, model.feat_dim);
  p.gae = add_gae_leaves(t, model);
  p.gen_leaves = gae_leaf_list(p.gae);
  p.mu = build_encoder(t, p.gae, p.adj, p.feat);
  if (cfg.sample_latent) {
    p.noise = t.input(n, model.latent_dim);
    p.z = build_pole_transport(t, p.mu, p.noise);
  } else {
    p.z = p.mu;
  }
  p.probs = build_decoder(t, p.gae, p.z);
  p.target = t.input(n, n);
  const int mask = t.input(make_loss_mask(nullptr, n));
  const int inv_count = t.input(Tensor::scalar(1.0 / count));
  p.recon = build_recon_loss(t, p.probs, p.target, mask, inv_count, cfg.variant);
  p.prior = t.input(1, 1);
  const int l1 = t.input(Tensor::scalar(cfg.lambda1));
  const int base = t.add(p.recon, t.scalar_mul(p.prior, l1));
  p.has_gan = cfg.lambda2 > 0.0;
  if (p.has_gan) {
    p.disc = add_disc_leaves(t, disc);
    p.disc_leaves_list = disc_leaf_list(p.disc);
    // The critic sees the reconstruction scaled by 1/(n-1) so its row sums
    // fall in the same range as a max-row-sum normalized real adjacency, and
    // connectivity profiles as features, matching the real branch.
    const int inv_nm1 = t.input(Tensor::scalar(1.0 / (n - 1)));
    const int af = t.scalar_mul(p.probs, inv_nm1);
    const int vf = t.row_normalize(af);
    const int dprob = build_disc_prob(t, p.disc, af, vf);
    const int dclamp = t.clamp(dprob, kProbClamp, 1.0 - kProbClamp);
    const int neg1 = t.input(Tensor::scalar(-1.0));
    if (cfg.gan_form == GanForm::kNonSaturating) {
      p.gan = t.scalar_mul(t.log(dclamp), neg1);
    } else {
      const int one = t.input(Tensor::scalar(1.0));
      p.gan = t.log(t.add(one, t.scalar_mul(dclamp, neg1)));
    }
    const int l2 = t.input(Tensor::scalar(cfg.lambda2));
    p.total = t.add(base, t.scalar_mul(p.gan, l2));
  } else {
    p.total = base;
  }
  return p;
}

struct DiscProgram {
  Tape tape;
  int adj_real = -1, adj_fake = -1;
  DiscLeaves disc;
  int loss = -1;
  std::vector<int> leaves;
};

DiscProgram build_disc_program(const Discriminator& d, int n) {
  DiscProgram p;
  Tape& t = p.tape;
  p.adj_real = t.input(n, n);
  p.adj_fake = t.input(n, n);
  p.disc = add_disc_leaves(t, d);
  p.leaves = disc_leaf_list(p.disc);
  const int vr = t.row_normalize(p.adj_real);
  const int vf = t.row_normalize(p.adj_fake);
  const int pr = t.clamp(build_disc_prob(t, p.disc, p.adj_real, vr),
                         kProbClamp, 1.0 - kProbClamp);
  const int pf = t.clamp(build_disc_prob(t, p.disc, p.adj_fake, vf),
                         kProbClamp, 1.0 - kProbClamp);
  const int neg1 = t.input(Tensor::scalar(-1.0));
  const int one = t.input(Tensor::scalar(1.0));
  const int log_fake = t.log(t.add(one, t.scalar_mul(pf, neg1)));
  p.loss = t.scalar_mul(t.add(t.log(pr), log_fake), neg1);
  return p;
}

std::uint64_t checksum(const std::vector<const Tensor*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Tensor* t : params) {
    for (double x : t->v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

std::vector<const Tensor*> const_view(const std::vector<Tensor*>& params) {
  return {params.begin(), params.end()};
}

}  // namespace

std::vector<Tensor*> Discriminator::params() {
  return {&filt.h0, &filt.h1, &filt.h2, &filt.bias, &w1, &b1, &w2, &b2};
}

std::vector<const Tensor*> Discriminator::params() const {
  return {&filt.h0, &filt.h1, &filt.h2, &filt.bias, &w1, &b1, &w2, &b2};
}

std::vector<std::string> Discriminator::param_names() {
  return {"disc.h0", "disc.h1", "disc.h2", "disc.bias",
          "disc.w1", "disc.b1", "disc.w2", "disc.b2"};
}

Discriminator init_discriminator(int feat_dim, int filter_dim, int hidden_dim,
                                 Rng& rng) {
  if (feat_dim <= 0 || filter_dim <= 0 || hidden_dim <= 0)
    throw ConfigError("discriminator dimensions must be positive");
  Discriminator d;
  d.feat_dim = feat_dim;
  d.filter_dim = filter_dim;
  d.hidden_dim = hidden_dim;
  d.filt = init_filter_layer(feat_dim, filter_dim, rng);
  const double stddev = std::sqrt(2.0 / (filter_dim + hidden_dim));
  d.w1 = Tensor(filter_dim, hidden_dim);
  for (double& v : d.w1.v) v = stddev * rng.normal();
  d.b1 = Tensor(1, hidden_dim);
  d.w2 = Tensor(hidden_dim, 1);  // zero: untrained critic says 1/2
  d.b2 = Tensor(1, 1);
  return d;
}

void validate_discriminator(const Discriminator& d) {
  if (d.feat_dim <= 0 || d.filter_dim <= 0 || d.hidden_dim <= 0)
    throw ConfigError("discriminator dimensions invalid");
  auto expect = [](const Tensor& t, int r, int c, const std::string& name) {
    if (t.rows != r || t.cols != c)
      throw ConfigError("parameter " + name + " has shape " + t.shape_str() +
                        ", expected " + std::to_string(r) + "x" +
                        std::to_string(c));
    if (!all_finite(t))
      throw NumericError("non-finite entries in parameter " + name);
  };
  expect(d.filt.h0, d.feat_dim, d.filter_dim, "disc.h0");
  expect(d.filt.h1, d.feat_dim, d.filter_dim, "disc.h1");
  expect(d.filt.h2, d.feat_dim, d.filter_dim, "disc.h2");
  expect(d.filt.bias, 1, d.filter_dim, "disc.bias");
  expect(d.w1, d.filter_dim, d.hidden_dim, "disc.w1");
  expect(d.b1, 1, d.hidden_dim, "disc.b1");
  expect(d.w2, d.hidden_dim, 1, "disc.w2");
  expect(d.b2, 1, 1, "disc.b2");
}

double discriminate(const Discriminator& d, const Tensor& a, const Tensor& v) {
  validate_discriminator(d);
  if (a.rows != a.cols || a.rows != v.rows || v.cols != d.feat_dim)
    throw ShapeError("discriminate input shapes " + a.shape_str() + ", " +
                     v.shape_str() + " do not fit a critic with input dim " +
                     std::to_string(d.feat_dim));
  Tape tape;
  const int al = tape.input(a);
  const int vl = tape.input(v);
  DiscLeaves leaves = add_disc_leaves(tape, d);
  bind_disc_leaves(tape, leaves, d);
  return tape.evaluate(build_disc_prob(tape, leaves, al, vl)).scalar_value();
}

GanLosses gan_losses(double d_real, double d_fake) {
  const auto clamp = [](double p) {
    return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
  };
  const double r = clamp(d_real);
  const double f = clamp(d_fake);
  GanLosses out;
  out.disc = -(std::log(r) + std::log(1.0 - f));
  out.gen = -std::log(f);
  return out;
}

double total_loss(const LossBreakdown& b) {
  return b.recon + b.lambda1 * b.prior + b.lambda2 * b.adversarial;
}

GanForm gan_form_from_string(const std::string& s) {
  if (s == "non-saturating") return GanForm::kNonSaturating;
  if (s == "minimax") return GanForm::kMinimax;
  throw ConfigError("unknown adversarial form '" + s +
                    "' (expected 'non-saturating' or 'minimax')");
}

std::string to_string(GanForm f) {
  return f == GanForm::kNonSaturating ? "non-saturating" : "minimax";
}

TrainResult train(const std::vector<Graph>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  const int n = dataset[0].n;
  const int d = dataset[0].x.cols;
  if (n < 2) throw DataError("training graphs need at least two nodes");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    validate_graph(dataset[i]);
    if (dataset[i].n != n || dataset[i].x.cols != d)
      throw DataError("training graph " + std::to_string(i) +
                      " has shape " + std::to_string(dataset[i].n) + "/" +
                      std::to_string(dataset[i].x.cols) +
                      ", expected homogeneous " + std::to_string(n) + "/" +
                      std::to_string(d));
  }
  if (cfg.epochs < 0) throw ConfigError("epoch count must be nonnegative");
  if (!(cfg.lr_gen > 0.0) || !(cfg.lr_disc > 0.0))
    throw ConfigError("learning rates must be positive");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (cfg.disc_steps < 1)
    throw ConfigError("critic steps per generator step must be at least 1");

  Rng rng(cfg.seed);
  GaeModel model =
      init_gae_model(d, cfg.hidden_dim, cfg.latent_dim, cfg.kappa, rng);
  Discriminator disc =
      init_discriminator(n, cfg.disc_filter_dim, cfg.disc_hidden_dim, rng);

  const bool gan_in_gen = cfg.lambda2 > 0.0;
  const bool step_critic = gan_in_gen || cfg.train_unweighted_critic;

  const Tensor loss_mask = make_loss_mask(nullptr, n);
  double count = 0.0;
  for (double m : loss_mask.v) count += m;
  if (count == 0.0) throw DataError("graphs have no off-diagonal entries");

  struct Prepared {
    Tensor adj;
    Tensor feat;
    Tensor target;
  };
  std::vector<Prepared> prep;
  prep.reserve(dataset.size());
  for (const Graph& g : dataset) {
    const Graph gn = normalize_adjacency(g);
    prep.push_back({gn.w, gn.x, recon_target(g, cfg.variant)});
  }

  const double prior = prior_alignment_loss(model, n);

  GenProgram gp = build_gen_program(model, disc, n, count, cfg);
  gp.tape.bind(gp.prior, Tensor::scalar(prior));
  DiscProgram dp = step_critic ? build_disc_program(disc, n) : DiscProgram{};

  auto gen_params = model.params();
  auto disc_params = disc.params();
  AdamState gen_state({cfg.lr_gen, 0.9, 0.999, 1e-8}, gen_params);
  AdamState disc_state({cfg.lr_disc, 0.9, 0.999, 1e-8}, disc_params);

  TrainResult result;
  result.history.epochs.reserve(cfg.epochs);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double recon_sum = 0.0, gan_sum = 0.0, dloss_sum = 0.0;
    for (std::size_t gi = 0; gi < prep.size(); ++gi) {
      const Prepared& pg = prep[gi];
      try {
        gp.tape.bind(gp.adj, pg.adj);
        gp.tape.bind(gp.feat, pg.feat);
        gp.tape.bind(gp.target, pg.target);
        bind_gae_leaves(gp.tape, gp.gae, model);
        if (cfg.sample_latent) {
          Tensor noise(n, model.latent_dim);
          for (int i = 0; i < n; ++i) {
            const auto row =
                sample_vmf_pole(model.latent_dim, model.kappa, rng);
            for (int j = 0; j < model.latent_dim; ++j) noise.at(i, j) = row[j];
          }
          gp.tape.bind(gp.noise, noise);
        }
        if (step_critic) {
          const Tensor& probs = gp.tape.evaluate(gp.probs);
          Tensor fake = probs;
          const double inv_nm1 = 1.0 / (n - 1);
          for (double& v : fake.v) v = v * inv_nm1;
          dp.tape.bind(dp.adj_real, pg.adj);
          dp.tape.bind(dp.adj_fake, fake);
          for (int s = 0; s < cfg.disc_steps; ++s) {
            bind_disc_leaves(dp.tape, dp.disc, disc);
            const std::uint64_t before =
                cfg.check_isolation ? checksum(const_view(gen_params)) : 0;
            const auto grads = dp.tape.gradient(dp.loss, dp.leaves);
            if (s == 0) dloss_sum += dp.tape.value(dp.loss).scalar_value();
            adam_step(disc_params, grads, disc_state);
            if (cfg.check_isolation &&
                before != checksum(const_view(gen_params)))
              throw NumericError(
                  "critic update modified generator parameters");
          }
        }
        if (gp.has_gan) bind_disc_leaves(gp.tape, gp.disc, disc);
        const std::uint64_t disc_before =
            cfg.check_isolation ? checksum(const_view(disc_params)) : 0;
        const auto grads = gp.tape.gradient(gp.total, gp.gen_leaves);
        recon_sum += gp.tape.value(gp.recon).scalar_value();
        if (gp.has_gan) gan_sum += gp.tape.value(gp.gan).scalar_value();
        adam_step(gen_params, grads, gen_state);
        if (cfg.check_isolation &&
            disc_before != checksum(const_view(disc_params)))
          throw NumericError("generator update modified critic parameters");
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " +
                           std::to_string(epoch) + ", graph " +
                           std::to_string(gi) + ": " + e.what());
      }
    }
    const double g_count = static_cast<double>(prep.size());
    EpochRecord rec;
    rec.loss.recon = recon_sum / g_count;
    rec.loss.prior = prior;
    rec.loss.adversarial = gan_in_gen ? gan_sum / g_count : 0.0;
    rec.loss.lambda1 = cfg.lambda1;
    rec.loss.lambda2 = cfg.lambda2;
    rec.loss.total = total_loss(rec.loss);
    rec.disc_loss = step_critic ? dloss_sum / g_count : 0.0;
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    if (!std::isfinite(rec.loss.total) || !std::isfinite(rec.disc_loss))
      throw NumericError("training diverged at epoch " +
                         std::to_string(epoch) + ": non-finite epoch mean");
    result.history.epochs.push_back(rec);
    if (cfg.log_every > 0 &&
        (epoch % cfg.log_every == 0 || epoch == cfg.epochs)) {
      std::cerr << "epoch " << epoch << "/" << cfg.epochs
                << " total=" << rec.loss.total
                << " recon=" << rec.loss.recon
                << " critic=" << rec.disc_loss << "\n";
    }
  }
  result.model = std::move(model);
  result.disc = std::move(disc);
  result.rng_state = rng.state_string();
  return result;
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,recon,prior,adversarial,critic,total\n";
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    const EpochRecord& r = h.epochs[i];
    os << (i + 1) << ',' << repr_double(r.loss.recon) << ','
       << repr_double(r.loss.prior) << ','
       << repr_double(r.loss.adversarial) << ','
       << repr_double(r.disc_loss) << ','
       << repr_double(r.loss.total) << '\n';
  }
  return os.str();
}

}  // namespace spherad
