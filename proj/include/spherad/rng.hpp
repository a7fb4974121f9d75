#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace spherad {

// Deterministic random source. All distribution transforms are implemented
// here (rather than through std:: distributions) so that streams are
// bit-reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform on (0, 1], safe as a log() argument.
  double uniform_pos();

  // Standard normal via Box-Muller, one value per call (no cached spare).
  double normal();

  // Gamma(alpha, 1) via Marsaglia-Tsang squeeze, alpha > 0.
  double gamma(double alpha);

  // Beta(a, b) from two gamma draws.
  double beta(double a, double b);

  // Independent child stream; distinct `stream` values give distinct seeds.
  Rng fork(std::uint64_t stream) const;

  // Engine state serialized as text, for checkpoints.
  std::string state_string() const;
  void restore_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 step, used to derive well-separated seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace spherad
