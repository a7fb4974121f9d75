#pragma once

#include <string>

#include "spherad/config.hpp"
#include "spherad/gae.hpp"
#include "spherad/trainer.hpp"

namespace spherad {

// Versioned JSON snapshot of a training run. Parameter tensors are stored as
// decimal-text arrays so a round trip reproduces every value bit for bit.
struct Checkpoint {
  int format_version = 1;
  RunConfig config;
  int epoch = 0;
  std::string rng_state;
  GaeModel model;
  bool has_disc = false;
  Discriminator disc;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace spherad
