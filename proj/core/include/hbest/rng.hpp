#pragma once

#include <cstdint>
#include <random>

#include "hbest/types.hpp"

namespace hbest {

// Diffusion step used for seed derivation (splitmix64 finalizer).
std::uint64_t splitmix64(std::uint64_t x);

// Stable identifiers for the per-update RNG streams. Each MCMC update (and
// each simulated replicate) draws from its own stream keyed by
// (master seed, iteration, step, replicate), so chains are bit-identical
// regardless of how the conditionally independent updates are scheduled
// across threads.
enum class StreamStep : std::uint64_t {
  Tau = 1,
  Zeta = 2,
  LocalSpline = 3,
  GlobalSpline = 4,
  IndependentSubchain = 5,
  GroupFit = 6,
  SimulateDataset = 7,
  SimulateReplicate = 8,
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration,
                          StreamStep step, std::uint64_t replicate);

// A single consumable random stream. Construct one per update step; the draw
// order within a step is part of the reproducibility contract.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return unif_(eng_); }           // U(0,1)
  double normal() { return norm_(eng_); }            // N(0,1)
  double normal(double mean, double sd) { return mean + sd * norm_(eng_); }
  Vec normal_vec(int k);

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace hbest
