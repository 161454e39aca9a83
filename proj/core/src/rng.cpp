#include "hbest/rng.hpp"

namespace hbest {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration,
                          StreamStep step, std::uint64_t replicate) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ iteration);
  h = splitmix64(h ^ static_cast<std::uint64_t>(step));
  h = splitmix64(h ^ replicate);
  return h;
}

Vec RngStream::normal_vec(int k) {
  Vec out(k);
  for (int i = 0; i < k; ++i) out[i] = norm_(eng_);
  return out;
}

}  // namespace hbest
