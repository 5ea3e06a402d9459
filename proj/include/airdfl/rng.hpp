#pragma once
// Keyed random substreams.
//
// Every random draw in a run comes from a generator seeded by hashing the
// master seed together with a domain tag and integer coordinates (iteration,
// device, edge, ...). A draw therefore depends only on what it is for, never on
// the order in which devices, blocks or threads happen to consume randomness.

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace airdfl {

enum class StreamDomain : std::uint64_t {
  repetition = 1,
  topology = 2,
  fading = 3,
  noise = 4,
  sampling = 5,
  data = 6,
  init = 7,
  test = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive hash of (master, domain, coords...).
std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                          std::initializer_list<std::uint64_t> coords = {});

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t master, StreamDomain domain,
               std::initializer_list<std::uint64_t> coords = {})
      : engine_(derive_seed(master, domain, coords)) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  // Circularly-symmetric complex Gaussian with E|h|^2 = variance.
  std::complex<double> complex_normal(double variance = 1.0);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace airdfl
