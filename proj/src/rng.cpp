#include "airdfl/rng.hpp"

#include <cmath>

namespace airdfl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                          std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(domain));
  for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x3c6ef372fe94f82bULL));
  return h;
}

std::complex<double> RandomStream::complex_normal(double variance) {
  const double s = std::sqrt(variance / 2.0);
  std::normal_distribution<double> n(0.0, s);
  const double re = n(engine_);
  const double im = n(engine_);
  return {re, im};
}

}  // namespace airdfl
