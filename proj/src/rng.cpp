#include "mars/rng.hpp"

#include <cmath>
#include <numbers>

namespace mars {

std::uint64_t CounterRng::mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

CounterRng CounterRng::substream(std::uint64_t seed, std::uint64_t component, std::uint64_t index) {
  std::uint64_t key = mix(seed + kGolden);
  key = mix(key ^ (component * 0xD1B54A32D192ED03ULL));
  key = mix(key ^ (index * 0xAEF17502108EF2D9ULL + 0x632BE59BD9B4E019ULL));
  return CounterRng(key);
}

double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mars
