#include "tck/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tck/error.hpp"

namespace tck {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::result_type Rng::operator()() {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c + 0x632be59bd9b4e019ULL));
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(mix64(mix64(key_) + 0xd1b54a32d192ed03ULL * (stream + 1)));
}

double Rng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open(double lo, double hi) {
  double u = 0.0;
  do {
    u = uniform();
  } while (u == 0.0);
  return lo + (hi - lo) * u;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>((*this)());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = max() - max() % span;
  std::uint64_t r = 0;
  do {
    r = (*this)();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

double Rng::normal() {
  // Box-Muller; one variate per call keeps the stream position explicit.
  const double u1 = uniform_open(0.0, 1.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::vector<int> Rng::sample_without_replacement(int n, int count) {
  if (count < 0 || count > n) throw Error("sample_without_replacement: bad count");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(i, n - 1));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace tck
