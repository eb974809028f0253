#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace tck {

/// Counter-based, splittable random stream.
///
/// Each stream is identified by a 64-bit key; draw i is a pure function of
/// (key, i). `split(k)` derives an independent child key, so work items can
/// own their stream regardless of the order or thread they run on. All
/// conversions to doubles and integers are done here rather than through
/// <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  [[nodiscard]] Rng split(std::uint64_t stream) const;
  [[nodiscard]] std::uint64_t key() const { return key_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (lo, hi).
  double uniform_open(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p);

  /// `count` distinct indices from [0, n), returned in increasing order.
  std::vector<int> sample_without_replacement(int n, int count);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace tck
