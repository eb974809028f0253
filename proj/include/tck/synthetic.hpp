#pragma once

#include <array>
#include <cstdint>

#include "tck/mts.hpp"

namespace tck {

/// Bivariate VAR(1): x(t) = alpha + diag(rho_x, rho_y) x(t-1) + xi(t), with
/// unit-variance noise whose correlation makes corr(x1(t), x2(t)) = rho.
/// The intercept is derived from the target stationary mean.
struct Var1Params {
  double rho_x = 0.8;
  double rho_y = 0.8;
  double rho = 0.8;
  std::array<double, 2> mean{0.5, -0.5};
  int length = 50;
  int burn_in = 100;

  /// rho (1 - rho_x rho_y) / sqrt((1 - rho_x^2)(1 - rho_y^2)).
  [[nodiscard]] double noise_correlation() const;
  [[nodiscard]] std::array<double, 2> intercept() const;
  /// Throws ConfigError for non-stationary or inconsistent parameters.
  void validate() const;
};

Var1Params var1_class_one();
Var1Params var1_class_two();

/// `n_series` fully observed series; ids are `<prefix><index>`.
Dataset generate_var1(const Var1Params& params, int n_series, std::uint64_t seed,
                      const std::string& id_prefix = "s");

struct Var1Benchmark {
  Dataset train;
  Dataset test;
};

/// Two classes (labels 1 and 2), `per_class` train and test series each.
Var1Benchmark make_var1_benchmark(std::uint64_t seed, int per_class = 100,
                                  const Var1Params& class_one = var1_class_one(),
                                  const Var1Params& class_two = var1_class_two());

}  // namespace tck
