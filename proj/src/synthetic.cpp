#include "tck/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck {

double Var1Params::noise_correlation() const {
  return rho * (1.0 - rho_x * rho_y) /
         std::sqrt((1.0 - rho_x * rho_x) * (1.0 - rho_y * rho_y));
}

std::array<double, 2> Var1Params::intercept() const {
  return {(1.0 - rho_x) * mean[0], (1.0 - rho_y) * mean[1]};
}

void Var1Params::validate() const {
  if (!(std::abs(rho_x) < 1.0 && std::abs(rho_y) < 1.0)) {
    throw ConfigError("VAR(1) needs |rho_x| < 1 and |rho_y| < 1");
  }
  if (!(std::abs(rho) <= 1.0)) throw ConfigError("VAR(1) needs |rho| <= 1");
  if (length < 1 || burn_in < 0) {
    throw ConfigError("VAR(1) needs length >= 1 and burn_in >= 0");
  }
  const double c = noise_correlation();
  if (!(std::abs(c) <= 1.0)) {
    std::ostringstream os;
    os << "inconsistent VAR(1) parameters (rho=" << rho << ", rho_x=" << rho_x
       << ", rho_y=" << rho_y << "): implied noise correlation " << c
       << " is outside [-1, 1]";
    throw ConfigError(os.str());
  }
}

Var1Params var1_class_one() { return {}; }

Var1Params var1_class_two() {
  Var1Params p;
  p.rho = -0.8;
  p.rho_x = 0.6;
  p.rho_y = 0.6;
  p.mean = {0.0, 0.0};
  return p;
}

Dataset generate_var1(const Var1Params& params, int n_series, std::uint64_t seed,
                      const std::string& id_prefix) {
  params.validate();
  if (n_series < 0) throw ConfigError("series count must be >= 0");
  const double c = params.noise_correlation();
  const double c_perp = std::sqrt(std::max(0.0, 1.0 - c * c));
  const auto alpha = params.intercept();
  const Rng root(seed);
  Dataset d;
  d.attribute_names = {"x1", "x2"};
  for (int s = 0; s < n_series; ++s) {
    Rng rng = root.split(static_cast<std::uint64_t>(s));
    double x1 = params.mean[0];
    double x2 = params.mean[1];
    Matrix values(2, params.length);
    for (int step = -params.burn_in; step < params.length; ++step) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      x1 = alpha[0] + params.rho_x * x1 + z1;
      x2 = alpha[1] + params.rho_y * x2 + c * z1 + c_perp * z2;
      if (step >= 0) {
        values(0, step) = x1;
        values(1, step) = x2;
      }
    }
    char id[64];
    std::snprintf(id, sizeof(id), "%s%04d", id_prefix.c_str(), s);
    d.records.push_back(make_record(id, std::move(values)));
  }
  return d;
}

Var1Benchmark make_var1_benchmark(std::uint64_t seed, int per_class,
                                  const Var1Params& class_one,
                                  const Var1Params& class_two) {
  const Rng root(seed);
  auto build = [&](int split, const std::string& prefix) {
    Dataset d;
    d.attribute_names = {"x1", "x2"};
    d.labels = std::vector<int>{};
    const Var1Params* classes[] = {&class_one, &class_two};
    for (int cls = 0; cls < 2; ++cls) {
      const auto stream = static_cast<std::uint64_t>(2 * split + cls);
      Dataset part = generate_var1(*classes[cls], per_class, root.split(stream).key(),
                                   prefix + "c" + std::to_string(cls + 1) + "_");
      for (auto& r : part.records) {
        d.records.push_back(std::move(r));
        d.labels->push_back(cls + 1);
      }
    }
    return d;
  };
  return {build(0, "train_"), build(1, "test_")};
}

}  // namespace tck
