#pragma once

#include <cmath>
#include <string>

#include "tck/mts.hpp"
#include "tck/rng.hpp"

namespace tck::fixtures {

/// Gaussian data with cells hidden at rate `missing`. Series 0 stays fully
/// observed so every (v, t) has at least one observation.
inline Dataset random_dataset(Rng& rng, int n, int v, int t, double missing,
                              int classes = 0) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    MtsRecord r;
    r.id = "s" + std::to_string(i);
    r.values.resize(v, t);
    r.mask = Mask::Ones(v, t);
    const double shift = classes > 0 ? static_cast<double>(i % classes) : 0.0;
    for (int a = 0; a < v; ++a) {
      for (int s = 0; s < t; ++s) {
        r.values(a, s) = rng.normal() + shift;
        if (i > 0 && rng.uniform() < missing) {
          r.values(a, s) = std::nan("");
          r.mask(a, s) = 0;
        }
      }
    }
    d.records.push_back(std::move(r));
  }
  if (classes > 0) {
    d.labels.emplace();
    for (int i = 0; i < n; ++i) d.labels->push_back(i % classes + 1);
  }
  return d;
}

inline MaskedBlock whole_block(const Dataset& d) {
  std::vector<int> series(static_cast<std::size_t>(d.size()));
  std::vector<int> attrs(static_cast<std::size_t>(d.n_attributes()));
  for (std::size_t i = 0; i < series.size(); ++i) series[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < attrs.size(); ++i) attrs[i] = static_cast<int>(i);
  return restrict_records(d.records, series, attrs, TimeSegment{0, d.length()});
}

}  // namespace tck::fixtures
