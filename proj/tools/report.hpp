#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tck/ensemble.hpp"
#include "tck/mts.hpp"

namespace tck::cli {

/// How a train/test pair is prepared before training. Scaling is fitted on
/// the clean training split, missingness is injected next, resampling last.
struct SplitSettings {
  EnsembleSpec spec;
  bool standardize = true;
  int length_cap = 25;  // 0 disables resampling
  MissingPattern pattern = MissingPattern::kMcar;
  double missing_rate = 0.0;
  /// Spectral clustering of the training kernel into as many clusters as
  /// there are training labels.
  bool cluster = true;
};

struct SplitScores {
  double accuracy = 0.0;
  std::optional<double> clustering_accuracy;
  std::optional<double> ari;
  int members = 0;
  int failures = 0;
};

/// Trains on `train`, classifies `test` with 1NN, optionally clusters the
/// training kernel. Both splits need labels.
SplitScores score_split(const Dataset& train, const Dataset& test,
                        const SplitSettings& settings);

struct MissingLevel {
  double rate = 0.0;
  double accuracy = 0.0;
  int failures = 0;
  friend bool operator==(const MissingLevel&, const MissingLevel&) = default;
};

struct SweepPoint {
  int c_max = 0;
  int q = 0;
  double accuracy = 0.0;
  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct Report {
  std::string source;
  std::uint64_t seed = 0;
  int n_train = 0;
  int n_test = 0;
  int n_attributes = 0;
  int length = 0;
  int length_cap = 0;
  bool standardize = true;
  std::string pattern = "mcar";

  double accuracy = 0.0;
  std::optional<double> clustering_accuracy;
  std::optional<double> ari;
  int members = 0;
  int failures = 0;

  std::vector<MissingLevel> missingness;
  std::vector<SweepPoint> sensitivity;

  /// max - min accuracy over the sensitivity sweep (0 when empty).
  [[nodiscard]] double sensitivity_range() const;
  friend bool operator==(const Report&, const Report&) = default;
};

nlohmann::json report_to_json(const Report& r);
/// Throws DataError on a missing field or wrong format tag.
Report report_from_json(const nlohmann::json& j);

}  // namespace tck::cli
