#include "report.hpp"

#include <algorithm>
#include <set>

#include "tck/downstream.hpp"
#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck::cli {

namespace {

constexpr const char* kReportFormat = "tck-report";
constexpr int kReportVersion = 1;

int distinct_labels(const std::vector<int>& labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

template <class T>
T field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("report is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("report field '") + key + "' has the wrong type");
  }
}

std::optional<double> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<double>(j, key);
}

}  // namespace

SplitScores score_split(const Dataset& train, const Dataset& test,
                        const SplitSettings& settings) {
  if (!train.labels || !test.labels) {
    throw DataError("evaluation needs labels for both splits");
  }
  Preprocessing prep;
  if (settings.standardize) prep.scaling = fit_standardization(train);
  Dataset tr = prep.scaling ? apply_standardization(train, *prep.scaling) : train;
  Dataset te = prep.scaling ? apply_standardization(test, *prep.scaling) : test;

  if (settings.missing_rate > 0.0) {
    // One uniform draw per cell, so masks are nested across rates.
    const Rng root(settings.spec.seed);
    tr = inject_missing(tr, settings.pattern, settings.missing_rate, root.split(1)());
    te = inject_missing(te, settings.pattern, settings.missing_rate, root.split(2)());
  }
  if (settings.length_cap > 0 && tr.max_length() > settings.length_cap) {
    const int target = resampled_length(tr.max_length(), settings.length_cap);
    tr = resample_to(tr, target);
    te = resample_to(te, target);
  }

  const auto trained = train_tck(tr, settings.spec);
  const auto k_star = test_kernel(trained.model, te, settings.spec.threads);
  SplitScores s;
  s.accuracy = accuracy(knn_classify(k_star, *tr.labels, 1), *te.labels);
  s.members = static_cast<int>(trained.model.members.size());
  s.failures = static_cast<int>(trained.model.failures.size());
  if (settings.cluster) {
    const int k = distinct_labels(*tr.labels);
    if (k >= 2) {
      const auto cl = spectral_cluster(trained.kernel, k, settings.spec.seed);
      s.clustering_accuracy = clustering_accuracy(cl.labels, *tr.labels);
      s.ari = adjusted_rand_index(cl.labels, *tr.labels);
    }
  }
  return s;
}

double Report::sensitivity_range() const {
  if (sensitivity.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(
      sensitivity.begin(), sensitivity.end(),
      [](const SweepPoint& a, const SweepPoint& b) { return a.accuracy < b.accuracy; });
  return hi->accuracy - lo->accuracy;
}

nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j;
  j["format"] = kReportFormat;
  j["version"] = kReportVersion;
  j["source"] = r.source;
  j["seed"] = r.seed;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["n_attributes"] = r.n_attributes;
  j["length"] = r.length;
  j["length_cap"] = r.length_cap;
  j["standardize"] = r.standardize;
  j["pattern"] = r.pattern;
  j["accuracy"] = r.accuracy;
  j["clustering_accuracy"] =
      r.clustering_accuracy ? nlohmann::json(*r.clustering_accuracy) : nlohmann::json();
  j["ari"] = r.ari ? nlohmann::json(*r.ari) : nlohmann::json();
  j["members"] = r.members;
  j["failures"] = r.failures;
  auto& miss = j["missingness"] = nlohmann::json::array();
  for (const auto& m : r.missingness) {
    miss.push_back({{"rate", m.rate}, {"accuracy", m.accuracy}, {"failures", m.failures}});
  }
  auto& sweep = j["sensitivity"] = nlohmann::json::array();
  for (const auto& s : r.sensitivity) {
    sweep.push_back({{"c_max", s.c_max}, {"q", s.q}, {"accuracy", s.accuracy}});
  }
  j["sensitivity_range"] = r.sensitivity_range();
  return j;
}

Report report_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kReportFormat) {
    throw DataError("not a report (bad format header)");
  }
  if (field<int>(j, "version") != kReportVersion) {
    throw DataError("unsupported report version");
  }
  Report r;
  r.source = field<std::string>(j, "source");
  r.seed = field<std::uint64_t>(j, "seed");
  r.n_train = field<int>(j, "n_train");
  r.n_test = field<int>(j, "n_test");
  r.n_attributes = field<int>(j, "n_attributes");
  r.length = field<int>(j, "length");
  r.length_cap = field<int>(j, "length_cap");
  r.standardize = field<bool>(j, "standardize");
  r.pattern = field<std::string>(j, "pattern");
  r.accuracy = field<double>(j, "accuracy");
  r.clustering_accuracy = optional_field(j, "clustering_accuracy");
  r.ari = optional_field(j, "ari");
  r.members = field<int>(j, "members");
  r.failures = field<int>(j, "failures");
  for (const auto& m : field<nlohmann::json>(j, "missingness")) {
    r.missingness.push_back({field<double>(m, "rate"), field<double>(m, "accuracy"),
                             field<int>(m, "failures")});
  }
  for (const auto& s : field<nlohmann::json>(j, "sensitivity")) {
    r.sensitivity.push_back({field<int>(s, "c_max"), field<int>(s, "q"),
                             field<double>(s, "accuracy")});
  }
  return r;
}

}  // namespace tck::cli
