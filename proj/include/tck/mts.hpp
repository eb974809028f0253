#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tck {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One multivariate time series with its observation mask.
///
/// `values` and `mask` are V x T (attribute-major). A cell with mask 0 carries
/// no information; its stored value is NaN and is never read.
struct MtsRecord {
  std::string id;
  Matrix values;
  Mask mask;

  [[nodiscard]] int n_attributes() const {
    return static_cast<int>(values.rows());
  }
  [[nodiscard]] int length() const { return static_cast<int>(values.cols()); }
  [[nodiscard]] bool observed(int v, int t) const { return mask(v, t) != 0; }
  [[nodiscard]] Eigen::Index observed_count() const;

  /// Throws DataError when shapes disagree or the mask is not binary.
  void validate() const;
};

/// Builds a fully observed record.
MtsRecord make_record(std::string id, Matrix values);

struct Dataset {
  std::vector<MtsRecord> records;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> attribute_names;

  [[nodiscard]] int size() const { return static_cast<int>(records.size()); }
  [[nodiscard]] int n_attributes() const;
  /// Length of the first record; see `uniform_length()`.
  [[nodiscard]] int length() const;
  [[nodiscard]] int max_length() const;
  [[nodiscard]] bool uniform_length() const;

  /// Checks record invariants, a common V, and label alignment.
  void validate() const;
  /// validate() plus a common T.
  void require_uniform() const;
};

/// Contiguous, zero-based range of time indices.
struct TimeSegment {
  int start = 0;
  int length = 0;

  [[nodiscard]] int end() const { return start + length; }
  friend bool operator==(const TimeSegment&, const TimeSegment&) = default;
};

struct EmpiricalMoments {
  Matrix means;  // |attrs| x |segment|
  Vector stds;   // |attrs|
};

inline constexpr double kStdFloor = 1e-6;

/// Series restricted to an attribute subset and time segment, laid out for
/// the EM inner loops: one N x |segment| block per attribute. Missing cells
/// hold 0 in `values` and 0 in `mask`, so masked products need no branches.
struct MaskedBlock {
  std::vector<RowMatrix> values;
  std::vector<RowMatrix> mask;

  [[nodiscard]] int n_series() const {
    return values.empty() ? 0 : static_cast<int>(values.front().rows());
  }
  [[nodiscard]] int n_attributes() const {
    return static_cast<int>(values.size());
  }
  [[nodiscard]] int length() const {
    return values.empty() ? 0 : static_cast<int>(values.front().cols());
  }
};

MaskedBlock restrict_records(std::span<const MtsRecord> records,
                             std::span<const int> series,
                             std::span<const int> attributes,
                             TimeSegment segment);
MaskedBlock restrict_record(const MtsRecord& record,
                            std::span<const int> attributes,
                            TimeSegment segment);

/// Observed-cell moments of a restricted block. Throws DataError naming the
/// first (attribute, time) without observations.
EmpiricalMoments empirical_moments(const MaskedBlock& block);
EmpiricalMoments empirical_moments(const Dataset& d,
                                   std::span<const int> attributes,
                                   TimeSegment segment);

// -- preprocessing ----------------------------------------------------------

/// Per-attribute affine map x -> (x - mean) / std.
struct AttributeScaling {
  std::vector<double> means;
  std::vector<double> stds;
};

/// Pooled observed mean and population std per attribute.
AttributeScaling fit_standardization(const Dataset& d);
Dataset apply_standardization(const Dataset& d, const AttributeScaling& s);
Dataset standardize(const Dataset& d);

/// Target length for a cap: ceil(T_max / ceil(T_max / cap)).
int resampled_length(int t_max, int cap);
/// Window-mean resampling of every series to `target` steps.
Dataset resample_to(const Dataset& d, int target);
Dataset resample_length(const Dataset& d, int cap = 25);

/// Drops trailing all-missing columns from each record (variable lengths).
Dataset trim_trailing_missing(const Dataset& d);

enum class MissingPattern { kMcar, kMar, kMnar };

MissingPattern parse_missing_pattern(const std::string& name);
std::string to_string(MissingPattern p);

/// Removes observed cells according to `pattern`. Deterministic in `seed`.
Dataset inject_missing(const Dataset& d, MissingPattern pattern, double p,
                       std::uint64_t seed);

/// Fraction of cells with mask 0.
double missing_fraction(const Dataset& d);

/// Concatenates the attributes of each series into one univariate series of
/// length V*T.
Dataset concatenate_attributes(const Dataset& d);

// -- CSV I/O ----------------------------------------------------------------

struct LoadOptions {
  bool trim_trailing = false;
};

Dataset load_dataset(const std::string& path,
                     const std::optional<std::string>& labels_path = {},
                     const LoadOptions& options = {});
void write_dataset(const Dataset& d, const std::string& path);
std::vector<int> load_labels(const std::string& path,
                             std::span<const std::string> ids);
void write_labels(const Dataset& d, const std::string& path);
void write_labels(std::span<const std::string> ids, std::span<const int> labels,
                  const std::string& path);

/// Parses dataset CSV text; `origin` is used in error messages.
Dataset parse_dataset(const std::string& text, const std::string& origin);
std::string format_dataset(const Dataset& d);

}  // namespace tck
