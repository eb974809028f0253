#include "tck/mts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell_name(int v, int t) {
  std::ostringstream os;
  os << "(attribute " << v << ", time " << t << ")";
  return os.str();
}

}  // namespace

Eigen::Index MtsRecord::observed_count() const {
  return mask.cast<Eigen::Index>().sum();
}

void MtsRecord::validate() const {
  if (values.rows() != mask.rows() || values.cols() != mask.cols()) {
    throw DataError("series '" + id + "': values and mask differ in shape");
  }
  if (values.rows() < 1 || values.cols() < 1) {
    throw DataError("series '" + id + "': needs V >= 1 and T >= 1");
  }
  for (Eigen::Index t = 0; t < mask.cols(); ++t) {
    for (Eigen::Index v = 0; v < mask.rows(); ++v) {
      if (mask(v, t) > 1) {
        throw DataError("series '" + id + "': mask entries must be 0 or 1");
      }
    }
  }
}

MtsRecord make_record(std::string id, Matrix values) {
  MtsRecord r;
  r.id = std::move(id);
  r.mask = Mask::Ones(values.rows(), values.cols());
  r.values = std::move(values);
  return r;
}

int Dataset::n_attributes() const {
  return records.empty() ? 0 : records.front().n_attributes();
}

int Dataset::length() const {
  return records.empty() ? 0 : records.front().length();
}

int Dataset::max_length() const {
  int t = 0;
  for (const auto& r : records) t = std::max(t, r.length());
  return t;
}

bool Dataset::uniform_length() const {
  return std::all_of(records.begin(), records.end(), [&](const MtsRecord& r) {
    return r.length() == length();
  });
}

void Dataset::validate() const {
  for (const auto& r : records) {
    r.validate();
    if (r.n_attributes() != n_attributes()) {
      throw DataError("series '" + r.id + "' has " +
                      std::to_string(r.n_attributes()) +
                      " attributes, expected " +
                      std::to_string(n_attributes()));
    }
  }
  if (labels && labels->size() != records.size()) {
    throw DataError("label count " + std::to_string(labels->size()) +
                    " does not match series count " +
                    std::to_string(records.size()));
  }
}

void Dataset::require_uniform() const {
  validate();
  if (!uniform_length()) {
    throw DataError("series lengths differ; resample the dataset first");
  }
}

MaskedBlock restrict_records(std::span<const MtsRecord> records,
                             std::span<const int> series,
                             std::span<const int> attributes,
                             TimeSegment segment) {
  const auto n = static_cast<Eigen::Index>(series.size());
  MaskedBlock block;
  block.values.assign(attributes.size(), RowMatrix::Zero(n, segment.length));
  block.mask.assign(attributes.size(), RowMatrix::Zero(n, segment.length));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(series[i])];
    if (segment.start < 0 || segment.end() > rec.length()) {
      throw DataError("series '" + rec.id + "' is shorter than time segment [" +
                      std::to_string(segment.start) + ", " +
                      std::to_string(segment.end()) + ")");
    }
    for (std::size_t a = 0; a < attributes.size(); ++a) {
      const int v = attributes[a];
      if (v < 0 || v >= rec.n_attributes()) {
        throw DataError("series '" + rec.id + "' has no attribute " +
                        std::to_string(v));
      }
      for (int t = 0; t < segment.length; ++t) {
        if (rec.observed(v, segment.start + t)) {
          block.values[a](i, t) = rec.values(v, segment.start + t);
          block.mask[a](i, t) = 1.0;
        }
      }
    }
  }
  return block;
}

MaskedBlock restrict_record(const MtsRecord& record,
                            std::span<const int> attributes,
                            TimeSegment segment) {
  const int only = 0;
  return restrict_records(std::span<const MtsRecord>(&record, 1),
                          std::span<const int>(&only, 1), attributes, segment);
}

EmpiricalMoments empirical_moments(const MaskedBlock& block) {
  const int nv = block.n_attributes();
  const int nt = block.length();
  EmpiricalMoments m;
  m.means.resize(nv, nt);
  m.stds.resize(nv);
  for (int v = 0; v < nv; ++v) {
    const auto& x = block.values[static_cast<std::size_t>(v)];
    const auto& r = block.mask[static_cast<std::size_t>(v)];
    double total = 0.0;
    double count = 0.0;
    for (int t = 0; t < nt; ++t) {
      const double c = r.col(t).sum();
      if (c == 0.0) {
        throw DataError("no observed values at " + cell_name(v, t));
      }
      const double s = x.col(t).sum();
      m.means(v, t) = s / c;
      total += s;
      count += c;
    }
    const double mean = total / count;
    double ss = 0.0;
    for (int t = 0; t < nt; ++t) {
      ss += (r.col(t).array() * (x.col(t).array() - mean).square()).sum();
    }
    m.stds(v) = std::max(std::sqrt(ss / count), kStdFloor);
  }
  return m;
}

EmpiricalMoments empirical_moments(const Dataset& d,
                                   std::span<const int> attributes,
                                   TimeSegment segment) {
  std::vector<int> all(static_cast<std::size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return empirical_moments(
      restrict_records(d.records, all, attributes, segment));
}

AttributeScaling fit_standardization(const Dataset& d) {
  d.validate();
  const int nv = d.n_attributes();
  AttributeScaling s;
  s.means.assign(static_cast<std::size_t>(nv), 0.0);
  s.stds.assign(static_cast<std::size_t>(nv), 0.0);
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0;
    double count = 0.0;
    for (const auto& r : d.records) {
      for (int t = 0; t < r.length(); ++t) {
        if (r.observed(v, t)) {
          sum += r.values(v, t);
          count += 1.0;
        }
      }
    }
    const std::string name = v < static_cast<int>(d.attribute_names.size())
                                 ? d.attribute_names[static_cast<std::size_t>(v)]
                                 : std::to_string(v);
    if (count < 2.0) {
      throw DataError("attribute '" + name +
                      "' has fewer than 2 observed values");
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& r : d.records) {
      for (int t = 0; t < r.length(); ++t) {
        if (r.observed(v, t)) ss += (r.values(v, t) - mean) * (r.values(v, t) - mean);
      }
    }
    const double sd = std::sqrt(ss / count);
    if (!(sd > 0.0)) {
      throw DataError("attribute '" + name + "' has zero observed variance");
    }
    s.means[static_cast<std::size_t>(v)] = mean;
    s.stds[static_cast<std::size_t>(v)] = sd;
  }
  return s;
}

Dataset apply_standardization(const Dataset& d, const AttributeScaling& s) {
  if (static_cast<int>(s.means.size()) != d.n_attributes()) {
    throw DataError("standardization has " + std::to_string(s.means.size()) +
                    " attributes, dataset has " +
                    std::to_string(d.n_attributes()));
  }
  Dataset out = d;
  for (auto& r : out.records) {
    for (int v = 0; v < r.n_attributes(); ++v) {
      const double mu = s.means[static_cast<std::size_t>(v)];
      const double sd = s.stds[static_cast<std::size_t>(v)];
      for (int t = 0; t < r.length(); ++t) {
        if (r.observed(v, t)) r.values(v, t) = (r.values(v, t) - mu) / sd;
      }
    }
  }
  return out;
}

Dataset standardize(const Dataset& d) {
  return apply_standardization(d, fit_standardization(d));
}

int resampled_length(int t_max, int cap) {
  if (cap < 1) throw ConfigError("length cap must be >= 1");
  if (t_max < 1) throw DataError("series length must be >= 1");
  const int per_window = (t_max + cap - 1) / cap;
  return (t_max + per_window - 1) / per_window;
}

Dataset resample_to(const Dataset& d, int target) {
  d.validate();
  if (target < 1) throw ConfigError("target length must be >= 1");
  Dataset out = d;
  for (std::size_t n = 0; n < out.records.size(); ++n) {
    const auto& src = d.records[n];
    auto& r = out.records[n];
    const long long ts = src.length();
    if (ts == target) continue;
    const int nv = src.n_attributes();
    r.values = Matrix::Constant(nv, target, kNaN);
    r.mask = Mask::Zero(nv, target);
    for (int w = 0; w < target; ++w) {
      // Source window [lo, hi); shorter series repeat their nearest index.
      const auto lo = static_cast<int>(w * ts / target);
      auto hi = static_cast<int>((w + 1) * ts / target);
      hi = std::max(hi, lo + 1);
      for (int v = 0; v < nv; ++v) {
        double sum = 0.0;
        int count = 0;
        for (int t = lo; t < hi; ++t) {
          if (src.observed(v, t)) {
            sum += src.values(v, t);
            ++count;
          }
        }
        if (count > 0) {
          r.values(v, w) = sum / count;
          r.mask(v, w) = 1;
        }
      }
    }
  }
  return out;
}

Dataset resample_length(const Dataset& d, int cap) {
  return resample_to(d, resampled_length(d.max_length(), cap));
}

Dataset trim_trailing_missing(const Dataset& d) {
  Dataset out = d;
  for (auto& r : out.records) {
    int t = r.length();
    while (t > 1 && r.mask.col(t - 1).cast<int>().sum() == 0) --t;
    if (t < r.length()) {
      r.values = Matrix(r.values.leftCols(t));
      r.mask = Mask(r.mask.leftCols(t));
    }
  }
  return out;
}

MissingPattern parse_missing_pattern(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "MCAR") return MissingPattern::kMcar;
  if (up == "MAR") return MissingPattern::kMar;
  if (up == "MNAR") return MissingPattern::kMnar;
  throw ConfigError("unknown missingness pattern '" + name +
                    "' (expected MCAR, MAR or MNAR)");
}

std::string to_string(MissingPattern p) {
  switch (p) {
    case MissingPattern::kMcar: return "mcar";
    case MissingPattern::kMar: return "mar";
    case MissingPattern::kMnar: return "mnar";
  }
  return "?";
}

Dataset inject_missing(const Dataset& d, MissingPattern pattern, double p,
                       std::uint64_t seed) {
  d.validate();
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("missingness probability must lie in [0, 1]");
  }
  if (pattern == MissingPattern::kMar && d.n_attributes() < 2) {
    throw ConfigError("MAR injection needs at least 2 attributes");
  }
  const Rng root(seed);
  Dataset out = d;
  for (std::size_t n = 0; n < d.records.size(); ++n) {
    const auto& src = d.records[n];
    auto& dst = out.records[n];
    Rng rng = root.split(n);
    const int nv = src.n_attributes();
    for (int t = 0; t < src.length(); ++t) {
      for (int v = 0; v < nv; ++v) {
        // One draw per cell keeps the stream aligned across patterns.
        const bool hit = rng.bernoulli(p);
        if (!src.observed(v, t) || !hit) continue;
        bool eligible = false;
        switch (pattern) {
          case MissingPattern::kMcar:
            eligible = true;
            break;
          case MissingPattern::kMar: {
            const int j = (v + 1) % nv;
            eligible = src.observed(j, t) && src.values(j, t) > 0.5;
            break;
          }
          case MissingPattern::kMnar:
            eligible = src.values(v, t) > 0.5;
            break;
        }
        if (eligible) {
          dst.mask(v, t) = 0;
          dst.values(v, t) = kNaN;
        }
      }
    }
  }
  return out;
}

double missing_fraction(const Dataset& d) {
  double missing = 0.0;
  double total = 0.0;
  for (const auto& r : d.records) {
    total += static_cast<double>(r.mask.size());
    missing += static_cast<double>(r.mask.size() - r.observed_count());
  }
  return total > 0.0 ? missing / total : 0.0;
}

Dataset concatenate_attributes(const Dataset& d) {
  d.require_uniform();
  Dataset out;
  out.labels = d.labels;
  out.attribute_names = {"concat"};
  const int nv = d.n_attributes();
  const int nt = d.length();
  for (const auto& r : d.records) {
    MtsRecord c;
    c.id = r.id;
    c.values.resize(1, static_cast<Eigen::Index>(nv) * nt);
    c.mask.resize(1, static_cast<Eigen::Index>(nv) * nt);
    for (int v = 0; v < nv; ++v) {
      c.values.block(0, v * nt, 1, nt) = r.values.row(v);
      c.mask.block(0, v * nt, 1, nt) = r.mask.row(v);
    }
    out.records.push_back(std::move(c));
  }
  return out;
}

}  // namespace tck
