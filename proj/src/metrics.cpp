#include <algorithm>
#include <limits>
#include <map>

#include "tck/downstream.hpp"
#include "tck/error.hpp"

namespace tck {

namespace {

struct Contingency {
  Matrix counts;  // pred classes x true classes
  std::vector<int> pred_values;
  std::vector<int> true_values;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  std::map<int, int> pi;
  std::map<int, int> ti;
  for (int p : pred) pi.try_emplace(p, 0);
  for (int t : truth) ti.try_emplace(t, 0);
  Contingency c;
  for (auto& [value, idx] : pi) {
    idx = static_cast<int>(c.pred_values.size());
    c.pred_values.push_back(value);
  }
  for (auto& [value, idx] : ti) {
    idx = static_cast<int>(c.true_values.size());
    c.true_values.push_back(value);
  }
  c.counts = Matrix::Zero(static_cast<Eigen::Index>(pi.size()),
                          static_cast<Eigen::Index>(ti.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    c.counts(pi.at(pred[i]), ti.at(truth[i])) += 1.0;
  }
  return c;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

std::vector<int> hungarian_min_cost(const Matrix& cost) {
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  if (rows > cols) {
    const auto by_col = hungarian_min_cost(cost.transpose());
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    for (std::size_t c = 0; c < by_col.size(); ++c) {
      out[static_cast<std::size_t>(by_col[c])] = static_cast<int>(c);
    }
    return out;
  }
  // Potentials method on a rows <= cols matrix, 1-based with a sentinel 0.
  const auto n = static_cast<std::size_t>(rows);
  const auto m = static_cast<std::size_t>(cols);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1),
                                static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (match[j] != 0) out[match[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw DataError("clustering accuracy needs two non-empty label vectors of equal length");
  }
  const auto c = contingency(pred, truth);
  const Matrix cost = c.counts.maxCoeff() - c.counts.array();
  const auto assign = hungarian_min_cost(cost);
  double matched = 0.0;
  for (std::size_t r = 0; r < assign.size(); ++r) {
    if (assign[r] >= 0) matched += c.counts(static_cast<Eigen::Index>(r), assign[r]);
  }
  return matched / static_cast<double>(pred.size());
}

double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.size() < 2) {
    throw DataError("adjusted Rand index needs two label vectors of equal length >= 2");
  }
  const auto c = contingency(pred, truth);
  double index = 0.0;
  for (Eigen::Index i = 0; i < c.counts.size(); ++i) index += choose2(c.counts.data()[i]);
  double a = 0.0;
  for (Eigen::Index i = 0; i < c.counts.rows(); ++i) a += choose2(c.counts.row(i).sum());
  double b = 0.0;
  for (Eigen::Index j = 0; j < c.counts.cols(); ++j) b += choose2(c.counts.col(j).sum());
  const double pairs = choose2(static_cast<double>(pred.size()));
  const double expected = a * b / pairs;
  const double maximum = 0.5 * (a + b);
  const double denom = maximum - expected;
  if (denom == 0.0) {
    // Both partitions trivial: identical partitions score 1.
    return index == a && index == b ? 1.0 : 0.0;
  }
  return (index - expected) / denom;
}

}  // namespace tck
