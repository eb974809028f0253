#include "tck/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck {

namespace {

void require_square(const KernelMatrix& k) {
  if (k.entries.rows() != k.entries.cols()) {
    throw DataError("expected a square kernel matrix");
  }
}

Matrix center(const Matrix& k) {
  const Vector col_means = k.colwise().mean();
  const Vector row_means = k.rowwise().mean();
  const double total = k.mean();
  Matrix c = k;
  c.colwise() -= row_means;
  c.rowwise() -= col_means.transpose();
  c.array() += total;
  return 0.5 * (c + c.transpose());
}

}  // namespace

std::vector<int> knn_from_distances(const Matrix& distances,
                                    std::span<const int> train_labels, int k) {
  const auto n = distances.rows();
  if (static_cast<Eigen::Index>(train_labels.size()) != n) {
    throw DataError("train label count does not match kernel rows");
  }
  if (k < 1 || k > n) {
    throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " +
                      std::to_string(n) + "]");
  }
  std::vector<int> predicted;
  predicted.reserve(static_cast<std::size_t>(distances.cols()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index m = 0; m < distances.cols(); ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        const double da = distances(a, m);
                        const double db = distances(b, m);
                        return da < db || (da == db && a < b);
                      });
    // label -> (votes, distance sum)
    std::map<int, std::pair<int, double>> votes;
    for (int i = 0; i < k; ++i) {
      const auto idx = order[static_cast<std::size_t>(i)];
      auto& v = votes[train_labels[static_cast<std::size_t>(idx)]];
      v.first += 1;
      v.second += distances(idx, m);
    }
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second.first > best->second.first ||
          (it->second.first == best->second.first &&
           it->second.second < best->second.second)) {
        best = it;
      }
    }
    predicted.push_back(best->first);
  }
  return predicted;
}

std::vector<int> knn_classify(const KernelMatrix& k_star,
                              std::span<const int> train_labels, int k) {
  return knn_from_distances(kernel_distances(k_star), train_labels, k);
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw DataError("accuracy needs two non-empty label vectors of equal length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

int centered_rank(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(center(k), Eigen::EigenvaluesOnly);
  const Vector& lambda = es.eigenvalues();
  const double top = lambda(lambda.size() - 1);
  if (!(top > 0.0)) return 0;
  return static_cast<int>((lambda.array() > 1e-9 * top).count());
}

Embedding kpca(const KernelMatrix& k, int dims) {
  require_square(k);
  if (dims < 1) throw ConfigError("kPCA needs dims >= 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(center(k.entries));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Vector& lambda = es.eigenvalues();
  const auto n = lambda.size();
  const double top = lambda(n - 1);
  const int rank = top > 0.0 ? static_cast<int>((lambda.array() > 1e-9 * top).count()) : 0;
  if (dims > rank) {
    throw ConfigError("requested " + std::to_string(dims) +
                      " kPCA dimensions but the centred kernel has rank " +
                      std::to_string(rank));
  }
  Embedding e;
  e.eigenvalues.resize(dims);
  e.coordinates.resize(n, dims);
  for (int d = 0; d < dims; ++d) {
    const auto col = n - 1 - d;
    Vector u = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0.0) u = -u;
    e.eigenvalues(d) = lambda(col);
    e.coordinates.col(d) = u * std::sqrt(std::max(lambda(col), 0.0));
  }
  return e;
}

ClusteringResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                        int restarts, int max_iter) {
  const auto n = points.rows();
  if (n_clusters < 1 || n_clusters > n) {
    throw ConfigError("cluster count " + std::to_string(n_clusters) +
                      " must lie in [1, " + std::to_string(n) + "]");
  }
  const Rng root(seed);
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<int> best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = root.split(static_cast<std::uint64_t>(r));
    Matrix centers(n_clusters, points.cols());
    centers.row(0) = points.row(rng.uniform_int(0, n - 1));
    Vector d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < n_clusters; ++c) {
      const double total = d2.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          u -= d2(i);
          if (u < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.uniform_int(0, n - 1);
      }
      centers.row(c) = points.row(pick);
      d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    double inertia = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_clusters; ++c) {
          const double d = (points.row(i) - centers.row(c)).squaredNorm();
          if (d < best_d) {
            best_d = d;
            arg = c;
          }
        }
        inertia += best_d;
        if (assign[static_cast<std::size_t>(i)] != arg) {
          assign[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(n_clusters, points.cols());
      Vector counts = Vector::Zero(n_clusters);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        counts(assign[static_cast<std::size_t>(i)]) += 1.0;
      }
      for (int c = 0; c < n_clusters; ++c) {
        if (counts(c) > 0.0) centers.row(c) = sums.row(c) / counts(c);
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  // Canonical ids in order of first appearance.
  std::map<int, int> relabel;
  ClusteringResult out;
  out.k = n_clusters;
  for (int a : best) {
    const auto [it, _] = relabel.try_emplace(a, static_cast<int>(relabel.size()));
    out.labels.push_back(it->second);
  }
  return out;
}

ClusteringResult spectral_cluster(const KernelMatrix& k, int n_clusters,
                                  std::uint64_t seed) {
  require_square(k);
  const auto n = k.entries.rows();
  if (n_clusters < 2 || n_clusters > n) {
    throw ConfigError("spectral clustering needs 2 <= clusters <= N = " +
                      std::to_string(n));
  }
  if ((k.entries.array() < 0.0).any()) {
    throw DataError("affinity matrix has negative entries");
  }
  const Vector inv_sqrt_deg =
      (k.entries.rowwise().sum().array() + 1e-12).rsqrt().matrix();
  Matrix a = inv_sqrt_deg.asDiagonal() * k.entries * inv_sqrt_deg.asDiagonal();
  a = 0.5 * (a + a.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Matrix u = es.eigenvectors().rightCols(n_clusters).rowwise().reverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = u.row(i).norm();
    if (norm > 0.0) u.row(i) /= norm;
  }
  return kmeans(u, n_clusters, seed);
}

Dataset mean_impute_baseline(const Dataset& d) {
  d.require_uniform();
  const int nv = d.n_attributes();
  const int nt = d.length();
  Matrix sum = Matrix::Zero(nv, nt);
  Matrix count = Matrix::Zero(nv, nt);
  for (const auto& r : d.records) {
    for (int t = 0; t < nt; ++t) {
      for (int v = 0; v < nv; ++v) {
        if (r.observed(v, t)) {
          sum(v, t) += r.values(v, t);
          count(v, t) += 1.0;
        }
      }
    }
  }
  Dataset out = d;
  for (auto& r : out.records) {
    for (int t = 0; t < nt; ++t) {
      for (int v = 0; v < nv; ++v) {
        if (r.observed(v, t)) continue;
        if (count(v, t) == 0.0) {
          throw DataError("cannot impute attribute " + std::to_string(v) +
                          " at time " + std::to_string(t) +
                          ": no observed values");
        }
        r.values(v, t) = sum(v, t) / count(v, t);
        r.mask(v, t) = 1;
      }
    }
  }
  return out;
}

KernelMatrix linear_kernel(const Dataset& rows, const Dataset& cols) {
  auto flatten = [](const Dataset& d) {
    d.require_uniform();
    Matrix x(d.size(), static_cast<Eigen::Index>(d.n_attributes()) * d.length());
    for (int i = 0; i < d.size(); ++i) {
      const auto& r = d.records[static_cast<std::size_t>(i)];
      if (r.observed_count() != r.mask.size()) {
        throw DataError("linear kernel needs fully observed series; impute first");
      }
      x.row(i) = Eigen::Map<const Vector>(r.values.data(), r.values.size()).transpose();
    }
    return x;
  };
  const Matrix a = flatten(rows);
  const Matrix b = flatten(cols);
  if (a.cols() != b.cols()) throw DataError("linear kernel: shape mismatch");
  KernelMatrix k;
  k.entries = a * b.transpose();
  k.row_self = a.rowwise().squaredNorm();
  k.col_self = b.rowwise().squaredNorm();
  for (const auto& r : rows.records) k.row_ids.push_back(r.id);
  for (const auto& r : cols.records) k.col_ids.push_back(r.id);
  return k;
}

}  // namespace tck
