#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tck/ensemble.hpp"
#include "tck/mts.hpp"

namespace tck {

/// k-nearest-neighbour labels for each column of a train x test kernel block,
/// using the induced pseudo-metric. Ties in the vote go to the label with the
/// smallest distance sum, then to the lowest label.
std::vector<int> knn_classify(const KernelMatrix& k_star,
                              std::span<const int> train_labels, int k = 1);

/// Same vote over an explicit train x test distance matrix.
std::vector<int> knn_from_distances(const Matrix& distances,
                                    std::span<const int> train_labels, int k);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct Embedding {
  Matrix coordinates;  // N x d
  Vector eigenvalues;  // d, nonincreasing
};

/// Kernel PCA on the double-centred kernel; coordinates are eigenvectors
/// scaled by sqrt(lambda), each signed so its largest-magnitude entry is
/// positive.
Embedding kpca(const KernelMatrix& k, int dims);

/// Number of centred-kernel eigenvalues above 1e-9 * lambda_1.
int centered_rank(const Matrix& k);

struct ClusteringResult {
  std::vector<int> labels;
  int k = 0;
};

/// Normalized spectral clustering: top eigenvectors of D^-1/2 K D^-1/2,
/// row-normalized, then k-means++ with 10 restarts of at most 100 iterations.
ClusteringResult spectral_cluster(const KernelMatrix& k, int n_clusters,
                                  std::uint64_t seed);

/// Lloyd k-means on the rows of `points`, best of `restarts` k-means++ starts.
ClusteringResult kmeans(const Matrix& points, int n_clusters, std::uint64_t seed,
                        int restarts = 10, int max_iter = 100);

/// Fraction of items matched under the best one-to-one map between
/// predicted clusters and true classes.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);

double adjusted_rand_index(std::span<const int> pred, std::span<const int> truth);

/// Solves the rectangular assignment problem, minimizing total cost.
/// Returns, for every row, its assigned column (or -1 when rows > cols).
std::vector<int> hungarian_min_cost(const Matrix& cost);

/// Fills missing cells with the observed mean at (v, t) across the dataset.
Dataset mean_impute_baseline(const Dataset& d);

/// Linear kernel <vec(X_n), vec(X_m)> between fully observed datasets.
KernelMatrix linear_kernel(const Dataset& rows, const Dataset& cols);

}  // namespace tck
