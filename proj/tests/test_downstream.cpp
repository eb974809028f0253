#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "support.hpp"
#include "tck/downstream.hpp"
#include "tck/error.hpp"

using namespace tck;

namespace {

KernelMatrix square(const Matrix& k) {
  KernelMatrix out;
  out.entries = k;
  out.row_self = k.diagonal();
  out.col_self = k.diagonal();
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    out.row_ids.push_back("s" + std::to_string(i));
    out.col_ids.push_back("s" + std::to_string(i));
  }
  return out;
}

Matrix random_psd(Rng& rng, int n, int rank) {
  Matrix f(n, rank);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < rank; ++r) f(i, r) = rng.normal();
  }
  return f * f.transpose();
}

std::vector<int> random_partition(Rng& rng, int n, int k) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (auto& x : p) x = static_cast<int>(rng.uniform_int(0, k - 1));
  return p;
}

double ari_by_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  // Pair-counting form: (index - expected) / (max - expected).
  const std::size_t n = a.size();
  double same_both = 0.0;
  double same_a = 0.0;
  double same_b = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      same_both += sa && sb;
      same_a += sa;
      same_b += sb;
      pairs += 1.0;
    }
  }
  const double expected = same_a * same_b / pairs;
  const double max = 0.5 * (same_a + same_b);
  if (max == expected) return same_both == expected ? 1.0 : 0.0;
  return (same_both - expected) / (max - expected);
}

double ca_by_enumeration(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += perm[static_cast<std::size_t>(pred[i])] == truth[i];
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(pred.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Distance, Examples) {
  EXPECT_EQ(kernel_distance(5, 5, 5), 0.0);
  EXPECT_EQ(kernel_distance(2, 0, 2), 2.0);
  EXPECT_EQ(kernel_distance(1, 1.0 + 1e-15, 1), 0.0);
}

TEST(Knn, TrainingSetMatchesItself) {
  Rng rng(81);
  const Matrix k = random_psd(rng, 12, 12);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[static_cast<std::size_t>(i)] = i % 3 + 1;
  EXPECT_EQ(knn_classify(square(k), labels, 1), labels);
}

TEST(Knn, OrthogonalClassesSeparate) {
  Matrix post(6, 2);
  post << 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1;
  const Matrix k = post * post.transpose();
  const std::vector<int> labels{1, 1, 1, 2, 2, 2};
  EXPECT_EQ(knn_classify(square(k), labels, 3), labels);
}

TEST(Knn, MatchesExplicitArgmin) {
  Rng rng(82);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix f = random_psd(rng, 25, 6);
    KernelMatrix ks;
    ks.entries = f.topRightCorner(15, 10);
    ks.row_self = f.diagonal().head(15);
    ks.col_self = f.diagonal().tail(10);
    const auto labels = random_partition(rng, 15, 3);
    const auto pred = knn_classify(ks, labels, 1);
    for (int m = 0; m < 10; ++m) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int n = 0; n < 15; ++n) {
        const double d = f(n, n) - 2.0 * f(n, 15 + m) + f(15 + m, 15 + m);
        if (d < best_d) {
          best_d = d;
          best = n;
        }
      }
      EXPECT_EQ(pred[static_cast<std::size_t>(m)], labels[static_cast<std::size_t>(best)]);
    }
  }
}

TEST(Knn, VoteTiesGoToCloserThenLowerLabel) {
  Matrix d(4, 2);
  d << 1.0, 1.0,
       2.0, 1.0,
       1.5, 2.0,
       1.5, 2.0;
  const std::vector<int> labels{2, 2, 1, 1};
  // Column 0: labels 2 (sum 3) and 1 (sum 3) tie on distance too.
  // Column 1: label 2 sum 2 beats label 1 sum 4.
  const auto pred = knn_from_distances(d, labels, 4);
  EXPECT_EQ(pred[0], 1);
  EXPECT_EQ(pred[1], 2);
  EXPECT_THROW(knn_from_distances(d, labels, 5), ConfigError);
  EXPECT_THROW(knn_from_distances(d, labels, 0), ConfigError);
}

TEST(Kpca, IdentityGivesSimplex) {
  const auto e = kpca(square(Matrix::Identity(3, 3)), 2);
  EXPECT_NEAR(e.eigenvalues(0), e.eigenvalues(1), 1e-12);
  const auto& c = e.coordinates;
  const double d01 = (c.row(0) - c.row(1)).norm();
  const double d02 = (c.row(0) - c.row(2)).norm();
  const double d12 = (c.row(1) - c.row(2)).norm();
  EXPECT_NEAR(d01, d02, 1e-12);
  EXPECT_NEAR(d01, d12, 1e-12);
  EXPECT_NEAR(d01, std::sqrt(2.0), 1e-12);
}

TEST(Kpca, RankOneKernel) {
  Vector v(5);
  v << 1, 2, -1, 0.5, 3;
  const Matrix k = v * v.transpose();
  EXPECT_EQ(centered_rank(k), 1);
  const auto e = kpca(square(k), 1);
  EXPECT_GT(e.eigenvalues(0), 0.0);
  try {
    kpca(square(k), 2);
    FAIL() << "expected an error";
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("rank 1"), std::string::npos) << err.what();
  }
}

TEST(Kpca, FullRankEmbeddingIsIsometric) {
  Rng rng(83);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 10;
    const Matrix k = random_psd(rng, n, n);
    const int rank = centered_rank(k);
    ASSERT_EQ(rank, n - 1);
    const auto e = kpca(square(k), rank);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const double want = kernel_distance(k(a, a), k(a, b), k(b, b));
        EXPECT_NEAR((e.coordinates.row(a) - e.coordinates.row(b)).norm(), want, 1e-8);
      }
    }
    for (int d = 1; d < rank; ++d) EXPECT_GE(e.eigenvalues(d - 1), e.eigenvalues(d));
  }
}

TEST(Spectral, BlockDiagonalRecovered) {
  Matrix k = Matrix::Zero(10, 10);
  k.topLeftCorner(4, 4).setOnes();
  k.bottomRightCorner(6, 6).setOnes();
  const std::vector<int> truth{1, 1, 1, 1, 2, 2, 2, 2, 2, 2};
  const auto c = spectral_cluster(square(k), 2, 3);
  EXPECT_EQ(clustering_accuracy(c.labels, truth), 1.0);
  EXPECT_EQ(adjusted_rand_index(c.labels, truth), 1.0);
}

TEST(Spectral, AllOnesDoesNotCrash) {
  const auto c = spectral_cluster(square(Matrix::Ones(8, 8)), 2, 1);
  EXPECT_EQ(c.labels.size(), 8u);
  for (int l : c.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 2);
  }
}

TEST(Spectral, InvalidRequestsRejected) {
  EXPECT_THROW(spectral_cluster(square(Matrix::Ones(3, 3)), 4, 1), ConfigError);
  EXPECT_THROW(spectral_cluster(square(-Matrix::Identity(3, 3)), 2, 1), DataError);
}

TEST(Kmeans, SeparatedPointsAndDeterminism) {
  Rng rng(84);
  Matrix p(30, 2);
  for (int i = 0; i < 30; ++i) {
    p(i, 0) = (i % 3) * 10.0 + 0.1 * rng.normal();
    p(i, 1) = 0.1 * rng.normal();
  }
  const auto a = kmeans(p, 3, 5);
  const auto b = kmeans(p, 3, 5);
  EXPECT_EQ(a.labels, b.labels);
  for (int i = 3; i < 30; ++i) EXPECT_EQ(a.labels[static_cast<std::size_t>(i)], a.labels[static_cast<std::size_t>(i % 3)]);
  EXPECT_EQ(std::set<int>(a.labels.begin(), a.labels.end()).size(), 3u);
}

TEST(ClusteringAccuracy, Examples) {
  const std::vector<int> truth{1, 1, 1, 0, 0, 2};
  EXPECT_EQ(clustering_accuracy(truth, truth), 1.0);
  const std::vector<int> relabeled{7, 7, 7, 3, 3, 5};
  EXPECT_EQ(clustering_accuracy(relabeled, truth), 1.0);
  const std::vector<int> pred{0, 0, 1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(clustering_accuracy(pred, truth), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(ca_by_enumeration(pred, truth, 3), 4.0 / 6.0);
  EXPECT_THROW(clustering_accuracy(std::vector<int>{}, std::vector<int>{}), DataError);
}

TEST(ClusteringAccuracy, MatchesEnumerationOnRandomPartitions) {
  Rng rng(85);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = static_cast<int>(rng.uniform_int(2, 5));
    const int n = static_cast<int>(rng.uniform_int(1, 20));
    const auto a = random_partition(rng, n, k);
    const auto b = random_partition(rng, n, k);
    EXPECT_NEAR(clustering_accuracy(a, b), ca_by_enumeration(a, b, k), 1e-12);
  }
}

TEST(ClusteringAccuracy, MoreClustersThanClasses) {
  const std::vector<int> pred{0, 1, 2, 3};
  const std::vector<int> truth{1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(clustering_accuracy(pred, truth), 0.5);
}

TEST(Hungarian, MatchesBruteForce) {
  Rng rng(86);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    Matrix c(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) c(i, j) = std::floor(10.0 * rng.uniform());
    }
    const auto a = hungarian_min_cost(c);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += c(i, a[static_cast<std::size_t>(i)]);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_EQ(got, best);
  }
}

TEST(Ari, Examples) {
  const std::vector<int> a{1, 1, 2, 2, 3};
  EXPECT_EQ(adjusted_rand_index(a, a), 1.0);
  const std::vector<int> one(6, 0);
  const std::vector<int> singletons{0, 1, 2, 3, 4, 5};
  EXPECT_EQ(adjusted_rand_index(one, singletons), 0.0);
  EXPECT_EQ(adjusted_rand_index(singletons, one), 0.0);
  EXPECT_THROW(adjusted_rand_index(std::vector<int>{1}, std::vector<int>{1}), DataError);
}

TEST(Ari, MatchesPairCounting) {
  Rng rng(87);
  for (int rep = 0; rep < 300; ++rep) {
    const auto a = random_partition(rng, 8, static_cast<int>(rng.uniform_int(1, 4)));
    const auto b = random_partition(rng, 8, static_cast<int>(rng.uniform_int(1, 4)));
    EXPECT_NEAR(adjusted_rand_index(a, b), ari_by_pairs(a, b), 1e-12);
    EXPECT_NEAR(adjusted_rand_index(a, b), adjusted_rand_index(b, a), 1e-12);
  }
}

TEST(Accuracy, CountsMatches) {
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 2, 2}, std::vector<int>{1, 2, 1}), 2.0 / 3.0);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), DataError);
}

TEST(MeanImpute, Examples) {
  Dataset d;
  Matrix x(1, 2);
  x << 1, 5;
  d.records.push_back(make_record("a", x));
  x << 3, 5;
  d.records.push_back(make_record("b", x));
  d.records.push_back(make_record("c", x));
  d.records[2].mask(0, 0) = 0;
  d.records[2].values(0, 0) = std::nan("");
  const auto out = mean_impute_baseline(d);
  EXPECT_EQ(out.records[2].values(0, 0), 2.0);
  EXPECT_EQ(out.records[2].mask(0, 0), 1);
  EXPECT_EQ(mean_impute_baseline(out).records[2].values, out.records[2].values);

  d.records[0].mask(0, 0) = 0;
  d.records[1].mask(0, 0) = 0;
  EXPECT_THROW(mean_impute_baseline(d), DataError);
}

TEST(MeanImpute, FillsWithObservedMeans) {
  Rng rng(88);
  const auto d = fixtures::random_dataset(rng, 12, 3, 6, 0.4);
  const auto out = mean_impute_baseline(d);
  for (int v = 0; v < 3; ++v) {
    for (int t = 0; t < 6; ++t) {
      double s = 0.0;
      int c = 0;
      for (const auto& r : d.records) {
        if (r.observed(v, t)) {
          s += r.values(v, t);
          ++c;
        }
      }
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        const double want = d.records[i].observed(v, t) ? d.records[i].values(v, t) : s / c;
        EXPECT_NEAR(out.records[i].values(v, t), want, 1e-12);
      }
    }
  }
}

TEST(LinearKernel, InnerProductsOfFlattenedSeries) {
  Rng rng(89);
  const auto a = fixtures::random_dataset(rng, 4, 2, 3, 0.0);
  const auto b = fixtures::random_dataset(rng, 3, 2, 3, 0.0);
  const auto k = linear_kernel(a, b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double want = (a.records[static_cast<std::size_t>(i)].values.array() *
                           b.records[static_cast<std::size_t>(j)].values.array()).sum();
      EXPECT_NEAR(k.entries(i, j), want, 1e-12);
    }
  }
  EXPECT_THROW(linear_kernel(fixtures::random_dataset(rng, 4, 2, 3, 0.5), b), DataError);
}
