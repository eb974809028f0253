#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tck/mts.hpp"

namespace tck {

/// Prior hyperparameters of one mixture model.
struct GmmHyperParams {
  double a0 = 0.1;  // inverse squared length-scale of the mean prior
  double b0 = 0.1;  // amplitude of the mean prior covariance
  double n0 = 0.01; // pseudo-count of the variance prior

  void validate() const;
};

/// Smoothness prior on the component means: N(m_v, S_v), S_v = s_v * K + jI,
/// K_tt' = b0 * exp(-a0 (t - t')^2) over the segment.
struct MeanPrior {
  Matrix prior_means;               // |V| x |T|
  Vector prior_stds;                // s_v
  Matrix kernel;                    // K, |T| x |T|
  std::vector<Matrix> prior_cov;    // S_v, jitter included
  std::vector<Matrix> prior_cov_inv;
  std::vector<Matrix> prior_cov_chol;  // lower Cholesky factor of S_v
  double jitter_factor = 0.0;          // j = jitter_factor * s_v * b0
};

MeanPrior build_prior(const EmpiricalMoments& moments,
                      const GmmHyperParams& hp, int segment_len);

struct GmmParams {
  Vector weights;            // G
  std::vector<Matrix> means; // G entries, each |V| x |T|
  Matrix stds;               // G x |V|

  [[nodiscard]] int components() const {
    return static_cast<int>(weights.size());
  }
};

/// N x G responsibilities; each row is a probability vector.
using PosteriorMatrix = Matrix;

inline constexpr double kSigmaFloor = 1e-6;

/// log N(3 | 0, 1): per-cell lower bound on the conditional log density.
double log_density_floor();

/// Sum over observed cells of the per-cell Gaussian log density under
/// component g, each cell bounded below by log N(3|0,1) when `clamp` is set.
double masked_log_component(const MaskedBlock& block, int series, int g,
                            const GmmParams& params, bool clamp = true);

PosteriorMatrix e_step(const MaskedBlock& block, const GmmParams& params,
                       bool clamp = true);

/// Closed-form MAP updates. The means use the standard deviations of
/// `previous`; the variances then use the new means.
GmmParams m_step(const MaskedBlock& block, const PosteriorMatrix& post,
                 const MeanPrior& prior, const GmmParams& previous,
                 const GmmHyperParams& hp);

/// Log posterior (up to constants) with the density floor disabled:
/// log p(X | params) + log P(mu) + log P(sigma).
double map_objective(const MaskedBlock& block, const GmmParams& params,
                     const MeanPrior& prior, const GmmHyperParams& hp);

struct FitOptions {
  int max_iter = 20;
  double tol = 1e-3;
  bool clamp = true;
  /// Called after every M-step with the iteration number (1-based).
  std::function<void(int, const GmmParams&)> on_iteration;
};

struct FitResult {
  GmmParams params;
  PosteriorMatrix posteriors;
  int iterations = 0;
  bool converged = false;
};

/// Theta uniform, sigma_gv = s_v, mu_gv drawn from the mean prior.
GmmParams initial_params(const MeanPrior& prior, int g_components,
                         std::uint64_t seed);

FitResult fit_map_em(const MaskedBlock& block, int g_components,
                     const GmmHyperParams& hp, std::uint64_t seed,
                     const FitOptions& options = {});
FitResult fit_map_em(const MaskedBlock& block, int g_components,
                     const MeanPrior& prior, const GmmHyperParams& hp,
                     std::uint64_t seed, const FitOptions& options = {});

/// Posterior of a single series restricted to (attributes, segment).
Vector posterior_for(const MtsRecord& record, std::span<const int> attributes,
                     TimeSegment segment, const GmmParams& params);

}  // namespace tck
