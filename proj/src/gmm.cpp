#include "tck/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

constexpr double kJitterStart = 1e-8;
constexpr double kJitterMax = 1e-2;
constexpr double kInverseTol = 1e-6;

std::string hp_text(const GmmHyperParams& hp) {
  std::ostringstream os;
  os << "a0=" << hp.a0 << ", b0=" << hp.b0;
  return os.str();
}

void check_block(const MaskedBlock& block, const GmmParams& params) {
  if (params.means.empty() || params.stds.cols() != block.n_attributes() ||
      params.means.front().rows() != block.n_attributes() ||
      params.means.front().cols() != block.length()) {
    throw DataError("mixture parameters do not match the restricted data shape");
  }
}

}  // namespace

void GmmHyperParams::validate() const {
  if (!(a0 > 0.0 && b0 > 0.0 && n0 > 0.0)) {
    throw ConfigError("hyperparameters a0, b0, N0 must be strictly positive");
  }
}

double log_density_floor() { return -kHalfLog2Pi - 4.5; }

MeanPrior build_prior(const EmpiricalMoments& moments,
                      const GmmHyperParams& hp, int segment_len) {
  hp.validate();
  if (segment_len < 1) throw ConfigError("segment length must be >= 1");
  if (moments.means.cols() != segment_len) {
    throw DataError("empirical means do not cover the segment");
  }
  const auto nt = static_cast<Eigen::Index>(segment_len);
  MeanPrior prior;
  prior.prior_means = moments.means;
  prior.prior_stds = moments.stds;
  prior.kernel.resize(nt, nt);
  for (Eigen::Index t = 0; t < nt; ++t) {
    for (Eigen::Index u = 0; u < nt; ++u) {
      const auto dt = static_cast<double>(t - u);
      prior.kernel(t, u) = hp.b0 * std::exp(-hp.a0 * dt * dt);
    }
  }
  const Matrix eye = Matrix::Identity(nt, nt);
  // A single jitter level is shared by all attributes of the prior.
  for (double factor = kJitterStart; factor <= kJitterMax * (1 + 1e-9);
       factor *= 10.0) {
    prior.prior_cov.clear();
    prior.prior_cov_inv.clear();
    prior.prior_cov_chol.clear();
    bool ok = true;
    for (Eigen::Index v = 0; v < moments.stds.size() && ok; ++v) {
      const double s = moments.stds(v);
      Matrix cov = s * prior.kernel;
      cov.diagonal().array() += factor * s * hp.b0;
      Eigen::LLT<Matrix> llt(cov);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Matrix inv = llt.solve(eye);
      inv = 0.5 * (inv + inv.transpose()).eval();
      if (!inv.allFinite() || ((inv * cov) - eye).cwiseAbs().maxCoeff() > kInverseTol) {
        ok = false;
        break;
      }
      prior.prior_cov_chol.emplace_back(llt.matrixL());
      prior.prior_cov.push_back(std::move(cov));
      prior.prior_cov_inv.push_back(std::move(inv));
    }
    if (ok) {
      prior.jitter_factor = factor;
      return prior;
    }
  }
  throw NumericError("mean prior covariance is not invertible for " +
                     hp_text(hp) + " and segment length " +
                     std::to_string(segment_len));
}

double masked_log_component(const MaskedBlock& block, int series, int g,
                            const GmmParams& params, bool clamp) {
  check_block(block, params);
  const double floor = clamp ? log_density_floor()
                             : -std::numeric_limits<double>::infinity();
  const auto& mu = params.means[static_cast<std::size_t>(g)];
  double total = 0.0;
  for (int v = 0; v < block.n_attributes(); ++v) {
    const double sigma = params.stds(g, v);
    const double c = -kHalfLog2Pi - std::log(sigma);
    const double h = 0.5 / (sigma * sigma);
    const auto& x = block.values[static_cast<std::size_t>(v)];
    const auto& r = block.mask[static_cast<std::size_t>(v)];
    for (int t = 0; t < block.length(); ++t) {
      if (r(series, t) == 0.0) continue;
      const double d = x(series, t) - mu(v, t);
      total += std::max(c - h * d * d, floor);
    }
  }
  return total;
}

PosteriorMatrix e_step(const MaskedBlock& block, const GmmParams& params,
                       bool clamp) {
  check_block(block, params);
  const int n = block.n_series();
  const int ng = params.components();
  const int nv = block.n_attributes();
  const int nt = block.length();
  const double floor = clamp ? log_density_floor()
                             : -std::numeric_limits<double>::infinity();

  Matrix log_norm(ng, nv);
  Matrix half_prec(ng, nv);
  for (int g = 0; g < ng; ++g) {
    for (int v = 0; v < nv; ++v) {
      const double sigma = params.stds(g, v);
      log_norm(g, v) = -kHalfLog2Pi - std::log(sigma);
      half_prec(g, v) = 0.5 / (sigma * sigma);
    }
  }
  Vector log_weights(ng);
  for (int g = 0; g < ng; ++g) {
    log_weights(g) = params.weights(g) > 0.0
                         ? std::log(params.weights(g))
                         : -std::numeric_limits<double>::infinity();
  }

  PosteriorMatrix post(n, ng);
  Vector logp(ng);
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < ng; ++g) {
      const auto& mu = params.means[static_cast<std::size_t>(g)];
      double total = 0.0;
      for (int v = 0; v < nv; ++v) {
        const double c = log_norm(g, v);
        const double h = half_prec(g, v);
        const double* x = block.values[static_cast<std::size_t>(v)].row(i).data();
        const double* r = block.mask[static_cast<std::size_t>(v)].row(i).data();
        for (int t = 0; t < nt; ++t) {
          if (r[t] == 0.0) continue;
          const double d = x[t] - mu(v, t);
          total += std::max(c - h * d * d, floor);
        }
      }
      logp(g) = log_weights(g) + total;
    }
    const double top = logp.maxCoeff();
    double z = 0.0;
    for (int g = 0; g < ng; ++g) {
      const double e = std::isfinite(logp(g)) ? std::exp(logp(g) - top) : 0.0;
      post(i, g) = e;
      z += e;
    }
    post.row(i) /= z;
  }
  return post;
}

GmmParams m_step(const MaskedBlock& block, const PosteriorMatrix& post,
                 const MeanPrior& prior, const GmmParams& previous,
                 const GmmHyperParams& hp) {
  check_block(block, previous);
  const int n = block.n_series();
  const int ng = static_cast<int>(post.cols());
  const int nv = block.n_attributes();
  const int nt = block.length();
  if (post.rows() != n || ng != previous.components()) {
    throw DataError("posterior matrix shape does not match the data");
  }

  GmmParams next;
  next.weights = post.colwise().sum().transpose() / static_cast<double>(n);
  next.means.assign(static_cast<std::size_t>(ng), Matrix(nv, nt));
  next.stds.resize(ng, nv);

  for (int v = 0; v < nv; ++v) {
    const auto& x = block.values[static_cast<std::size_t>(v)];
    const auto& r = block.mask[static_cast<std::size_t>(v)];
    // Per component: w_t = sum_n pi r, y_t = sum_n pi r x.
    const Matrix w = post.transpose() * r;
    const Matrix y = post.transpose() * x;
    const Matrix& cov = prior.prior_cov[static_cast<std::size_t>(v)];
    const Vector m = prior.prior_means.row(v).transpose();
    const double s = prior.prior_stds(v);

    for (int g = 0; g < ng; ++g) {
      const double var = previous.stds(g, v) * previous.stds(g, v);
      // mu = (S^-1 + D/var)^-1 (S^-1 m + y/var), evaluated as
      // mu = m + S E B^-1 u with D = E^2, B = var I + E S E and
      // u = E^-1 (y - D m); u vanishes wherever D does.
      Vector e(nt);
      Vector u(nt);
      for (int t = 0; t < nt; ++t) {
        const double dt = w(g, t);
        e(t) = std::sqrt(dt);
        u(t) = dt > 0.0 ? (y(g, t) - dt * m(t)) / e(t) : 0.0;
      }
      Matrix b = e.asDiagonal() * cov * e.asDiagonal();
      b.diagonal().array() += var;
      Eigen::LLT<Matrix> llt(b);
      if (llt.info() != Eigen::Success) {
        throw NumericError("mean update system is not positive definite");
      }
      const Vector z = llt.solve(u);
      const Vector mu = m + cov * (e.asDiagonal() * z);
      if (!mu.allFinite()) throw NumericError("mean update produced non-finite values");
      next.means[static_cast<std::size_t>(g)].row(v) = mu.transpose();
    }

    for (int g = 0; g < ng; ++g) {
      const auto mu = next.means[static_cast<std::size_t>(g)].row(v);
      double weight = 0.0;
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const double p = post(i, g);
        double cell = 0.0;
        double cnt = 0.0;
        for (int t = 0; t < nt; ++t) {
          if (r(i, t) == 0.0) continue;
          const double d = x(i, t) - mu(t);
          cell += d * d;
          cnt += 1.0;
        }
        weight += p * cnt;
        ss += p * cell;
      }
      const double var = (hp.n0 * s * s + ss) / (hp.n0 + weight);
      next.stds(g, v) = std::max(std::sqrt(var), kSigmaFloor);
    }
  }
  return next;
}

double map_objective(const MaskedBlock& block, const GmmParams& params,
                     const MeanPrior& prior, const GmmHyperParams& hp) {
  const int n = block.n_series();
  const int ng = params.components();
  double loglik = 0.0;
  Vector logp(ng);
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < ng; ++g) {
      logp(g) = std::log(params.weights(g)) +
                masked_log_component(block, i, g, params, false);
    }
    const double top = logp.maxCoeff();
    loglik += top + std::log((logp.array() - top).exp().sum());
  }
  double log_prior = 0.0;
  for (int v = 0; v < block.n_attributes(); ++v) {
    const auto& inv = prior.prior_cov_inv[static_cast<std::size_t>(v)];
    const Vector m = prior.prior_means.row(v).transpose();
    const double s = prior.prior_stds(v);
    for (int g = 0; g < ng; ++g) {
      const Vector d = params.means[static_cast<std::size_t>(g)].row(v).transpose() - m;
      log_prior -= 0.5 * d.dot(inv * d);
      const double sigma = params.stds(g, v);
      // P(sigma) proportional to sigma^-N0 exp(-N0 s^2 / (2 sigma^2)).
      log_prior += -hp.n0 * std::log(sigma) - hp.n0 * s * s / (2.0 * sigma * sigma);
    }
  }
  return loglik + log_prior;
}

GmmParams initial_params(const MeanPrior& prior, int g_components,
                         std::uint64_t seed) {
  const auto nv = prior.prior_means.rows();
  const auto nt = prior.prior_means.cols();
  Rng rng(seed);
  GmmParams p;
  p.weights = Vector::Constant(g_components, 1.0 / g_components);
  p.means.assign(static_cast<std::size_t>(g_components), Matrix(nv, nt));
  p.stds.resize(g_components, nv);
  Vector z(nt);
  for (int g = 0; g < g_components; ++g) {
    for (Eigen::Index v = 0; v < nv; ++v) {
      for (Eigen::Index t = 0; t < nt; ++t) z(t) = rng.normal();
      const Vector draw = prior.prior_means.row(v).transpose() +
                          prior.prior_cov_chol[static_cast<std::size_t>(v)] * z;
      p.means[static_cast<std::size_t>(g)].row(v) = draw.transpose();
      p.stds(g, v) = prior.prior_stds(v);
    }
  }
  return p;
}

FitResult fit_map_em(const MaskedBlock& block, int g_components,
                     const GmmHyperParams& hp, std::uint64_t seed,
                     const FitOptions& options) {
  const auto moments = empirical_moments(block);
  const auto prior = build_prior(moments, hp, block.length());
  return fit_map_em(block, g_components, prior, hp, seed, options);
}

FitResult fit_map_em(const MaskedBlock& block, int g_components,
                     const MeanPrior& prior, const GmmHyperParams& hp,
                     std::uint64_t seed, const FitOptions& options) {
  if (g_components < 1) throw ConfigError("number of components must be >= 1");
  if (block.n_series() < 1) throw DataError("cannot fit a mixture to no series");
  FitResult fit;
  fit.params = initial_params(prior, g_components, seed);
  fit.posteriors = e_step(block, fit.params, options.clamp);
  for (int it = 1; it <= options.max_iter; ++it) {
    fit.params = m_step(block, fit.posteriors, prior, fit.params, hp);
    fit.iterations = it;
    if (options.on_iteration) options.on_iteration(it, fit.params);
    PosteriorMatrix next = e_step(block, fit.params, options.clamp);
    const double change = (next - fit.posteriors).cwiseAbs().maxCoeff();
    fit.posteriors = std::move(next);
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

Vector posterior_for(const MtsRecord& record, std::span<const int> attributes,
                     TimeSegment segment, const GmmParams& params) {
  if (static_cast<int>(attributes.size()) != params.stds.cols()) {
    throw DataError("attribute subset does not match the mixture parameters");
  }
  const auto block = restrict_record(record, attributes, segment);
  return e_step(block, params).row(0).transpose();
}

}  // namespace tck
