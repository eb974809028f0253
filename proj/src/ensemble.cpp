#include "tck/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "tck/error.hpp"
#include "tck/rng.hpp"

namespace tck {

namespace {

constexpr int kSubsetRedraws = 10;

int worker_count(int requested, std::size_t jobs) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n),
                                                std::max<std::size_t>(jobs, 1)));
}

/// Runs job(i, worker) for i in [0, jobs) on `workers` threads; rethrows the
/// first exception after all workers stop.
template <typename Job>
void parallel_for(std::size_t jobs, int workers, Job&& job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&](int worker) {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        job(i, worker);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(jobs);
        return;
      }
    }
  };
  if (workers <= 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

/// One member's additive share of a kernel block.
struct Contribution {
  Matrix k;
  Vector col_self;

  Contribution& operator+=(const Contribution& other) {
    k += other.k;
    col_self += other.col_self;
    return *this;
  }
};

double dot_rows(const double* a, const double* b, Eigen::Index g) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < g; ++i) s += a[i] * b[i];
  return s;
}

/// K_nm = Pi_n . Pi*_m; when `symmetric`, rows == cols and only one triangle
/// is evaluated so that K_nm and K_mn are the same number.
Contribution contribution(const PosteriorMatrix& rows,
                          const PosteriorMatrix& cols, bool symmetric) {
  const RowMatrix a = rows;
  const RowMatrix b = cols;
  const auto g = a.cols();
  Contribution c;
  c.k.resize(a.rows(), b.rows());
  c.col_self.resize(b.rows());
  for (Eigen::Index m = 0; m < b.rows(); ++m) {
    c.col_self(m) = dot_rows(b.row(m).data(), b.row(m).data(), g);
  }
  if (symmetric) {
    for (Eigen::Index n = 0; n < a.rows(); ++n) {
      for (Eigen::Index m = 0; m <= n; ++m) {
        const double s = dot_rows(a.row(n).data(), b.row(m).data(), g);
        c.k(n, m) = s;
        c.k(m, n) = s;
      }
    }
  } else {
    for (Eigen::Index m = 0; m < b.rows(); ++m) {
      for (Eigen::Index n = 0; n < a.rows(); ++n) {
        c.k(n, m) = dot_rows(a.row(n).data(), b.row(m).data(), g);
      }
    }
  }
  return c;
}

/// Accumulates member contributions either in completion order (one partial
/// sum per worker) or, in deterministic mode, by pairwise summation over the
/// member index order once every contribution is known.
class KernelReducer {
 public:
  KernelReducer(Eigen::Index rows, Eigen::Index cols, std::size_t members,
                int workers, bool deterministic)
      : rows_(rows), cols_(cols), deterministic_(deterministic) {
    if (deterministic_) {
      slots_.resize(members);
    } else {
      partial_.assign(static_cast<std::size_t>(workers), zero());
    }
  }

  void add(std::size_t member, int worker, Contribution c) {
    if (deterministic_) {
      slots_[member] = std::move(c);
    } else {
      partial_[static_cast<std::size_t>(worker)] += c;
    }
  }

  Contribution finish() {
    if (!deterministic_) {
      Contribution total = zero();
      for (const auto& p : partial_) total += p;
      return total;
    }
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i]) present.push_back(i);
    }
    if (present.empty()) return zero();
    return pairwise(present, 0, present.size());
  }

 private:
  Contribution zero() const {
    return {Matrix::Zero(rows_, cols_), Vector::Zero(cols_)};
  }

  Contribution pairwise(const std::vector<std::size_t>& idx, std::size_t lo,
                        std::size_t hi) {
    if (hi - lo == 1) return std::move(*slots_[idx[lo]]);
    const std::size_t mid = lo + (hi - lo) / 2;
    Contribution left = pairwise(idx, lo, mid);
    left += pairwise(idx, mid, hi);
    return left;
  }

  Eigen::Index rows_;
  Eigen::Index cols_;
  bool deterministic_;
  std::vector<Contribution> partial_;
  std::vector<std::optional<Contribution>> slots_;
};

MemberConfig draw_config(const EnsembleSpec& spec, int n, int v, int t, int q1,
                         int q2, Rng rng) {
  MemberConfig c;
  c.q1 = q1;
  c.q2 = q2;
  c.hyper.a0 = rng.uniform_open(0.001, 1.0);
  c.hyper.b0 = rng.uniform_open(0.005, 0.2);
  c.hyper.n0 = rng.uniform_open(0.001, 0.2);
  const auto len = static_cast<int>(rng.uniform_int(*spec.t_min, *spec.t_max));
  c.segment.length = len;
  c.segment.start = static_cast<int>(rng.uniform_int(0, t - len));
  const auto nv = static_cast<int>(rng.uniform_int(*spec.v_min, *spec.v_max));
  c.attributes = rng.sample_without_replacement(v, nv);
  const auto n_lo = static_cast<int>(std::ceil(spec.n_min_fraction * n - 1e-9));
  const auto ns = static_cast<int>(rng.uniform_int(std::max(n_lo, 1), n));
  c.train_subset = rng.sample_without_replacement(n, ns);
  c.member_seed = rng();
  return c;
}

Rng member_stream(const EnsembleSpec& spec, std::size_t index) {
  return Rng(spec.seed).split(index);
}

std::size_t grid_size(const EnsembleSpec& spec) {
  return static_cast<std::size_t>(spec.q_initializations) *
         static_cast<std::size_t>(*spec.c_max - 1);
}

/// Fits one member on its restriction and evaluates all N posteriors. Throws
/// NumericError or DataError when the member cannot be fitted.
Member fit_member(const Dataset& d, MemberConfig config,
                  const FitOptions& options) {
  MaskedBlock block = restrict_records(d.records, config.train_subset,
                                       config.attributes, config.segment);
  std::optional<EmpiricalMoments> moments;
  try {
    moments = empirical_moments(block);
  } catch (const DataError&) {
    // A (v, t) unobserved within the subset: redraw the subset, then fall
    // back to every series.
    Rng redraw = Rng(config.member_seed).split(0x5eedu);
    const int n = d.size();
    const int ns = static_cast<int>(config.train_subset.size());
    for (int k = 0; k <= kSubsetRedraws && !moments; ++k) {
      config.train_subset = k < kSubsetRedraws
                                ? redraw.sample_without_replacement(n, ns)
                                : redraw.sample_without_replacement(n, n);
      block = restrict_records(d.records, config.train_subset,
                               config.attributes, config.segment);
      try {
        moments = empirical_moments(block);
      } catch (const DataError&) {
      }
    }
    if (!moments) throw;
  }
  const MeanPrior prior = build_prior(*moments, config.hyper, config.segment.length);
  FitOptions opts = options;
  opts.on_iteration = nullptr;
  FitResult fit = fit_map_em(block, config.q2, prior, config.hyper,
                             config.member_seed, opts);

  std::vector<int> all(static_cast<std::size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  const auto full = restrict_records(d.records, all, config.attributes, config.segment);
  Member m;
  m.train_posteriors = e_step(full, fit.params);
  m.params = std::move(fit.params);
  m.config = std::move(config);
  return m;
}

}  // namespace

EnsembleSpec resolve_spec(const EnsembleSpec& spec, int n, int v, int t) {
  EnsembleSpec r = spec;
  if (!r.c_max) r.c_max = n < 100 ? 10 : 40;
  if (!r.t_min) r.t_min = std::min(6, t);
  if (!r.t_max) r.t_max = t;
  if (!r.v_min) r.v_min = std::min(2, v);
  if (!r.v_max) r.v_max = v;
  if (r.q_initializations < 1) throw ConfigError("Q must be >= 1");
  if (*r.c_max < 2) throw ConfigError("C must be >= 2");
  if (!(1 <= *r.t_min && *r.t_min <= *r.t_max && *r.t_max <= t)) {
    throw ConfigError("time segment bounds must satisfy 1 <= t_min <= t_max <= T = " +
                      std::to_string(t));
  }
  if (!(1 <= *r.v_min && *r.v_min <= *r.v_max && *r.v_max <= v)) {
    throw ConfigError("attribute bounds must satisfy 1 <= v_min <= v_max <= V = " +
                      std::to_string(v));
  }
  if (!(r.n_min_fraction > 0.0 && r.n_min_fraction <= 1.0)) {
    throw ConfigError("n_min_fraction must lie in (0, 1]");
  }
  if (r.retries < 0) throw ConfigError("retries must be >= 0");
  return r;
}

std::vector<MemberConfig> sample_member_configs(const EnsembleSpec& spec_in,
                                                int n, int v, int t) {
  const EnsembleSpec spec = resolve_spec(spec_in, n, v, t);
  std::vector<MemberConfig> configs;
  configs.reserve(grid_size(spec));
  std::size_t index = 0;
  for (int q1 = 0; q1 < spec.q_initializations; ++q1) {
    for (int q2 = 2; q2 <= *spec.c_max; ++q2, ++index) {
      configs.push_back(
          draw_config(spec, n, v, t, q1, q2, member_stream(spec, index)));
    }
  }
  return configs;
}

TrainResult train_tck(const Dataset& d, const EnsembleSpec& spec_in) {
  d.require_uniform();
  const int n = d.size();
  if (n < 2) throw DataError("training needs at least 2 series");
  const EnsembleSpec spec =
      resolve_spec(spec_in, n, d.n_attributes(), d.length());
  auto configs = sample_member_configs(spec, n, d.n_attributes(), d.length());

  const int workers = worker_count(spec.threads, configs.size());
  std::vector<std::optional<Member>> members(configs.size());
  std::vector<std::optional<MemberFailure>> failures(configs.size());
  KernelReducer reducer(n, n, configs.size(), workers, spec.deterministic);

  parallel_for(configs.size(), workers, [&](std::size_t i, int worker) {
    MemberConfig config = configs[i];
    for (int attempt = 0;; ++attempt) {
      try {
        Member m = fit_member(d, config, spec.fit);
        reducer.add(i, worker,
                    contribution(m.train_posteriors, m.train_posteriors, true));
        members[i] = std::move(m);
        return;
      } catch (const NumericError& e) {
        failures[i] = MemberFailure{config, e.what()};
      } catch (const DataError& e) {
        failures[i] = MemberFailure{config, e.what()};
      }
      if (attempt >= spec.retries) return;
      config = draw_config(spec, n, d.n_attributes(), d.length(), config.q1,
                           config.q2,
                           member_stream(spec, i).split(static_cast<std::uint64_t>(attempt) + 1));
    }
  });

  TrainResult out;
  auto& model = out.model;
  model.n_train = n;
  model.n_attributes = d.n_attributes();
  model.length = d.length();
  model.normalize = spec.normalize;
  model.deterministic = spec.deterministic;
  for (const auto& r : d.records) model.train_ids.push_back(r.id);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (members[i]) {
      model.members.push_back(std::move(*members[i]));
    } else if (failures[i]) {
      model.failures.push_back(std::move(*failures[i]));
    }
  }
  if (model.members.empty()) {
    throw NumericError("every ensemble member failed to fit (" +
                       std::to_string(model.failures.size()) + " failures; first: " +
                       (model.failures.empty() ? std::string("none")
                                               : model.failures.front().reason) +
                       ")");
  }

  Contribution total = reducer.finish();
  out.kernel.entries = std::move(total.k);
  out.kernel.row_ids = model.train_ids;
  out.kernel.col_ids = model.train_ids;
  out.kernel.row_self = out.kernel.entries.diagonal();
  out.kernel.col_self = out.kernel.row_self;
  if (spec.normalize) out.kernel = normalize_kernel(out.kernel);
  return out;
}

PosteriorMatrix member_posteriors(const Member& member,
                                  std::span<const MtsRecord> records) {
  std::vector<int> all(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) all[i] = static_cast<int>(i);
  const auto block = restrict_records(records, all, member.config.attributes,
                                      member.config.segment);
  return e_step(block, member.params);
}

Dataset apply_preprocessing(const Preprocessing& p, const Dataset& d) {
  Dataset out = p.scaling ? apply_standardization(d, *p.scaling) : d;
  if (p.resample_length) out = resample_to(out, *p.resample_length);
  return out;
}

KernelMatrix test_kernel(const TckModel& model, const Dataset& test,
                         int threads) {
  test.validate();
  if (test.n_attributes() != model.n_attributes) {
    throw DataError("test data has " + std::to_string(test.n_attributes()) +
                    " attributes, model expects " +
                    std::to_string(model.n_attributes));
  }
  for (const auto& r : test.records) {
    if (r.length() != model.length) {
      throw DataError("test series '" + r.id + "' has length " +
                      std::to_string(r.length()) + ", model expects " +
                      std::to_string(model.length));
    }
  }
  if (model.members.empty()) throw DataError("model has no members");
  const auto n = static_cast<Eigen::Index>(model.n_train);
  const auto m = static_cast<Eigen::Index>(test.size());
  const int workers = worker_count(threads, model.members.size());
  KernelReducer reducer(n, m, model.members.size(), workers, model.deterministic);
  parallel_for(model.members.size(), workers, [&](std::size_t q, int worker) {
    const Member& member = model.members[q];
    reducer.add(q, worker,
                contribution(member.train_posteriors,
                             member_posteriors(member, test.records), false));
  });

  // Training self-similarities are replayed in the same reduction order as
  // the training kernel's diagonal.
  KernelReducer self_reducer(0, n, model.members.size(), workers,
                             model.deterministic);
  parallel_for(model.members.size(), workers, [&](std::size_t q, int worker) {
    const auto& p = model.members[q].train_posteriors;
    self_reducer.add(q, worker, contribution(PosteriorMatrix(0, p.cols()), p, false));
  });

  Contribution total = reducer.finish();
  KernelMatrix k;
  k.entries = std::move(total.k);
  k.col_self = std::move(total.col_self);
  k.row_self = std::move(self_reducer.finish().col_self);
  k.row_ids = model.train_ids;
  for (const auto& r : test.records) k.col_ids.push_back(r.id);
  if (model.normalize) k = normalize_kernel(k);
  return k;
}

double kernel_distance(double k_nn, double k_nm, double k_mm) {
  return std::sqrt(std::max(0.0, k_nn - 2.0 * k_nm + k_mm));
}

Matrix kernel_distances(const KernelMatrix& k) {
  if (k.row_self.size() != k.entries.rows() || k.col_self.size() != k.entries.cols()) {
    throw DataError("kernel block lacks self-similarities for distances");
  }
  Matrix d(k.entries.rows(), k.entries.cols());
  for (Eigen::Index m = 0; m < d.cols(); ++m) {
    for (Eigen::Index n = 0; n < d.rows(); ++n) {
      d(n, m) = kernel_distance(k.row_self(n), k.entries(n, m), k.col_self(m));
    }
  }
  return d;
}

KernelMatrix normalize_kernel(const KernelMatrix& k) {
  KernelMatrix out = k;
  for (Eigen::Index m = 0; m < k.entries.cols(); ++m) {
    for (Eigen::Index n = 0; n < k.entries.rows(); ++n) {
      const double z = std::sqrt(k.row_self(n) * k.col_self(m));
      out.entries(n, m) = z > 0.0 ? k.entries(n, m) / z : 0.0;
    }
  }
  out.row_self = Vector::Ones(k.row_self.size());
  out.col_self = Vector::Ones(k.col_self.size());
  return out;
}

}  // namespace tck
