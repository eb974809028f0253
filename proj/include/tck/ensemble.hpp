#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tck/gmm.hpp"
#include "tck/mts.hpp"

namespace tck {

/// Ensemble layout. Unset bounds resolve against the data shape:
/// C = 40 (10 when N < 100), T bounds [min(6, T), T], V bounds [min(2, V), V].
struct EnsembleSpec {
  int q_initializations = 30;
  std::optional<int> c_max;
  std::optional<int> t_min;
  std::optional<int> t_max;
  std::optional<int> v_min;
  std::optional<int> v_max;
  double n_min_fraction = 0.8;
  std::uint64_t seed = 0;

  FitOptions fit;
  /// Redraws of a member whose fit fails; 0 skips failed members.
  int retries = 0;
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
  /// Pairwise reduction over members in index order (bit-reproducible).
  bool deterministic = false;
  /// Cosine normalization K_nm / sqrt(K_nn K_mm) of produced kernels.
  bool normalize = false;
};

/// Fills unset bounds for an N x V x T dataset and checks the invariants.
EnsembleSpec resolve_spec(const EnsembleSpec& spec, int n, int v, int t);

/// Randomization record of one ensemble member; indices are zero-based and
/// absolute.
struct MemberConfig {
  int q1 = 0;
  int q2 = 2;
  GmmHyperParams hyper;
  TimeSegment segment;
  std::vector<int> attributes;
  std::vector<int> train_subset;
  std::uint64_t member_seed = 0;
};

/// One config per (q1, q2) in {0..Q-1} x {2..C}, ordered by q1 then q2.
std::vector<MemberConfig> sample_member_configs(const EnsembleSpec& spec, int n,
                                                int v, int t);

struct Member {
  MemberConfig config;
  GmmParams params;
  PosteriorMatrix train_posteriors;  // N x q2
};

struct MemberFailure {
  MemberConfig config;
  std::string reason;
};

/// Preprocessing applied before training; replayed on test data.
struct Preprocessing {
  std::optional<AttributeScaling> scaling;
  std::optional<int> resample_length;
};

/// Replays stored scaling and resampling on new data.
Dataset apply_preprocessing(const Preprocessing& p, const Dataset& d);

struct TckModel {
  std::vector<Member> members;
  std::vector<MemberFailure> failures;
  int n_train = 0;
  int n_attributes = 0;
  int length = 0;
  std::vector<std::string> train_ids;
  bool normalize = false;
  bool deterministic = false;
  Preprocessing preprocessing;
};

/// Kernel block; `row_self` / `col_self` hold K(x, x) of the row and column
/// series, which distance conversion and normalization need.
struct KernelMatrix {
  Matrix entries;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Vector row_self;
  Vector col_self;
};

struct TrainResult {
  TckModel model;
  KernelMatrix kernel;
};

TrainResult train_tck(const Dataset& d, const EnsembleSpec& spec);

KernelMatrix test_kernel(const TckModel& model, const Dataset& test,
                         int threads = 0);

/// Posteriors of `records` under one member, stacked as rows.
PosteriorMatrix member_posteriors(const Member& member,
                                  std::span<const MtsRecord> records);

/// Induced pseudo-metric sqrt(max(0, k_nn - 2 k_nm + k_mm)).
double kernel_distance(double k_nn, double k_nm, double k_mm);

/// Pairwise distances between rows and columns of a kernel block.
Matrix kernel_distances(const KernelMatrix& k);

/// Feature-space cosine normalization.
KernelMatrix normalize_kernel(const KernelMatrix& k);

// -- persistence --------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

void save_model(const TckModel& model, const std::string& path);
TckModel load_model(const std::string& path);
std::string serialize_model(const TckModel& model);
TckModel deserialize_model(const std::string& text);

void save_kernel_json(const KernelMatrix& k, const std::string& path);
KernelMatrix load_kernel_json(const std::string& path);
void save_kernel_csv(const KernelMatrix& k, const std::string& path);

std::string base64_encode(std::span<const double> values);
std::vector<double> base64_decode(const std::string& text);

}  // namespace tck
