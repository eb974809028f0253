#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "json.hpp"
#include "report.hpp"
#include "tck/downstream.hpp"
#include "tck/ensemble.hpp"
#include "tck/error.hpp"
#include "tck/synthetic.hpp"

namespace tck::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;
  bool deterministic = false;
  std::string config;
  std::string out_dir = ".";
};

// Flags do not capture their defaults on their own.
CLI::Option* add_switch(CLI::App* sub, const std::string& name, bool& target,
                        const std::string& help) {
  return sub->add_flag(name, target, help)->default_str(target ? "true" : "false");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  add_switch(sub, "--deterministic", c.deterministic,
                "Pairwise kernel reduction in member order");
  sub->add_option("--config", c.config, "Flat key = value config file");
  sub->add_option("--out-dir", c.out_dir, "Output directory");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    double x = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
      throw ConfigError(what + ": '" + t + "' is not a number");
    }
    out.push_back(x);
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(trim(item));
  }
  return out;
}

std::string rate_tag(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path.string() + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Resolved option values of a subcommand, in declaration order.
std::vector<std::pair<std::string, std::string>> resolved_options(const CLI::App& sub) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? (opt->as<bool>() ? "true" : "false") : opt->get_default_str();
    } else if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) continue;
    out.emplace_back(name, value);
  }
  return out;
}

// metadata.json echoes the resolved config; run.conf re-runs the command.
void write_metadata(const fs::path& dir, const CLI::App& sub, json extra) {
  const auto opts = resolved_options(sub);
  json config = json::object();
  std::string conf = "# " + sub.get_name() + "\n";
  for (const auto& [k, v] : opts) {
    config[k] = v;
    conf += k + " = " + v + "\n";
  }
  json meta;
  meta["command"] = sub.get_name();
  meta["tool_version"] = kToolVersion;
  meta["config"] = std::move(config);
  for (auto& [k, v] : extra.items()) meta[k] = v;
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  write_text(dir / "run.conf", conf);
}

EnsembleSpec ensemble_spec_base(const Common& c) {
  EnsembleSpec s;
  s.seed = c.seed;
  s.threads = c.threads;
  s.deterministic = c.deterministic;
  return s;
}

// -- simulate -----------------------------------------------------------------

struct SimulateArgs {
  int per_class = 100;
  int length = 50;
  int burn_in = 100;
  Var1Params c1 = var1_class_one();
  Var1Params c2 = var1_class_two();
  std::string c1_mean = "0.5,-0.5";
  std::string c2_mean = "0,0";
};

void add_var_class(CLI::App* sub, const std::string& tag, Var1Params& p,
                   std::string& mean) {
  sub->add_option("--" + tag + "-rho", p.rho, "Cross correlation of class " + tag);
  sub->add_option("--" + tag + "-rho-x", p.rho_x, "Autoregression of x1");
  sub->add_option("--" + tag + "-rho-y", p.rho_y, "Autoregression of x2");
  sub->add_option("--" + tag + "-mean", mean, "Stationary mean, two comma-separated values");
}

int cmd_simulate(const CLI::App& sub, const Common& c, SimulateArgs a, std::ostream& out) {
  for (auto* p : {&a.c1, &a.c2}) {
    p->length = a.length;
    p->burn_in = a.burn_in;
  }
  for (auto [p, text, name] : {std::tuple{&a.c1, &a.c1_mean, "c1-mean"},
                               std::tuple{&a.c2, &a.c2_mean, "c2-mean"}}) {
    const auto m = parse_doubles(*text, name);
    if (m.size() != 2) throw ConfigError(std::string(name) + " needs exactly two values");
    p->mean = {m[0], m[1]};
  }
  const auto bench = make_var1_benchmark(c.seed, a.per_class, a.c1, a.c2);
  const auto dir = ensure_dir(c.out_dir);
  write_dataset(bench.train, (dir / "train.csv").string());
  write_labels(bench.train, (dir / "train_labels.csv").string());
  write_dataset(bench.test, (dir / "test.csv").string());
  write_labels(bench.test, (dir / "test_labels.csv").string());
  json extra;
  extra["outputs"] = {"train.csv", "train_labels.csv", "test.csv", "test_labels.csv"};
  extra["noise_correlation"] = {a.c1.noise_correlation(), a.c2.noise_correlation()};
  extra["noise_variance"] = 1.0;
  write_metadata(dir, sub, extra);
  out << "wrote " << bench.train.size() << " train and " << bench.test.size()
      << " test series to " << dir.string() << "\n";
  return kOk;
}

// -- inject -------------------------------------------------------------------

struct InjectArgs {
  std::string input;
  std::string pattern = "mcar";
  std::string rates = "0.1";
  bool standardize = false;
};

int cmd_inject(const CLI::App& sub, const Common& c, const InjectArgs& a, std::ostream& out) {
  const auto pattern = parse_missing_pattern(a.pattern);
  const auto rates = parse_doubles(a.rates, "rate");
  for (double p : rates) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("missing rate " + fmt(p) + " is outside [0, 1]");
    }
  }
  Dataset d = load_dataset(a.input);
  if (a.standardize) d = standardize(d);
  const auto dir = ensure_dir(c.out_dir);
  json files = json::array();
  for (double p : rates) {
    // Same seed at every rate, so a cell missing at p stays missing above p.
    const Dataset holed = p > 0.0 ? inject_missing(d, pattern, p, c.seed) : d;
    const std::string name = to_string(pattern) + "_" + rate_tag(p) + ".csv";
    write_dataset(holed, (dir / name).string());
    files.push_back({{"file", name}, {"rate", p}, {"missing_fraction", missing_fraction(holed)}});
    out << name << ": missing fraction " << missing_fraction(holed) << "\n";
  }
  json extra;
  extra["outputs"] = files;
  extra["order"] = a.standardize ? "standardize, then inject" : "inject on input scale";
  write_metadata(dir, sub, extra);
  return kOk;
}

// -- train --------------------------------------------------------------------

struct EnsembleArgs {
  int q = 30;
  std::optional<int> c_max;
  std::optional<int> t_min;
  std::optional<int> t_max;
  std::optional<int> v_min;
  std::optional<int> v_max;
  double n_min_fraction = 0.8;
  int max_iter = 20;
  double tol = 1e-3;
  int retries = 0;
};

void add_ensemble(CLI::App* sub, EnsembleArgs& e) {
  sub->add_option("--q", e.q, "Initializations per component count")
      ->check(CLI::PositiveNumber);
  sub->add_option("--c", e.c_max, "Maximal number of components (default 40, 10 if N < 100)");
  sub->add_option("--t-min", e.t_min, "Shortest time segment");
  sub->add_option("--t-max", e.t_max, "Longest time segment");
  sub->add_option("--v-min", e.v_min, "Fewest attributes per member");
  sub->add_option("--v-max", e.v_max, "Most attributes per member");
  sub->add_option("--n-min-fraction", e.n_min_fraction, "Smallest series subset fraction");
  sub->add_option("--max-iter", e.max_iter, "EM iterations");
  sub->add_option("--tol", e.tol, "Posterior change threshold");
  sub->add_option("--retries", e.retries, "Redraws of a failing member");
}

EnsembleSpec to_spec(const Common& c, const EnsembleArgs& e) {
  EnsembleSpec s = ensemble_spec_base(c);
  s.q_initializations = e.q;
  s.c_max = e.c_max;
  s.t_min = e.t_min;
  s.t_max = e.t_max;
  s.v_min = e.v_min;
  s.v_max = e.v_max;
  s.n_min_fraction = e.n_min_fraction;
  s.fit.max_iter = e.max_iter;
  s.fit.tol = e.tol;
  s.retries = e.retries;
  return s;
}

struct TrainArgs {
  std::string input;
  std::string labels;
  bool standardize = true;
  int length_cap = 25;
  bool trim_trailing = false;
  bool normalize = false;
  EnsembleArgs ensemble;
};

int cmd_train(const CLI::App& sub, const Common& c, const TrainArgs& a, std::ostream& out) {
  if (a.length_cap < 0) throw ConfigError("length-cap must be >= 0");
  const Dataset raw = load_dataset(
      a.input, a.labels.empty() ? std::nullopt : std::optional<std::string>(a.labels),
      LoadOptions{a.trim_trailing});
  Preprocessing prep;
  if (a.standardize) prep.scaling = fit_standardization(raw);
  if (a.length_cap > 0 && raw.max_length() > a.length_cap) {
    prep.resample_length = resampled_length(raw.max_length(), a.length_cap);
  }
  const Dataset d = apply_preprocessing(prep, raw);

  EnsembleSpec spec = to_spec(c, a.ensemble);
  spec.normalize = a.normalize;
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train_tck(d, spec);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.model.preprocessing = prep;

  const auto dir = ensure_dir(c.out_dir);
  save_model(result.model, (dir / "model.json").string());
  save_kernel_csv(result.kernel, (dir / "kernel.csv").string());
  save_kernel_json(result.kernel, (dir / "kernel.json").string());

  const auto resolved = resolve_spec(spec, d.size(), d.n_attributes(), d.length());
  json extra;
  extra["outputs"] = {"model.json", "kernel.csv", "kernel.json"};
  extra["resolved"] = {{"c_max", *resolved.c_max},   {"t_min", *resolved.t_min},
                       {"t_max", *resolved.t_max},   {"v_min", *resolved.v_min},
                       {"v_max", *resolved.v_max},   {"length", d.length()},
                       {"members", result.model.members.size()},
                       {"failures", result.model.failures.size()}};
  json failures = json::array();
  for (const auto& f : result.model.failures) {
    failures.push_back({{"q1", f.config.q1}, {"q2", f.config.q2}, {"reason", f.reason}});
  }
  extra["failed_members"] = failures;
  write_metadata(dir, sub, extra);
  out << "trained " << result.model.members.size() << " members ("
      << result.model.failures.size() << " failed) on " << d.size() << " series in "
      << secs << " s\n";
  return kOk;
}

// -- test-kernel --------------------------------------------------------------

struct TestKernelArgs {
  std::string model;
  std::string input;
  bool trim_trailing = false;
};

int cmd_test_kernel(const CLI::App& sub, const Common& c, const TestKernelArgs& a,
                    std::ostream& out) {
  const TckModel model = load_model(a.model);
  const Dataset raw = load_dataset(a.input, std::nullopt, LoadOptions{a.trim_trailing});
  const Dataset d = apply_preprocessing(model.preprocessing, raw);
  const auto k = test_kernel(model, d, c.threads);
  const auto dir = ensure_dir(c.out_dir);
  save_kernel_csv(k, (dir / "test_kernel.csv").string());
  save_kernel_json(k, (dir / "test_kernel.json").string());
  write_metadata(dir, sub, {{"outputs", {"test_kernel.csv", "test_kernel.json"}}});
  out << "kernel block " << k.entries.rows() << " x " << k.entries.cols() << "\n";
  return kOk;
}

// -- classify -----------------------------------------------------------------

struct ClassifyArgs {
  std::string kernel;
  std::string train_labels;
  std::string test_labels;
  int k = 1;
};

int cmd_classify(const CLI::App& sub, const Common& c, const ClassifyArgs& a,
                 std::ostream& out) {
  const auto k = load_kernel_json(a.kernel);
  const auto train = load_labels(a.train_labels, k.row_ids);
  const auto pred = knn_classify(k, train, a.k);
  const auto dir = ensure_dir(c.out_dir);
  write_labels(k.col_ids, pred, (dir / "predictions.csv").string());
  json extra;
  extra["outputs"] = {"predictions.csv"};
  if (!a.test_labels.empty()) {
    const double acc = accuracy(pred, load_labels(a.test_labels, k.col_ids));
    extra["accuracy"] = acc;
    out << "accuracy " << acc << "\n";
  }
  write_metadata(dir, sub, extra);
  return kOk;
}

// -- embed --------------------------------------------------------------------

struct EmbedArgs {
  std::string kernel;
  std::string labels;
  int dims = 2;
};

int cmd_embed(const CLI::App& sub, const Common& c, const EmbedArgs& a, std::ostream& out) {
  const auto k = load_kernel_json(a.kernel);
  const auto e = kpca(k, a.dims);
  std::optional<std::vector<int>> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels, k.row_ids);

  std::string csv = "id";
  if (a.dims == 2) {
    csv += ",x,y";
  } else {
    for (int d = 0; d < a.dims; ++d) csv += ",x" + std::to_string(d + 1);
  }
  if (labels) csv += ",label";
  csv += "\n";
  for (Eigen::Index i = 0; i < e.coordinates.rows(); ++i) {
    csv += k.row_ids[static_cast<std::size_t>(i)];
    for (int d = 0; d < a.dims; ++d) csv += "," + fmt(e.coordinates(i, d));
    if (labels) csv += "," + std::to_string((*labels)[static_cast<std::size_t>(i)]);
    csv += "\n";
  }
  const auto dir = ensure_dir(c.out_dir);
  write_text(dir / "embedding.csv", csv);
  json ev = json::array();
  for (Eigen::Index d = 0; d < e.eigenvalues.size(); ++d) ev.push_back(e.eigenvalues(d));
  write_metadata(dir, sub, {{"outputs", {"embedding.csv"}}, {"eigenvalues", ev}});
  out << "embedded " << e.coordinates.rows() << " series in " << a.dims << " dimensions\n";
  return kOk;
}

// -- cluster ------------------------------------------------------------------

struct ClusterArgs {
  std::string kernel;
  std::string labels;
  std::optional<int> k;
};

int cmd_cluster(const CLI::App& sub, const Common& c, const ClusterArgs& a,
                std::ostream& out) {
  const auto kernel = load_kernel_json(a.kernel);
  std::optional<std::vector<int>> labels;
  if (!a.labels.empty()) labels = load_labels(a.labels, kernel.row_ids);
  int k = 0;
  if (a.k) {
    k = *a.k;
  } else if (labels) {
    k = static_cast<int>(std::set<int>(labels->begin(), labels->end()).size());
  } else {
    throw ConfigError("cluster needs --k or --labels");
  }
  const auto result = spectral_cluster(kernel, k, c.seed);
  std::vector<int> one_based;
  for (int l : result.labels) one_based.push_back(l + 1);
  const auto dir = ensure_dir(c.out_dir);
  std::string csv = "id,cluster\n";
  for (std::size_t i = 0; i < one_based.size(); ++i) {
    csv += kernel.row_ids[i] + "," + std::to_string(one_based[i]) + "\n";
  }
  write_text(dir / "clusters.csv", csv);
  json extra;
  extra["outputs"] = {"clusters.csv"};
  extra["k"] = k;
  out << "clustered " << one_based.size() << " series into " << k << " groups";
  if (labels) {
    extra["clustering_accuracy"] = clustering_accuracy(one_based, *labels);
    extra["ari"] = adjusted_rand_index(one_based, *labels);
    out << "; CA " << extra["clustering_accuracy"].get<double>() << ", ARI "
        << extra["ari"].get<double>();
  }
  out << "\n";
  write_metadata(dir, sub, extra);
  return kOk;
}

// -- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string train;
  std::string train_labels;
  std::string test;
  std::string test_labels;
  int per_class = 100;
  bool standardize = true;
  // Unset: 25 for file input, off for the simulated benchmark.
  std::optional<int> length_cap;
  bool cluster = true;
  std::string pattern = "mcar";
  std::string rates = "0,0.1,0.2,0.3,0.4,0.5";
  std::string sweep = "20x30,40x30,40x10,40x50";
  EnsembleArgs ensemble;
};

std::pair<int, int> parse_sweep_point(const std::string& s) {
  const auto x = s.find('x');
  int c = 0;
  int q = 0;
  if (x != std::string::npos) {
    const auto r1 = std::from_chars(s.data(), s.data() + x, c);
    const auto r2 = std::from_chars(s.data() + x + 1, s.data() + s.size(), q);
    if (r1.ec == std::errc() && r1.ptr == s.data() + x && r2.ec == std::errc() &&
        r2.ptr == s.data() + s.size() && c >= 2 && q >= 1) {
      return {c, q};
    }
  }
  throw ConfigError("sweep point '" + s + "' must look like CxQ with C >= 2, Q >= 1");
}

int cmd_eval(const CLI::App& sub, const Common& c, const EvalArgs& a, std::ostream& out) {
  const auto pattern = parse_missing_pattern(a.pattern);
  std::vector<std::pair<int, int>> sweep;
  for (const auto& s : split_list(a.sweep)) sweep.push_back(parse_sweep_point(s));
  const auto rates = parse_doubles(a.rates, "rates");
  for (double p : rates) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("missing rate " + fmt(p) + " is outside [0, 1)");
  }

  Dataset train;
  Dataset test;
  Report report;
  report.seed = c.seed;
  const bool files = !a.train.empty() || !a.test.empty();
  if (files) {
    if (a.train.empty() || a.test.empty() || a.train_labels.empty() || a.test_labels.empty()) {
      throw ConfigError("eval on files needs --train, --train-labels, --test, --test-labels");
    }
    train = load_dataset(a.train, a.train_labels);
    test = load_dataset(a.test, a.test_labels);
    report.source = a.train;
  } else {
    auto bench = make_var1_benchmark(c.seed, a.per_class);
    train = std::move(bench.train);
    test = std::move(bench.test);
    report.source = "var1";
  }
  report.n_train = train.size();
  report.n_test = test.size();
  report.n_attributes = train.n_attributes();
  report.length = train.max_length();
  const int cap = a.length_cap.value_or(files ? 25 : 0);
  if (cap < 0) throw ConfigError("length-cap must be >= 0");
  report.length_cap = cap;
  report.standardize = a.standardize;
  report.pattern = to_string(pattern);

  SplitSettings base;
  base.spec = to_spec(c, a.ensemble);
  base.standardize = a.standardize;
  base.length_cap = cap;
  base.pattern = pattern;
  base.cluster = a.cluster;

  const auto baseline = score_split(train, test, base);
  report.accuracy = baseline.accuracy;
  report.clustering_accuracy = baseline.clustering_accuracy;
  report.ari = baseline.ari;
  report.members = baseline.members;
  report.failures = baseline.failures;
  out << "no missing data: 1NN accuracy " << baseline.accuracy;
  if (baseline.ari) {
    out << ", CA " << *baseline.clustering_accuracy << ", ARI " << *baseline.ari;
  }
  out << std::endl;

  SplitSettings quiet = base;
  quiet.cluster = false;
  for (double p : rates) {
    MissingLevel level{p, baseline.accuracy, baseline.failures};
    if (p > 0.0) {
      quiet.missing_rate = p;
      const auto s = score_split(train, test, quiet);
      level.accuracy = s.accuracy;
      level.failures = s.failures;
    }
    report.missingness.push_back(level);
    out << report.pattern << " " << rate_tag(p) << ": accuracy " << level.accuracy << std::endl;
  }

  quiet.missing_rate = 0.0;
  const int t_eff = cap > 0 && train.max_length() > cap
                        ? resampled_length(train.max_length(), cap)
                        : train.max_length();
  const int base_c =
      *resolve_spec(base.spec, train.size(), train.n_attributes(), t_eff).c_max;
  for (const auto& [cm, q] : sweep) {
    SweepPoint point{cm, q, baseline.accuracy};
    if (cm != base_c || q != base.spec.q_initializations) {
      quiet.spec.c_max = cm;
      quiet.spec.q_initializations = q;
      point.accuracy = score_split(train, test, quiet).accuracy;
    }
    report.sensitivity.push_back(point);
    out << "C=" << cm << " Q=" << q << ": accuracy " << point.accuracy << std::endl;
  }

  const auto dir = ensure_dir(c.out_dir);
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_metadata(dir, sub,
                 {{"outputs", {"report.json"}},
                  {"order", "standardize with train moments, inject, resample"}});
  return kOk;
}

// -- config handling ------------------------------------------------------------

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Inserts config entries as `--key=value` right after the subcommand, so
// explicit command-line flags (parsed later) take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
  if (args.size() < 2) return args;
  const auto path = find_config(args);
  if (!path) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : parse_config_text(read_text(*path), *path)) {
    if (key == "config" || key == "help" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw ConfigError(*path + ": unknown key '" + key + "' for command '" + args[1] + "'");
    }
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (!seen.insert(key).second) throw ConfigError(where + ": repeated key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time series cluster kernel: training, evaluation and tools", "tck"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", kToolVersion);

  Common common;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate the two-class VAR(1) benchmark");
  add_common(simulate, common);
  simulate->add_option("--per-class", sim.per_class, "Series per class and split")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--length", sim.length, "Series length")->check(CLI::PositiveNumber);
  simulate->add_option("--burn-in", sim.burn_in, "Discarded warm-up steps")
      ->check(CLI::NonNegativeNumber);
  add_var_class(simulate, "c1", sim.c1, sim.c1_mean);
  add_var_class(simulate, "c2", sim.c2, sim.c2_mean);

  InjectArgs inj;
  auto* inject = app.add_subcommand("inject", "Remove values under MCAR, MAR or MNAR");
  add_common(inject, common);
  inject->add_option("--input", inj.input, "Dataset CSV")->required();
  inject->add_option("--pattern", inj.pattern, "mcar, mar or mnar");
  inject->add_option("--rate", inj.rates, "Missing rate or comma-separated grid");
  add_switch(inject, "--standardize", inj.standardize, "Standardize before injecting");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit the kernel ensemble and write the model");
  add_common(train, common);
  train->add_option("--input", tr.input, "Training dataset CSV")->required();
  train->add_option("--labels", tr.labels, "Optional labels CSV (checked, not used)");
  add_switch(train, "--standardize,!--no-standardize", tr.standardize,
                  "Zero mean, unit std per attribute");
  train->add_option("--length-cap", tr.length_cap, "Resample longer series (0 = off)");
  add_switch(train, "--trim-trailing", tr.trim_trailing,
                  "Treat trailing all-missing columns as padding");
  add_switch(train, "--normalize", tr.normalize, "Cosine-normalize produced kernels");
  add_ensemble(train, tr.ensemble);

  TestKernelArgs tk;
  auto* tkernel = app.add_subcommand("test-kernel", "Kernel between training and new series");
  add_common(tkernel, common);
  tkernel->add_option("--model", tk.model, "Model file from train")->required();
  tkernel->add_option("--input", tk.input, "Dataset CSV")->required();
  add_switch(tkernel, "--trim-trailing", tk.trim_trailing,
                    "Treat trailing all-missing columns as padding");

  ClassifyArgs cl;
  auto* classify = app.add_subcommand("classify", "k-nearest-neighbour labels from a kernel");
  add_common(classify, common);
  classify->add_option("--kernel", cl.kernel, "Train x test kernel JSON")->required();
  classify->add_option("--train-labels", cl.train_labels, "Labels of kernel rows")->required();
  classify->add_option("--test-labels", cl.test_labels, "Optional labels for scoring");
  classify->add_option("--k", cl.k, "Neighbours")->check(CLI::PositiveNumber);

  EmbedArgs em;
  auto* embed = app.add_subcommand("embed", "Kernel PCA coordinates");
  add_common(embed, common);
  embed->add_option("--kernel", em.kernel, "Square kernel JSON")->required();
  embed->add_option("--labels", em.labels, "Optional labels copied to the output");
  embed->add_option("--dims", em.dims, "Output dimensions")->check(CLI::PositiveNumber);

  ClusterArgs cu;
  auto* cluster = app.add_subcommand("cluster", "Spectral clustering of a kernel");
  add_common(cluster, common);
  cluster->add_option("--kernel", cu.kernel, "Square kernel JSON")->required();
  cluster->add_option("--labels", cu.labels, "Labels for scoring; sets k when --k is absent");
  cluster->add_option("--k", cu.k, "Number of clusters");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Accuracy, clustering and sweeps in one report");
  add_common(eval, common);
  eval->add_option("--train", ev.train, "Training CSV (default: simulated VAR(1))");
  eval->add_option("--train-labels", ev.train_labels, "Training labels CSV");
  eval->add_option("--test", ev.test, "Test CSV");
  eval->add_option("--test-labels", ev.test_labels, "Test labels CSV");
  eval->add_option("--per-class", ev.per_class, "Simulated series per class and split")
      ->check(CLI::PositiveNumber);
  add_switch(eval, "--standardize,!--no-standardize", ev.standardize,
                 "Zero mean, unit std with training moments");
  eval->add_option("--length-cap", ev.length_cap,
                  "Resample longer series (0 = off; default 25 for files, off when simulating)");
  add_switch(eval, "--cluster,!--no-cluster", ev.cluster, "Spectral clustering of the train kernel");
  eval->add_option("--pattern", ev.pattern, "Missingness pattern for the sweep");
  eval->add_option("--rates", ev.rates, "Comma-separated missing rates");
  eval->add_option("--sweep", ev.sweep, "Comma-separated CxQ settings for the sensitivity sweep");
  add_ensemble(eval, ev.ensemble);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(std::move(args), app);
    std::vector<const char*> ptrs;
    for (const auto& a : args) ptrs.push_back(a.c_str());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    // --help / --version land here with a success code.
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(e.what()) + "\n"
                                                           : app.help());
      if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
        out << sub->help();
      }
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(*simulate, common, sim, out);
    if (inject->parsed()) return cmd_inject(*inject, common, inj, out);
    if (train->parsed()) return cmd_train(*train, common, tr, out);
    if (tkernel->parsed()) return cmd_test_kernel(*tkernel, common, tk, out);
    if (classify->parsed()) return cmd_classify(*classify, common, cl, out);
    if (embed->parsed()) return cmd_embed(*embed, common, em, out);
    if (cluster->parsed()) return cmd_cluster(*cluster, common, cu, out);
    if (eval->parsed()) return cmd_eval(*eval, common, ev, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace tck::cli
