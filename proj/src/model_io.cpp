#include <array>
#include <bit>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "tck/ensemble.hpp"
#include "tck/error.hpp"

namespace tck {

using nlohmann::json;

namespace {

constexpr std::string_view kModelMagic = "tck-model";
constexpr std::string_view kKernelMagic = "tck-kernel";
constexpr int kKernelFormatVersion = 1;

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path + "'");
}

json encode_matrix(const Matrix& m) {
  // Row-major little-endian doubles.
  const RowMatrix r = m;
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", base64_encode(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())))}};
}

Matrix decode_matrix(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = base64_decode(j.at("data").get<std::string>());
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("matrix block has " + std::to_string(data.size()) +
                    " values, expected " + std::to_string(rows * cols));
  }
  RowMatrix r(rows, cols);
  std::copy(data.begin(), data.end(), r.data());
  return r;
}

json encode_vector(const Vector& v) {
  return base64_encode(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Vector decode_vector(const json& j) {
  const auto data = base64_decode(j.get<std::string>());
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json encode_config(const MemberConfig& c) {
  return {{"q1", c.q1},
          {"q2", c.q2},
          {"a0", c.hyper.a0},
          {"b0", c.hyper.b0},
          {"n0", c.hyper.n0},
          {"segment_start", c.segment.start},
          {"segment_length", c.segment.length},
          {"attributes", c.attributes},
          {"train_subset", c.train_subset},
          {"seed", c.member_seed}};
}

MemberConfig decode_config(const json& j) {
  MemberConfig c;
  c.q1 = j.at("q1").get<int>();
  c.q2 = j.at("q2").get<int>();
  c.hyper.a0 = j.at("a0").get<double>();
  c.hyper.b0 = j.at("b0").get<double>();
  c.hyper.n0 = j.at("n0").get<double>();
  c.segment.start = j.at("segment_start").get<int>();
  c.segment.length = j.at("segment_length").get<int>();
  c.attributes = j.at("attributes").get<std::vector<int>>();
  c.train_subset = j.at("train_subset").get<std::vector<int>>();
  c.member_seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void check_magic(const json& j, std::string_view magic, int version) {
  if (!j.is_object() || !j.contains("format") ||
      j.at("format") != std::string(magic)) {
    throw DataError("not a " + std::string(magic) + " file (bad format header)");
  }
  const int found = j.value("version", -1);
  if (found != version) {
    throw DataError("unsupported " + std::string(magic) + " version " +
                    std::to_string(found) + " (expected " +
                    std::to_string(version) + ")");
  }
}

json parse_json(const std::string& text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + " file is truncated or malformed: " + e.what());
  }
}

}  // namespace

std::string base64_encode(std::span<const double> values) {
  std::string bytes;
  bytes.reserve(values.size() * 8);
  for (double x : values) {
    const auto u = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
  }
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    unsigned n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(n >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<double> base64_decode(const std::string& text) {
  std::array<int, 256> lut{};
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kAlphabet[i])] = i;
  if (text.size() % 4 != 0) throw DataError("base64 block has a truncated length");
  std::string bytes;
  bytes.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    unsigned n = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int val = 0;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        val = lut[static_cast<unsigned char>(c)];
        if (val < 0 || pad > 0) throw DataError("invalid base64 character");
      }
      n = (n << 6) | static_cast<unsigned>(val);
    }
    bytes.push_back(static_cast<char>((n >> 16) & 0xff));
    if (pad < 2) bytes.push_back(static_cast<char>((n >> 8) & 0xff));
    if (pad < 1) bytes.push_back(static_cast<char>(n & 0xff));
  }
  if (bytes.size() % 8 != 0) throw DataError("float block is not a whole number of doubles");
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) {
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[v * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    values[v] = std::bit_cast<double>(u);
  }
  return values;
}

std::string serialize_model(const TckModel& model) {
  json j;
  j["format"] = kModelMagic;
  j["version"] = kModelFormatVersion;
  j["n_train"] = model.n_train;
  j["n_attributes"] = model.n_attributes;
  j["length"] = model.length;
  j["train_ids"] = model.train_ids;
  j["normalize"] = model.normalize;
  j["deterministic"] = model.deterministic;
  json pre = json::object();
  if (model.preprocessing.scaling) {
    pre["means"] = model.preprocessing.scaling->means;
    pre["stds"] = model.preprocessing.scaling->stds;
  }
  if (model.preprocessing.resample_length) {
    pre["resample_length"] = *model.preprocessing.resample_length;
  }
  j["preprocessing"] = pre;

  json members = json::array();
  for (const auto& m : model.members) {
    json jm = encode_config(m.config);
    jm["weights"] = encode_vector(m.params.weights);
    Matrix means(m.params.components(), m.params.means.front().size());
    for (int g = 0; g < m.params.components(); ++g) {
      const RowMatrix mu = m.params.means[static_cast<std::size_t>(g)];
      means.row(g) = Eigen::Map<const Vector>(mu.data(), mu.size()).transpose();
    }
    jm["means"] = encode_matrix(means);
    jm["stds"] = encode_matrix(m.params.stds);
    jm["posteriors"] = encode_matrix(m.train_posteriors);
    members.push_back(std::move(jm));
  }
  j["members"] = std::move(members);
  json failures = json::array();
  for (const auto& f : model.failures) {
    json jf = encode_config(f.config);
    jf["reason"] = f.reason;
    failures.push_back(std::move(jf));
  }
  j["failures"] = std::move(failures);
  return j.dump();
}

TckModel deserialize_model(const std::string& text) {
  const json j = parse_json(text, "model");
  check_magic(j, kModelMagic, kModelFormatVersion);
  try {
    TckModel model;
    model.n_train = j.at("n_train").get<int>();
    model.n_attributes = j.at("n_attributes").get<int>();
    model.length = j.at("length").get<int>();
    model.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    model.normalize = j.at("normalize").get<bool>();
    model.deterministic = j.value("deterministic", false);
    const auto& pre = j.at("preprocessing");
    if (pre.contains("means")) {
      model.preprocessing.scaling = AttributeScaling{
          pre.at("means").get<std::vector<double>>(),
          pre.at("stds").get<std::vector<double>>()};
    }
    if (pre.contains("resample_length")) {
      model.preprocessing.resample_length = pre.at("resample_length").get<int>();
    }
    for (const auto& jm : j.at("members")) {
      Member m;
      m.config = decode_config(jm);
      m.params.weights = decode_vector(jm.at("weights"));
      const Matrix means = decode_matrix(jm.at("means"));
      m.params.stds = decode_matrix(jm.at("stds"));
      m.train_posteriors = decode_matrix(jm.at("posteriors"));
      const auto g = m.params.weights.size();
      const auto nv = static_cast<Eigen::Index>(m.config.attributes.size());
      const auto nt = static_cast<Eigen::Index>(m.config.segment.length);
      if (means.rows() != g || means.cols() != nv * nt || m.params.stds.rows() != g ||
          m.params.stds.cols() != nv || m.train_posteriors.rows() != model.n_train ||
          m.train_posteriors.cols() != g) {
        throw DataError("member block shapes are inconsistent");
      }
      for (Eigen::Index k = 0; k < g; ++k) {
        const Vector row = means.row(k).transpose();
        m.params.means.emplace_back(
            Eigen::Map<const RowMatrix>(row.data(), nv, nt));
      }
      model.members.push_back(std::move(m));
    }
    for (const auto& jf : j.at("failures")) {
      model.failures.push_back({decode_config(jf), jf.at("reason").get<std::string>()});
    }
    if (static_cast<int>(model.train_ids.size()) != model.n_train) {
      throw DataError("train id count does not match n_train");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is incomplete: ") + e.what());
  }
}

void save_model(const TckModel& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

TckModel load_model(const std::string& path) {
  return deserialize_model(read_file(path));
}

void save_kernel_json(const KernelMatrix& k, const std::string& path) {
  json j;
  j["format"] = kKernelMagic;
  j["version"] = kKernelFormatVersion;
  j["row_ids"] = k.row_ids;
  j["col_ids"] = k.col_ids;
  j["entries"] = encode_matrix(k.entries);
  j["row_self"] = encode_vector(k.row_self);
  j["col_self"] = encode_vector(k.col_self);
  write_file(path, j.dump());
}

KernelMatrix load_kernel_json(const std::string& path) {
  const json j = parse_json(read_file(path), "kernel");
  check_magic(j, kKernelMagic, kKernelFormatVersion);
  try {
    KernelMatrix k;
    k.row_ids = j.at("row_ids").get<std::vector<std::string>>();
    k.col_ids = j.at("col_ids").get<std::vector<std::string>>();
    k.entries = decode_matrix(j.at("entries"));
    k.row_self = decode_vector(j.at("row_self"));
    k.col_self = decode_vector(j.at("col_self"));
    if (static_cast<Eigen::Index>(k.row_ids.size()) != k.entries.rows() ||
        static_cast<Eigen::Index>(k.col_ids.size()) != k.entries.cols() ||
        k.row_self.size() != k.entries.rows() || k.col_self.size() != k.entries.cols()) {
      throw DataError("kernel block shapes are inconsistent");
    }
    return k;
  } catch (const json::exception& e) {
    throw DataError(std::string("kernel file is incomplete: ") + e.what());
  }
}

void save_kernel_csv(const KernelMatrix& k, const std::string& path) {
  std::ostringstream os;
  os.precision(17);
  os << "id";
  for (const auto& c : k.col_ids) os << ',' << c;
  os << '\n';
  for (Eigen::Index n = 0; n < k.entries.rows(); ++n) {
    os << k.row_ids[static_cast<std::size_t>(n)];
    for (Eigen::Index m = 0; m < k.entries.cols(); ++m) os << ',' << k.entries(n, m);
    os << '\n';
  }
  write_file(path, os.str());
}

}  // namespace tck
