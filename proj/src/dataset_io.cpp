#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "tck/error.hpp"
#include "tck/mts.hpp"

namespace tck {

namespace {

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

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  return lines;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

struct Row {
  std::string id;
  std::string attribute;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
};

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& origin) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(origin + ": empty file");
  auto header = split_fields(lines.front());
  if (header.size() < 3 || trim(header[0]) != "id" ||
      trim(header[1]) != "attribute") {
    throw DataError(origin + ": header must be 'id,attribute,t1,...,tT'");
  }
  const std::size_t width = header.size();
  const std::size_t length = width - 2;

  std::vector<std::string> ids;
  std::vector<std::string> attributes;
  std::unordered_map<std::string, std::size_t> id_index;
  std::unordered_map<std::string, std::size_t> attr_index;
  std::map<std::pair<std::size_t, std::size_t>, Row> rows;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto where = origin + ":" + std::to_string(li + 1);
    const auto fields = split_fields(lines[li]);
    if (fields.size() != width) {
      throw DataError(where + ": ragged row with " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(width));
    }
    Row row;
    row.id = std::string(trim(fields[0]));
    row.attribute = std::string(trim(fields[1]));
    if (row.id.empty()) throw DataError(where + ": empty series id");
    row.values.assign(length, std::numeric_limits<double>::quiet_NaN());
    row.observed.assign(length, 0);
    for (std::size_t t = 0; t < length; ++t) {
      const auto cell = trim(fields[t + 2]);
      if (cell.empty() || cell == "NaN" || cell == "nan") continue;
      double x = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(x)) {
        throw DataError(where + ": non-numeric cell '" + std::string(cell) +
                        "' at column " + std::to_string(t + 3));
      }
      row.values[t] = x;
      row.observed[t] = 1;
    }
    auto [ii, new_id] = id_index.try_emplace(row.id, ids.size());
    if (new_id) ids.push_back(row.id);
    auto [ai, new_attr] = attr_index.try_emplace(row.attribute, attributes.size());
    if (new_attr) attributes.push_back(row.attribute);
    const auto key = std::make_pair(ii->second, ai->second);
    if (rows.contains(key)) {
      throw DataError(where + ": duplicate row for series '" + row.id +
                      "', attribute '" + row.attribute + "'");
    }
    rows.emplace(key, std::move(row));
  }
  if (ids.empty()) throw DataError(origin + ": no data rows");

  Dataset d;
  d.attribute_names = attributes;
  const auto nv = static_cast<Eigen::Index>(attributes.size());
  const auto nt = static_cast<Eigen::Index>(length);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    MtsRecord r;
    r.id = ids[i];
    r.values.resize(nv, nt);
    r.mask.resize(nv, nt);
    for (std::size_t a = 0; a < attributes.size(); ++a) {
      const auto it = rows.find({i, a});
      if (it == rows.end()) {
        throw DataError(origin + ": series '" + ids[i] +
                        "' has no row for attribute '" + attributes[a] + "'");
      }
      for (Eigen::Index t = 0; t < nt; ++t) {
        r.values(static_cast<Eigen::Index>(a), t) = it->second.values[static_cast<std::size_t>(t)];
        r.mask(static_cast<Eigen::Index>(a), t) = it->second.observed[static_cast<std::size_t>(t)];
      }
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

std::string format_dataset(const Dataset& d) {
  d.validate();
  const int t_max = d.max_length();
  std::ostringstream os;
  os << "id,attribute";
  for (int t = 1; t <= t_max; ++t) os << ",t" << t;
  os << '\n';
  for (const auto& r : d.records) {
    for (int v = 0; v < r.n_attributes(); ++v) {
      os << r.id << ','
         << (v < static_cast<int>(d.attribute_names.size())
                 ? d.attribute_names[static_cast<std::size_t>(v)]
                 : std::to_string(v + 1));
      for (int t = 0; t < t_max; ++t) {
        os << ',';
        if (t < r.length() && r.observed(v, t)) os << format_double(r.values(v, t));
      }
      os << '\n';
    }
  }
  return os.str();
}

std::vector<int> load_labels(const std::string& path,
                             std::span<const std::string> ids) {
  const auto lines = lines_of(read_file(path));
  if (lines.empty()) throw DataError(path + ": empty labels file");
  const auto header = split_fields(lines.front());
  if (header.size() != 2 || trim(header[0]) != "id" ||
      trim(header[1]) != "label") {
    throw DataError(path + ": header must be 'id,label'");
  }
  std::unordered_map<std::string, int> by_id;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto where = path + ":" + std::to_string(li + 1);
    const auto fields = split_fields(lines[li]);
    if (fields.size() != 2) throw DataError(where + ": expected 'id,label'");
    const auto id = std::string(trim(fields[0]));
    const auto text = trim(fields[1]);
    int label = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), label);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      throw DataError(where + ": label '" + std::string(text) +
                      "' is not an integer");
    }
    if (!by_id.emplace(id, label).second) {
      throw DataError(where + ": duplicate label for '" + id + "'");
    }
  }
  if (by_id.size() != ids.size()) {
    throw DataError(path + ": " + std::to_string(by_id.size()) +
                    " labels for " + std::to_string(ids.size()) + " series");
  }
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError(path + ": no label for series '" + id + "'");
    }
    labels.push_back(it->second);
  }
  return labels;
}

Dataset load_dataset(const std::string& path,
                     const std::optional<std::string>& labels_path,
                     const LoadOptions& options) {
  Dataset d = parse_dataset(read_file(path), path);
  if (options.trim_trailing) d = trim_trailing_missing(d);
  if (labels_path) {
    std::vector<std::string> ids;
    for (const auto& r : d.records) ids.push_back(r.id);
    d.labels = load_labels(*labels_path, ids);
  }
  d.validate();
  return d;
}

void write_dataset(const Dataset& d, const std::string& path) {
  write_file(path, format_dataset(d));
}

void write_labels(std::span<const std::string> ids, std::span<const int> labels,
                  const std::string& path) {
  if (ids.size() != labels.size()) {
    throw DataError("write_labels: id/label count mismatch");
  }
  std::ostringstream os;
  os << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i] << ',' << labels[i] << '\n';
  }
  write_file(path, os.str());
}

void write_labels(const Dataset& d, const std::string& path) {
  if (!d.labels) throw DataError("dataset has no labels to write");
  std::vector<std::string> ids;
  for (const auto& r : d.records) ids.push_back(r.id);
  write_labels(ids, *d.labels, path);
}

}  // namespace tck
