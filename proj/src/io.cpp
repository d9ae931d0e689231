#include "cbm/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbm/error.hpp"

namespace cbm {
namespace {

using json = nlohmann::json;

void put_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw FormatError("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64_le(std::ostream& out, double v) { put_u64_le(out, std::bit_cast<std::uint64_t>(v)); }

double get_f64_le(std::istream& in) { return std::bit_cast<double>(get_u64_le(in)); }

void write_matrix_binary(std::ostream& out, const char magic[4], const Eigen::MatrixXd& m,
                         bool square) {
  out.write(magic, 4);
  put_u64_le(out, static_cast<std::uint64_t>(m.rows()));
  if (!square) put_u64_le(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64_le(out, m(i, j));
}

Eigen::MatrixXd read_matrix_binary(std::istream& in, const char magic[4], bool square) {
  char got[4];
  in.read(got, 4);
  if (!in || std::string_view(got, 4) != std::string_view(magic, 4))
    throw FormatError("bad magic bytes, expected " + std::string(magic, 4));
  const auto rows = get_u64_le(in);
  const auto cols = square ? rows : get_u64_le(in);
  if (rows == 0 || cols == 0) throw FormatError("empty matrix in binary file");
  if (rows > (1ull << 32) || cols > (1ull << 32)) throw FormatError("implausible matrix size");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64_le(in);
  if (!in) throw FormatError("truncated binary file");
  return m;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

bool parse_f64(std::string_view text, double& out) {
  // from_chars accepts no leading whitespace or '+'; trim both.
  size_t b = text.find_first_not_of(" \t\r");
  size_t e = text.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) return false;
  text = text.substr(b, e - b + 1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, out);
  return ec == std::errc() && ptr == last;
}

FeatureMatrix load_features_csv(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (!parse_f64(cell, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;  // header row
        continue;
      }
      throw FormatError("non-numeric cell in " + path.string());
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("no data rows in " + path.string());
  FeatureMatrix m;
  m.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows.front().size(); ++j)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  m.validate();
  return m;
}

}  // namespace

std::string format_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

FeatureMatrix load_features(const std::filesystem::path& path, FeatureFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (std::filesystem::is_regular_file(path) && std::filesystem::file_size(path) == 0)
    throw IoError("empty file: " + path.string());
  if (format == FeatureFormat::csv) return load_features_csv(path);
  auto in = open_in(path, true);
  FeatureMatrix m;
  m.values = read_matrix_binary(in, "CBM1", false);
  m.validate();
  return m;
}

void save_features(const FeatureMatrix& m, const std::filesystem::path& path,
                   FeatureFormat format) {
  if (format == FeatureFormat::csv) {
    auto out = open_out(path, false);
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
        if (j) out << ',';
        out << format_f64(m.values(i, j));
      }
      out << '\n';
    }
    return;
  }
  auto out = open_out(path, true);
  write_matrix_binary(out, "CBM1", m.values, false);
}

SimilarityMatrix load_similarity(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  SimilarityMatrix s;
  s.values = read_matrix_binary(in, "CBS1", true);
  s.validate();
  return s;
}

void save_similarity(const SimilarityMatrix& s, const std::filesystem::path& path) {
  auto out = open_out(path, true);
  write_matrix_binary(out, "CBS1", s.values, true);
}

EvalAnnotations load_annotations(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad annotation JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw FormatError("annotations must be a JSON object");
  EvalAnnotations ann;
  for (const auto& [key, val] : j.items()) {
    int q = 0;
    try {
      q = std::stoi(key);
    } catch (...) {
      throw FormatError("annotation key is not an index: " + key);
    }
    if (!val.is_object() || !val.contains("pos") || !val.contains("neg"))
      throw FormatError("annotation entry needs pos and neg lists");
    EvalAnnotations::PosNeg pn;
    for (const auto& v : val.at("pos")) pn.pos.push_back(v.get<int>());
    for (const auto& v : val.at("neg")) pn.neg.push_back(v.get<int>());
    ann.queries.emplace(q, std::move(pn));
  }
  return ann;
}

void save_annotations(const EvalAnnotations& ann, const std::filesystem::path& path) {
  json j = json::object();
  for (const auto& [q, pn] : ann.queries)
    j[std::to_string(q)] = {{"pos", pn.pos}, {"neg", pn.neg}};
  auto out = open_out(path, false);
  out << j.dump(2) << '\n';
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (...) {
      throw FormatError("bad label line: " + line);
    }
  }
  if (labels.empty()) throw IoError("no labels in " + path.string());
  return labels;
}

void save_labels(const std::vector<int>& labels, const std::filesystem::path& path) {
  auto out = open_out(path, false);
  for (int v : labels) out << v << '\n';
}

}  // namespace cbm
