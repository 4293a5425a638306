#include "deferlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>
#include <vector>

namespace deferlab {
namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  return s.substr(b);
}

int parse_int_cell(const std::string& cell, std::size_t line) {
  std::string t = trim(cell);
  int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ParseError("expected integer class id, got '" + t + "'", line);
  return v;
}

double parse_real_cell(const std::string& cell, std::size_t line) {
  std::string t = trim(cell);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ParseError("expected real number, got '" + t + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + t + "'", line);
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& raw) {
  std::string s = trim(raw);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

DeferDataset read_dataset_csv(std::istream& in, int num_classes) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
  ++lineno;
  auto header = split_commas(trim(line));
  if (header.size() < 3) throw ParseError("header needs x0..x{d-1},y,h", lineno);
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j)
    if (trim(header[j]) != "x" + std::to_string(j))
      throw ParseError("header column " + std::to_string(j) + " should be x" + std::to_string(j),
                       lineno);
  if (trim(header[d]) != "y" || trim(header[d + 1]) != "h")
    throw ParseError("header must end with y,h", lineno);

  std::vector<double> features;
  std::vector<int> labels, human;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    auto cells = split_commas(t);
    if (cells.size() != d + 2)
      throw ParseError("expected " + std::to_string(d + 2) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    for (std::size_t j = 0; j < d; ++j) features.push_back(parse_real_cell(cells[j], lineno));
    int y = parse_int_cell(cells[d], lineno);
    int h = parse_int_cell(cells[d + 1], lineno);
    if (y < 0 || h < 0) throw ParseError("class ids must be non-negative", lineno);
    if (num_classes > 0 && (y >= num_classes || h >= num_classes))
      throw ParseError("class id exceeds num_classes", lineno);
    labels.push_back(y);
    human.push_back(h);
  }
  if (labels.empty()) throw ParseError("dataset has no rows", lineno);
  int c = num_classes;
  if (c <= 0) {
    c = 2;
    for (std::size_t i = 0; i < labels.size(); ++i) c = std::max({c, labels[i] + 1, human[i] + 1});
  }
  return DeferDataset(std::move(features), d, std::move(labels), std::move(human), c);
}

DeferDataset load_dataset_csv(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in, num_classes);
}

void write_dataset_csv(std::ostream& out, const DeferDataset& data) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "y,h\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << format_double(v) << ',';
    out << data.label(i) << ',' << data.human(i) << '\n';
  }
}

void save_dataset_csv(const std::filesystem::path& path, const DeferDataset& data) {
  std::ostringstream ss;
  write_dataset_csv(ss, data);
  write_file_atomic(path, ss.str());
}

HalfspacePair read_pair_csv(std::istream& in) {
  HalfspacePair pair;
  std::string line;
  std::size_t lineno = 0;
  bool have_rejector = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split_commas(t);
    if (cells.size() < 4) throw ParseError("weight row needs role,index and >= 2 weights", lineno);
    std::string role = trim(cells[0]);
    int index = parse_int_cell(cells[1], lineno);
    std::vector<double> w;
    for (std::size_t j = 2; j < cells.size(); ++j) w.push_back(parse_real_cell(cells[j], lineno));
    if (role == "classifier") {
      if (index != static_cast<int>(pair.classifier.size()))
        throw ParseError("classifier rows must be numbered 0,1,... in order", lineno);
      pair.classifier.push_back(std::move(w));
    } else if (role == "rejector") {
      if (have_rejector) throw ParseError("duplicate rejector row", lineno);
      pair.rejector = std::move(w);
      have_rejector = true;
    } else {
      throw ParseError("unknown role '" + role + "'", lineno);
    }
  }
  if (!have_rejector) throw ParseError("missing rejector row", lineno);
  try {
    pair.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 0);
  }
  return pair;
}

HalfspacePair load_pair_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_pair_csv(in);
}

void write_pair_csv(std::ostream& out, const HalfspacePair& pair) {
  auto row = [&](const char* role, std::size_t idx, const std::vector<double>& w) {
    out << role << ',' << idx;
    for (double v : w) out << ',' << format_double(v);
    out << '\n';
  };
  for (std::size_t k = 0; k < pair.classifier.size(); ++k) row("classifier", k, pair.classifier[k]);
  row("rejector", 0, pair.rejector);
}

void save_pair_csv(const std::filesystem::path& path, const HalfspacePair& pair) {
  std::ostringstream ss;
  write_pair_csv(ss, pair);
  write_file_atomic(path, ss.str());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

}  // namespace deferlab
