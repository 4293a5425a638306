#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "deferlab/io.hpp"

namespace deferlab::capi {

namespace {

const char* const kSections[] = {"data", "method", "solver", "train", "eval"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::uint64_t parse_u64(const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  return v;
}

double parse_finite(const std::string& s) {
  const double v = parse_double(s);
  if (!std::isfinite(v)) throw std::invalid_argument("value must be finite: '" + trim(s) + "'");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

void check(KeyType type, const std::string& v) {
  switch (type) {
    case KeyType::Size:
    case KeyType::Seed:
      parse_u64(v);
      return;
    case KeyType::Real:
      parse_finite(v);
      return;
    case KeyType::PositiveReal:
      if (!(parse_finite(v) > 0.0)) throw std::invalid_argument("value must be > 0");
      return;
    case KeyType::OptReal:
      if (!trim(v).empty()) parse_finite(v);
      return;
    case KeyType::Bool:
      parse_bool(v);
      return;
    case KeyType::Preset:
      if (trim(v) != "synthetic" && trim(v) != "grouped")
        throw std::invalid_argument("preset must be synthetic or grouped");
      return;
    case KeyType::Distribution:
      if (trim(v) != "uniform" && trim(v) != "mixture")
        throw std::invalid_argument("distribution must be uniform or mixture");
      return;
    case KeyType::Method:
      if (parse_method(trim(v)) == Method::Milp) throw std::invalid_argument("milp is not a trainable method");
      return;
    case KeyType::MethodList:
      if (split_list(v).empty()) throw std::invalid_argument("method list is empty");
      for (const auto& m : split_list(v)) parse_method(m);
      return;
    case KeyType::RealList:
      for (const auto& a : split_list(v)) parse_finite(a);
      return;
    case KeyType::Split: {
      const auto parts = split_list(v);
      if (parts.empty()) return;
      if (parts.size() != 3) throw std::invalid_argument("split needs train,val,test sizes");
      for (const auto& p : parts) parse_u64(p);
      return;
    }
  }
}

std::string canonical_real(const std::string& v) { return format_double(parse_double(v)); }

std::string canonical(KeyType type, const std::string& v) {
  const std::string t = trim(v);
  switch (type) {
    case KeyType::Size:
    case KeyType::Seed:
      return std::to_string(parse_u64(t));
    case KeyType::Real:
    case KeyType::PositiveReal:
      return canonical_real(t);
    case KeyType::OptReal:
      return t.empty() ? t : canonical_real(t);
    case KeyType::Bool:
      return parse_bool(t) ? "true" : "false";
    case KeyType::MethodList:
    case KeyType::RealList:
    case KeyType::Split: {
      std::string out;
      for (const auto& item : split_list(t)) {
        if (!out.empty()) out += ',';
        out += type == KeyType::RealList ? canonical_real(item)
               : type == KeyType::Split  ? std::to_string(parse_u64(item))
                                         : std::string(to_string(parse_method(item)));
      }
      return out;
    }
    default:
      return t;
  }
}

}  // namespace

const std::vector<KeySpec>& Config::specs() {
  static const std::vector<KeySpec> s = {
      {"data.preset", KeyType::Preset, "synthetic"},
      {"data.d", KeyType::Size, "30"},
      {"data.n", KeyType::Size, "1000"},
      {"data.distribution", KeyType::Distribution, "mixture"},
      {"data.box_u", KeyType::PositiveReal, "1"},
      {"data.clusters", KeyType::Size, "10"},
      {"data.p_m", KeyType::Real, "0"},
      {"data.p_h0", KeyType::Real, "0.3"},
      {"data.p_h1", KeyType::Real, "0"},
      {"data.num_classes", KeyType::Size, "2"},
      {"data.expert_strength", KeyType::Size, "5"},
      {"data.mean_spread", KeyType::PositiveReal, "1"},
      {"data.blob_std", KeyType::PositiveReal, "1"},
      {"data.split", KeyType::Split, ""},
      {"data.seed", KeyType::Seed, "0"},
      {"method.name", KeyType::Method, "rs"},
      {"method.methods", KeyType::MethodList, "rs"},
      {"method.alpha", KeyType::Real, "1"},
      {"method.alpha_grid", KeyType::RealList, ""},
      {"method.default_alpha_grids", KeyType::Bool, "true"},
      {"solver.gamma", KeyType::PositiveReal, "1e-05"},
      {"solver.box", KeyType::PositiveReal, "1"},
      {"solver.k_m", KeyType::OptReal, ""},
      {"solver.k_r", KeyType::OptReal, ""},
      {"solver.lambda_reg", KeyType::Real, "0"},
      {"solver.coverage_beta", KeyType::OptReal, ""},
      {"solver.time_limit", KeyType::OptReal, "120"},
      {"solver.gap", KeyType::OptReal, ""},
      {"solver.heuristics", KeyType::Bool, "true"},
      {"solver.threads", KeyType::Size, "1"},
      {"solver.node_limit", KeyType::Size, "0"},
      {"solver.seed", KeyType::Seed, "0"},
      {"train.epochs", KeyType::Size, "300"},
      {"train.batch_size", KeyType::Size, "128"},
      {"train.lr", KeyType::PositiveReal, "0.1"},
      {"train.hidden_units", KeyType::Size, "0"},
      {"train.track_best", KeyType::Bool, "true"},
      {"train.val_fraction", KeyType::Real, "0.1"},
      {"train.seed", KeyType::Seed, "0"},
      {"eval.trials", KeyType::Size, "1"},
      {"eval.jobs", KeyType::Size, "1"},
      {"eval.curve_grid", KeyType::Size, "101"},
      {"eval.seed", KeyType::Seed, "0"},
  };
  return s;
}

Config::Config() : set_(specs().size(), false) {
  for (const auto& s : specs()) values_.emplace_back(s.fallback);
}

std::size_t Config::index(const std::string& key) const {
  const auto& s = specs();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (key == s[i].key) return i;
  throw std::invalid_argument("unknown config key '" + key + "'");
}

void Config::set(const std::string& key, const std::string& value) {
  const std::size_t i = index(key);
  try {
    check(specs()[i].type, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(key + ": " + e.what());
  }
  values_[i] = canonical(specs()[i].type, value);
  set_[i] = true;
}

const std::string& Config::get(const std::string& key) const { return values_[index(key)]; }
bool Config::is_set(const std::string& key) const { return set_[index(key)]; }

void Config::load(const std::string& text) {
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("unterminated section header", lineno);
      section = trim(t.substr(1, t.size() - 2));
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
        throw ParseError("unknown section [" + section + "]", lineno);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    if (section.empty()) throw ParseError("key outside a section", lineno);
    try {
      set(section + "." + trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string section;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const std::string key = specs()[i].key;
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      out << (i ? "\n" : "") << '[' << section << "]\n";
    }
    out << key.substr(dot + 1) << " = " << values_[i] << '\n';
  }
  return out.str();
}

std::size_t Config::size_of(const std::string& key) const { return static_cast<std::size_t>(parse_u64(get(key))); }
std::uint64_t Config::seed_of(const std::string& key) const { return parse_u64(get(key)); }
double Config::real_of(const std::string& key) const { return parse_double(get(key)); }
std::optional<double> Config::opt_real_of(const std::string& key) const {
  if (get(key).empty()) return std::nullopt;
  return parse_double(get(key));
}
bool Config::bool_of(const std::string& key) const { return parse_bool(get(key)); }

SyntheticConfig Config::synthetic() const {
  SyntheticConfig c;
  c.d = size_of("data.d");
  c.n = size_of("data.n");
  c.distribution = get("data.distribution") == "uniform" ? FeatureDistribution::Uniform
                                                          : FeatureDistribution::GaussianMixture;
  c.box_u = real_of("data.box_u");
  c.clusters = static_cast<int>(size_of("data.clusters"));
  c.p_m = real_of("data.p_m");
  c.p_h0 = real_of("data.p_h0");
  c.p_h1 = real_of("data.p_h1");
  c.num_classes = static_cast<int>(size_of("data.num_classes"));
  c.seed = seed_of("data.seed");
  c.validate();
  return c;
}

BenchmarkInstance Config::instance() const {
  BenchmarkInstance inst;
  if (get("data.preset") == "grouped") {
    inst.kind = BenchmarkInstance::Kind::Grouped;
    inst.d = size_of("data.d");
    inst.n = size_of("data.n");
    inst.num_classes = static_cast<int>(size_of("data.num_classes"));
    inst.expert_strength = static_cast<int>(size_of("data.expert_strength"));
    inst.grouped.mean_spread = real_of("data.mean_spread");
    inst.grouped.blob_std = real_of("data.blob_std");
  } else {
    inst.synthetic = synthetic();
  }
  return inst;
}

MilpConfig Config::milp() const {
  MilpConfig c;
  c.gamma = real_of("solver.gamma");
  c.box = real_of("solver.box");
  c.k_m = opt_real_of("solver.k_m");
  c.k_r = opt_real_of("solver.k_r");
  c.lambda_reg = real_of("solver.lambda_reg");
  c.coverage_beta = opt_real_of("solver.coverage_beta");
  c.time_limit_s = opt_real_of("solver.time_limit");
  c.abs_gap = opt_real_of("solver.gap");
  c.heuristics = bool_of("solver.heuristics");
  c.threads = static_cast<unsigned>(size_of("solver.threads"));
  c.node_limit = size_of("solver.node_limit");
  c.seed = seed_of("solver.seed");
  c.validate();
  return c;
}

TrainConfig Config::train() const {
  TrainConfig c;
  c.method = parse_method(get("method.name"));
  c.alpha = real_of("method.alpha");
  for (const auto& a : split_list(get("method.alpha_grid"))) c.alpha_grid.push_back(parse_double(a));
  c.epochs = size_of("train.epochs");
  c.batch_size = size_of("train.batch_size");
  c.adam.learning_rate = real_of("train.lr");
  c.hidden_units = size_of("train.hidden_units");
  c.track_best = bool_of("train.track_best");
  c.val_fraction = real_of("train.val_fraction");
  c.seed = seed_of("train.seed");
  c.validate();
  return c;
}

BenchmarkOptions Config::bench() const {
  BenchmarkOptions o;
  for (const auto& m : split_list(get("method.methods"))) o.methods.push_back(parse_method(m));
  o.trials = size_of("eval.trials");
  o.seed = seed_of("eval.seed");
  o.train = train();
  o.default_alpha_grids = bool_of("method.default_alpha_grids");
  o.milp = milp();
  o.curve_grid = size_of("eval.curve_grid");
  o.jobs = static_cast<unsigned>(size_of("eval.jobs"));
  const auto split = split_list(get("data.split"));
  if (!split.empty())
    o.split_sizes = std::array<std::size_t, 3>{static_cast<std::size_t>(parse_u64(split[0])),
                                               static_cast<std::size_t>(parse_u64(split[1])),
                                               static_cast<std::size_t>(parse_u64(split[2]))};
  return o;
}

}  // namespace deferlab::capi
