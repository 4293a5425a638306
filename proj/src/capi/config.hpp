#pragma once

// Keyed experiment configuration behind the C handle.

#include <cstdint>
#include <string>
#include <vector>

#include "deferlab/datagen.hpp"
#include "deferlab/eval.hpp"
#include "deferlab/milp.hpp"
#include "deferlab/train.hpp"

namespace deferlab::capi {

enum class KeyType { Size, Seed, Real, OptReal, PositiveReal, Bool, Preset, Distribution, Method, MethodList, RealList, Split };

struct KeySpec {
  const char* key;  // section.name
  KeyType type;
  const char* fallback;
};

class Config {
 public:
  Config();

  /// Throws std::invalid_argument on an unknown key or a value of the wrong type.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_set(const std::string& key) const;
  std::size_t size() const noexcept { return values_.size(); }
  const char* key_at(std::size_t i) const { return specs()[i].key; }

  /// INI text; errors carry the line number.
  void load(const std::string& text);
  std::string dump() const;

  SyntheticConfig synthetic() const;
  BenchmarkInstance instance() const;
  MilpConfig milp() const;
  TrainConfig train() const;
  BenchmarkOptions bench() const;

  static const std::vector<KeySpec>& specs();

 private:
  std::size_t index(const std::string& key) const;
  std::size_t size_of(const std::string& key) const;
  std::uint64_t seed_of(const std::string& key) const;
  double real_of(const std::string& key) const;
  std::optional<double> opt_real_of(const std::string& key) const;
  bool bool_of(const std::string& key) const;

  std::vector<std::string> values_;
  std::vector<bool> set_;
};

}  // namespace deferlab::capi
