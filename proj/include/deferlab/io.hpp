#pragma once

// Plain-text file formats.
//
// Dataset CSV:   header `x0,...,x{d-1},y,h`, one sample per row.
// Pair weights:  one row per weight vector, `role,index,w0,...,wd` where role
//                is `classifier` or `rejector` and wd is the bias.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "deferlab/core.hpp"

namespace deferlab {

/// A file could not be opened, written or renamed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `num_classes` = 0 infers C = max(label, human) + 1 (at least 2).
DeferDataset read_dataset_csv(std::istream& in, int num_classes = 0);
DeferDataset load_dataset_csv(const std::filesystem::path& path, int num_classes = 0);
void write_dataset_csv(std::ostream& out, const DeferDataset& data);
void save_dataset_csv(const std::filesystem::path& path, const DeferDataset& data);

HalfspacePair read_pair_csv(std::istream& in);
HalfspacePair load_pair_csv(const std::filesystem::path& path);
void write_pair_csv(std::ostream& out, const HalfspacePair& pair);
void save_pair_csv(const std::filesystem::path& path, const HalfspacePair& pair);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest round-trippable decimal form; `inf`/`-inf` for infinities.
std::string format_double(double v);
/// Accepts the output of format_double; throws std::invalid_argument otherwise.
double parse_double(const std::string& s);

}  // namespace deferlab
