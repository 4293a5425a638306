#pragma once

// Data model and decision semantics shared by the solver, the trainers and
// the evaluation code.
//
// Features are stored row-major. Every weight vector acting on a sample has
// length d+1: the last entry multiplies a constant 1 (the bias).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deferlab {

/// Raised when a text input (CSV, config, model file) cannot be parsed.
/// Carries the 1-based line number of the offending line, 0 if unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DeferDataset {
 public:
  DeferDataset(std::vector<double> features, std::size_t dim, std::vector<int> labels,
               std::vector<int> human_preds, int num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  int num_classes() const noexcept { return num_classes_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  int human(std::size_t i) const { return human_[i]; }
  bool human_correct(std::size_t i) const { return labels_[i] == human_[i]; }

  std::span<const double> features() const noexcept { return features_; }
  std::span<const int> labels() const noexcept { return labels_; }
  std::span<const int> human_preds() const noexcept { return human_; }

  /// Rows picked by `indices`, in that order.
  DeferDataset subset(std::span<const std::size_t> indices) const;

  /// Fraction of points where the human prediction equals the label.
  double human_accuracy() const;

 private:
  std::vector<double> features_;
  std::size_t dim_;
  std::vector<int> labels_;
  std::vector<int> human_;
  int num_classes_;
};

/// Classifier/rejector pair of halfspaces.
///
/// A single classifier row is the binary form: label 1 iff M.x~ > 0.
/// C rows are the multiclass form: label = argmax_k M_k.x~, lowest k on ties.
/// The rejector defers iff R.x~ >= 0.
struct HalfspacePair {
  std::vector<std::vector<double>> classifier;
  std::vector<double> rejector;

  bool is_binary() const noexcept { return classifier.size() == 1; }
  /// Feature dimension d (weights have d+1 entries).
  std::size_t dim() const noexcept { return rejector.empty() ? 0 : rejector.size() - 1; }
  int num_classes() const noexcept {
    return is_binary() ? 2 : static_cast<int>(classifier.size());
  }
  /// Throws std::invalid_argument on ragged rows, empty weights or non-finite entries.
  void validate() const;
};

struct Prediction {
  int final_label = 0;
  bool deferred = false;
  int classifier_label = 0;
  double rejection_score = 0.0;
};

/// Per-point decision consumed by the 0-1 system loss.
struct Decision {
  bool deferred = false;
  int classifier_label = 0;
};

/// w . (x, 1) for a weight vector of length x.size()+1.
double affine_score(std::span<const double> weights, std::span<const double> x);

/// Threshold t with a < t <= b, normally the midpoint; b when the midpoint rounds to a.
double split_point(double a, double b);

/// Argmax with ties broken toward the lowest index.
std::size_t argmax_lowest(std::span<const double> scores);

int classify_halfspace(const HalfspacePair& pair, std::span<const double> x);

Prediction predict_halfspace(const HalfspacePair& pair, std::span<const double> x,
                             int human_label);

std::vector<Decision> decide_halfspace(const HalfspacePair& pair, const DeferDataset& data);

/// Mean over points of I{m(x)!=y}(1-r) + I{h!=y} r.
double system_loss_01(const DeferDataset& data, std::span<const Decision> decisions);

}  // namespace deferlab
