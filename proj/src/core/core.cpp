#include "deferlab/core.hpp"

#include <cmath>
#include <string>

namespace deferlab {

DeferDataset::DeferDataset(std::vector<double> features, std::size_t dim,
                           std::vector<int> labels, std::vector<int> human_preds,
                           int num_classes)
    : features_(std::move(features)),
      dim_(dim),
      labels_(std::move(labels)),
      human_(std::move(human_preds)),
      num_classes_(num_classes) {
  if (dim_ == 0) throw std::invalid_argument("dataset dimension must be >= 1");
  if (labels_.empty()) throw std::invalid_argument("dataset must contain at least one point");
  if (num_classes_ < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (features_.size() != labels_.size() * dim_)
    throw std::invalid_argument("feature matrix has " + std::to_string(features_.size()) +
                                " entries, expected " + std::to_string(labels_.size() * dim_));
  if (human_.size() != labels_.size())
    throw std::invalid_argument("human prediction count does not match label count");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_)
      throw std::invalid_argument("label out of range at row " + std::to_string(i));
    if (human_[i] < 0 || human_[i] >= num_classes_)
      throw std::invalid_argument("human prediction out of range at row " + std::to_string(i));
  }
  for (double v : features_)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

DeferDataset DeferDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> f;
  std::vector<int> y, h;
  f.reserve(indices.size() * dim_);
  y.reserve(indices.size());
  h.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) throw std::invalid_argument("subset index out of range");
    auto r = row(idx);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[idx]);
    h.push_back(human_[idx]);
  }
  return DeferDataset(std::move(f), dim_, std::move(y), std::move(h), num_classes_);
}

double DeferDataset::human_accuracy() const {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < size(); ++i) ok += human_correct(i);
  return static_cast<double>(ok) / static_cast<double>(size());
}

void HalfspacePair::validate() const {
  if (rejector.size() < 2) throw std::invalid_argument("rejector needs d+1 >= 2 weights");
  if (classifier.empty()) throw std::invalid_argument("classifier has no weight rows");
  for (const auto& w : classifier)
    if (w.size() != rejector.size())
      throw std::invalid_argument("classifier and rejector weight lengths differ");
  auto finite = [](const std::vector<double>& w) {
    for (double v : w)
      if (!std::isfinite(v)) return false;
    return true;
  };
  if (!finite(rejector)) throw std::invalid_argument("non-finite rejector weight");
  for (const auto& w : classifier)
    if (!finite(w)) throw std::invalid_argument("non-finite classifier weight");
}

double affine_score(std::span<const double> weights, std::span<const double> x) {
  double s = weights[x.size()];
  for (std::size_t j = 0; j < x.size(); ++j) s += weights[j] * x[j];
  return s;
}

double split_point(double a, double b) {
  const double t = a + 0.5 * (b - a);
  return t > a ? t : b;
}

std::size_t argmax_lowest(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

int classify_halfspace(const HalfspacePair& pair, std::span<const double> x) {
  if (pair.is_binary()) return affine_score(pair.classifier[0], x) > 0.0 ? 1 : 0;
  double best_score = affine_score(pair.classifier[0], x);
  int best = 0;
  for (std::size_t k = 1; k < pair.classifier.size(); ++k) {
    double s = affine_score(pair.classifier[k], x);
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(k);
    }
  }
  return best;
}

Prediction predict_halfspace(const HalfspacePair& pair, std::span<const double> x,
                             int human_label) {
  if (x.size() + 1 != pair.rejector.size())
    throw std::invalid_argument("feature dimension " + std::to_string(x.size()) +
                                " does not match pair dimension " +
                                std::to_string(pair.dim()));
  Prediction p;
  p.rejection_score = affine_score(pair.rejector, x);
  p.deferred = p.rejection_score >= 0.0;
  p.classifier_label = classify_halfspace(pair, x);
  p.final_label = p.deferred ? human_label : p.classifier_label;
  return p;
}

std::vector<Decision> decide_halfspace(const HalfspacePair& pair, const DeferDataset& data) {
  std::vector<Decision> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Prediction p = predict_halfspace(pair, data.row(i), data.human(i));
    out[i] = {p.deferred, p.classifier_label};
  }
  return out;
}

double system_loss_01(const DeferDataset& data, std::span<const Decision> decisions) {
  if (decisions.size() != data.size())
    throw std::invalid_argument("decision count " + std::to_string(decisions.size()) +
                                " does not match dataset size " + std::to_string(data.size()));
  std::size_t errors = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (decisions[i].deferred)
      errors += !data.human_correct(i);
    else
      errors += decisions[i].classifier_label != data.label(i);
  }
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

}  // namespace deferlab
