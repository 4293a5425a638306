#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "deferlab/eval.hpp"

namespace deferlab {

EvalReport evaluate(const DeferDataset& data, std::span<const Decision> decisions) {
  if (data.size() == 0) throw std::invalid_argument("cannot evaluate on an empty dataset");
  if (decisions.size() != data.size()) throw std::invalid_argument("one decision per point required");
  std::size_t deferred = 0, human_ok = 0, clf_ok = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (decisions[i].deferred) {
      ++deferred;
      human_ok += data.human_correct(i);
    } else {
      clf_ok += decisions[i].classifier_label == data.label(i);
    }
  }
  const std::size_t n = data.size(), kept = n - deferred;
  EvalReport r;
  r.n_points = n;
  r.n_deferred = deferred;
  r.system_accuracy = static_cast<double>(clf_ok + human_ok) / static_cast<double>(n);
  r.coverage = static_cast<double>(kept) / static_cast<double>(n);
  if (kept) r.classifier_accuracy_nondeferred = static_cast<double>(clf_ok) / static_cast<double>(kept);
  if (deferred) r.human_accuracy_deferred = static_cast<double>(human_ok) / static_cast<double>(deferred);
  return r;
}

EvalReport evaluate(const TrainedSystem& system, const DeferDataset& data) {
  const auto dec = decide(system, data);
  return evaluate(data, dec);
}

EvalReport evaluate(const HalfspacePair& pair, const DeferDataset& data) {
  if (pair.dim() != data.dim()) throw std::invalid_argument("pair dimension does not match the dataset");
  const auto dec = decide_halfspace(pair, data);
  return evaluate(data, dec);
}

CoverageCurve coverage_curve(const DeferDataset& data, std::span<const double> scores,
                             std::span<const int> classifier_labels, std::size_t grid_size) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("cannot sweep an empty dataset");
  if (scores.size() != n || classifier_labels.size() != n)
    throw std::invalid_argument("one score and classifier label per point required");
  if (grid_size < 2) throw std::invalid_argument("grid size must be at least 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::vector<CurvePoint> all;
  long correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += data.human_correct(i);
  std::size_t kept = 0;
  const double nd = static_cast<double>(n);
  all.push_back({-std::numeric_limits<double>::infinity(), 0.0, static_cast<double>(correct) / nd});
  for (std::size_t k = 0; k < n;) {
    std::size_t j = k;
    while (j < n && scores[order[j]] == scores[order[k]]) {
      const std::size_t i = order[j];
      correct += (classifier_labels[i] == data.label(i)) - static_cast<long>(data.human_correct(i));
      ++kept;
      ++j;
    }
    const double t = j < n ? split_point(scores[order[k]], scores[order[j]]) : std::numeric_limits<double>::infinity();
    all.push_back({t, static_cast<double>(kept) / nd, static_cast<double>(correct) / nd});
    k = j;
  }
  CoverageCurve curve;
  if (all.size() <= grid_size) {
    curve.points = std::move(all);
    return curve;
  }
  const std::size_t last = all.size() - 1;
  std::size_t prev = last + 1;
  for (std::size_t g = 0; g < grid_size; ++g) {
    const std::size_t idx = (g * last + (grid_size - 1) / 2) / (grid_size - 1);
    if (idx != prev) curve.points.push_back(all[idx]);
    prev = idx;
  }
  return curve;
}

CoverageCurve coverage_curve(const TrainedSystem& system, const DeferDataset& data, std::size_t grid_size) {
  std::vector<double> scores(data.size());
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = rejection_score(system, data.row(i));
    labels[i] = classifier_label(system, data.row(i));
  }
  return coverage_curve(data, scores, labels, grid_size);
}

CoverageCurve coverage_curve(const HalfspacePair& pair, const DeferDataset& data, std::size_t grid_size) {
  if (pair.dim() != data.dim()) throw std::invalid_argument("pair dimension does not match the dataset");
  std::vector<double> scores(data.size());
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = affine_score(pair.rejector, data.row(i));
    labels[i] = classify_halfspace(pair, data.row(i));
  }
  return coverage_curve(data, scores, labels, grid_size);
}

double generalization_bound(double train_loss, double k_m, double k_r, std::size_t d, std::size_t n,
                            double human_error_rate, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("delta must lie in (0, 0.5)");
  if (!(human_error_rate > 0.0 && human_error_rate <= 1.0))
    throw std::invalid_argument("human error rate must lie in (0, 1]; the bound is undefined at 0");
  if (n == 0 || d == 0) throw std::invalid_argument("n and d must be positive");
  if (!(k_m >= 0.0) || !(k_r >= 0.0)) throw std::invalid_argument("K_m and K_r must be non-negative");
  if (!std::isfinite(train_loss)) throw std::invalid_argument("train loss must be finite");
  const double dd = static_cast<double>(d);
  const double numerator = (k_m + k_r) * dd * std::sqrt(2.0 * std::log(dd)) + 10.0 * std::sqrt(std::log(2.0 / delta));
  return train_loss + numerator / std::sqrt(static_cast<double>(n) * human_error_rate);
}

}  // namespace deferlab
