#include <algorithm>
#include <cmath>

#include "loop.hpp"

namespace deferlab {
namespace {

constexpr std::uint64_t kStageTwoInit = 40;
constexpr std::uint64_t kStageTwoShuffle = 41;

ScoreModel make_model(const DeferDataset& data, std::size_t outputs, const TrainConfig& config,
                      std::uint64_t init_stream) {
  ScoreModel m = config.hidden_units ? ScoreModel(Architecture::OneHidden, data.dim(), outputs, config.hidden_units)
                                     : ScoreModel(Architecture::Linear, data.dim(), outputs);
  Rng rng(config.seed, init_stream);
  m.initialize(rng);
  return m;
}

int argmax_model(const ScoreModel& m, std::span<const double> x) {
  const auto g = m.forward(x);
  return static_cast<int>(argmax_lowest(g));
}

double classifier_accuracy(const ScoreModel& m, const DeferDataset& data) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < data.size(); ++i) ok += argmax_model(m, data.row(i)) == data.label(i);
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

/// Class cross-entropy on C outputs, best validation classifier accuracy.
ScoreModel train_classifier(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config,
                            const detail::EpochPool& pool = {}) {
  ScoreModel init = make_model(train, static_cast<std::size_t>(train.num_classes()), config,
                               static_cast<std::uint64_t>(Stream::TrainInit));
  return detail::run_adam(
      std::move(init), train.size(), config, static_cast<std::uint64_t>(Stream::TrainShuffle),
      [&](const ScoreModel& m, std::span<const std::size_t> batch, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::vector<double> dg(m.output_dim());
        const double inv = 1.0 / static_cast<double>(batch.size());
        double total = 0.0;
        for (std::size_t i : batch) {
          const auto x = train.row(i);
          total += detail::softmax_ce(m.forward(x), train.label(i), dg);
          for (double& v : dg) v *= inv;
          m.backward(x, dg, grad);
        }
        return total * inv;
      },
      [&](const ScoreModel& m) { return classifier_accuracy(m, val); }, pool);
}

/// Logistic regression of `target(i)` on one logit; snapshots scored by `score`.
template <class Target>
ScoreModel train_logit(const DeferDataset& train, const TrainConfig& config, Target target,
                       const detail::Score& score) {
  ScoreModel init = make_model(train, 1, config, kStageTwoInit);
  return detail::run_adam(
      std::move(init), train.size(), config, kStageTwoShuffle,
      [&](const ScoreModel& m, std::span<const std::size_t> batch, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double inv = 1.0 / static_cast<double>(batch.size());
        double total = 0.0;
        for (std::size_t i : batch) {
          const auto x = train.row(i);
          double dz = 0.0;
          total += detail::logistic_loss(m.forward(x)[0], target(i), dz);
          const double up[1] = {dz * inv};
          m.backward(x, up, grad);
        }
        return total * inv;
      },
      score);
}

void check_pair(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) throw std::invalid_argument("empty training or validation set");
  if (train.dim() != val.dim() || train.num_classes() != val.num_classes())
    throw std::invalid_argument("training and validation sets differ in d or C");
}

}  // namespace

TrainedSystem train_compare_confidence(const DeferDataset& train, const DeferDataset& val,
                                       const TrainConfig& config) {
  check_pair(train, val, config);
  TrainedSystem sys;
  sys.method = Method::Confidence;
  sys.num_classes = train.num_classes();
  sys.model = train_classifier(train, val, config);
  TrainedSystem probe = sys;
  sys.aux_model = train_logit(
      train, config, [&](std::size_t i) { return train.human_correct(i); },
      [&](const ScoreModel& m) {
        probe.aux_model = m;
        return system_accuracy(probe, val);
      });
  return sys;
}

TrainedSystem train_selective_prediction(const DeferDataset& train, const DeferDataset& val,
                                         const TrainConfig& config) {
  check_pair(train, val, config);
  TrainedSystem sys;
  sys.method = Method::Selective;
  sys.num_classes = train.num_classes();
  sys.model = train_classifier(train, val, config);
  sys.tau = fit_tau(sys, val);
  return sys;
}

std::vector<std::size_t> triage_filter(const ScoreModel& classifier, const DeferDataset& data) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int clf_loss = argmax_model(classifier, data.row(i)) != data.label(i);
    const int human_loss = !data.human_correct(i);
    if (clf_loss <= human_loss) keep.push_back(i);
  }
  return keep;
}

TrainedSystem train_differentiable_triage(const DeferDataset& train, const DeferDataset& val,
                                          const TrainConfig& config) {
  check_pair(train, val, config);
  TrainedSystem sys;
  sys.method = Method::Triage;
  sys.num_classes = train.num_classes();
  sys.model = train_classifier(train, val, config,
                               [&](const ScoreModel& m) { return triage_filter(m, train); });
  // Defer exactly where the human is right and the classifier is not; ties stay with the classifier.
  std::vector<char> target(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    target[i] = train.human_correct(i) && argmax_model(sys.model, train.row(i)) != train.label(i);
  TrainedSystem probe = sys;
  sys.aux_model = train_logit(
      train, config, [&](std::size_t i) { return target[i] != 0; },
      [&](const ScoreModel& m) {
        probe.aux_model = m;
        return system_accuracy(probe, val);
      });
  return sys;
}

}  // namespace deferlab
