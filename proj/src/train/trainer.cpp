#include <algorithm>
#include <cmath>
#include <numeric>

#include "loop.hpp"

namespace deferlab {

namespace detail {

ScoreModel run_adam(ScoreModel model, std::size_t n, const TrainConfig& config, std::uint64_t shuffle_stream,
                    const BatchLossGrad& loss_grad, const Score& score, const EpochPool& pool) {
  Rng shuffle(config.seed, shuffle_stream);
  Adam adam(model.num_params(), config.adam);
  std::vector<double> grad(model.num_params());
  ScoreModel best = model;
  double best_score = -detail::kInfScore;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (pool) order = pool(model);
    else std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, order.size() - start);
      const double loss = loss_grad(model, std::span<const std::size_t>(order).subspan(start, len), grad);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      adam.step(model.weights(), grad);
    }
    for (double w : model.weights())
      if (!std::isfinite(w)) throw TrainingError("non-finite weights at epoch " + std::to_string(epoch));
    const double s = score(model);
    if (s > best_score) {
      best_score = s;
      best = model;
    }
  }
  return config.track_best ? best : model;
}

double softmax_ce(std::span<const double> g, int y, std::span<double> grad) {
  const double mx = *std::max_element(g.begin(), g.end());
  double z = 0.0;
  for (double v : g) z += std::exp(v - mx);
  for (std::size_t k = 0; k < g.size(); ++k) grad[k] = std::exp(g[k] - mx) / z;
  grad[static_cast<std::size_t>(y)] -= 1.0;
  return mx + std::log(z) - g[static_cast<std::size_t>(y)];
}

double logistic_loss(double z, bool target, double& dz) {
  // log(1 + e^{-s}) with s = +-z
  const double s = target ? z : -z;
  const double loss = s > 0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
  const double p = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
  dz = (target ? -1.0 : 1.0) * (1.0 - p);
  return loss;
}

}  // namespace detail

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("Adam eps must be > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha grid values must lie in [0, 1]");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val fraction must lie in (0, 1)");
}

std::vector<double> default_alpha_grid(Method m) {
  if (m == Method::CE) return {0.0, 0.1, 0.5, 1.0};
  if (m == Method::RS) {
    std::vector<double> g;
    for (int k = 0; k <= 10; ++k) g.push_back(k / 10.0);
    return g;
  }
  return {};
}

double batch_loss_grad(const ScoreModel& model, SurrogateKind kind, double alpha, const DeferDataset& data,
                       std::span<const std::size_t> indices, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i : indices) {
    const auto x = data.row(i);
    const std::vector<double> g = model.forward(x);
    LossEval le = surrogate_loss(kind, g, data.label(i), data.human_correct(i), alpha);
    total += le.value;
    for (double& v : le.grad) v *= inv;
    model.backward(x, le.grad, grad);
  }
  return total * inv;
}

namespace {

void check_pair(const DeferDataset& train, const DeferDataset& val) {
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  if (val.size() == 0) throw std::invalid_argument("empty validation set");
  if (train.dim() != val.dim() || train.num_classes() != val.num_classes())
    throw std::invalid_argument("training and validation sets differ in d or C");
}

bool uses_tau(Method m) { return m == Method::RS || m == Method::RS2 || m == Method::Selective; }

}  // namespace

TrainedSystem train_surrogate(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config) {
  config.validate();
  check_pair(train, val);
  const SurrogateKind kind = surrogate_of(config.method);
  TrainedSystem sys;
  sys.method = config.method;
  sys.num_classes = train.num_classes();
  sys.alpha = config.alpha;
  const std::size_t out = static_cast<std::size_t>(train.num_classes()) + 1;
  ScoreModel init = config.hidden_units
                        ? ScoreModel(Architecture::OneHidden, train.dim(), out, config.hidden_units)
                        : ScoreModel(Architecture::Linear, train.dim(), out);
  Rng rng(config.seed, Stream::TrainInit);
  init.initialize(rng);
  TrainedSystem probe = sys;
  sys.model = detail::run_adam(
      std::move(init), train.size(), config, static_cast<std::uint64_t>(Stream::TrainShuffle),
      [&](const ScoreModel& m, std::span<const std::size_t> batch, std::span<double> grad) {
        return batch_loss_grad(m, kind, config.alpha, train, batch, grad);
      },
      [&](const ScoreModel& m) {
        probe.model = m;
        return system_accuracy(probe, val);
      });
  return sys;
}

double fit_tau(const TrainedSystem& system, const DeferDataset& val) {
  if (val.size() == 0) throw std::invalid_argument("fit_tau needs a nonempty validation set");
  struct Item {
    double score;
    int human_ok, clf_ok;
  };
  std::vector<Item> items(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto x = val.row(i);
    items[i] = {rejection_score(system, x), val.human_correct(i) ? 1 : 0,
                classifier_label(system, x) == val.label(i) ? 1 : 0};
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  // tau below all scores defers everything; sweeping up hands points to the classifier.
  long correct = 0;
  for (const Item& it : items) correct += it.human_ok;
  double best_tau = -detail::kInfScore;
  long best = correct;
  auto consider = [&](double tau, long value) {
    if (value > best || (value == best && std::abs(tau) < std::abs(best_tau))) {
      best = value;
      best_tau = tau;
    }
  };
  for (std::size_t k = 0; k < items.size();) {
    std::size_t j = k;
    while (j < items.size() && items[j].score == items[k].score) {
      correct += items[j].clf_ok - items[j].human_ok;
      ++j;
    }
    const double tau = j < items.size() ? split_point(items[k].score, items[j].score) : detail::kInfScore;
    consider(tau, correct);
    k = j;
  }
  return best_tau;
}

TrainedSystem search_alpha(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config) {
  if (config.alpha_grid.empty()) throw std::invalid_argument("alpha grid is empty");
  std::vector<double> grid = config.alpha_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  TrainedSystem best;
  double best_acc = -1.0;
  for (double a : grid) {
    TrainConfig c = config;
    c.alpha = a;
    TrainedSystem s = train_surrogate(train, val, c);
    if (uses_tau(config.method)) s.tau = fit_tau(s, val);
    const double acc = system_accuracy(s, val);
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(s);
    }
  }
  return best;
}

TrainedSystem train_method(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config) {
  switch (config.method) {
    case Method::Confidence: return train_compare_confidence(train, val, config);
    case Method::Selective: return train_selective_prediction(train, val, config);
    case Method::Triage: return train_differentiable_triage(train, val, config);
    case Method::Milp: throw std::invalid_argument("milp is solved, not trained");
    default: break;
  }
  if (!config.alpha_grid.empty()) return search_alpha(train, val, config);
  TrainedSystem s = train_surrogate(train, val, config);
  if (uses_tau(config.method)) s.tau = fit_tau(s, val);
  return s;
}

}  // namespace deferlab
