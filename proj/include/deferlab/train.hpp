#pragma once

// Score models, Adam, surrogate training loops and the two-stage baselines.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deferlab/core.hpp"
#include "deferlab/surrogates.hpp"

namespace deferlab {

class Rng;

enum class Architecture { Linear, OneHidden };

/// Linear: W[out][d+1], bias last.
/// One hidden ReLU layer: W1[h][d+1] then W2[out][h+1], biases last.
class ScoreModel {
 public:
  ScoreModel() = default;
  ScoreModel(Architecture arch, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_units = 0);

  Architecture architecture() const noexcept { return arch_; }
  std::size_t input_dim() const noexcept { return in_; }
  std::size_t output_dim() const noexcept { return out_; }
  std::size_t hidden_units() const noexcept { return hidden_; }
  std::size_t num_params() const noexcept { return w_.size(); }

  std::span<double> weights() noexcept { return w_; }
  std::span<const double> weights() const noexcept { return w_; }

  /// Uniform in +-1/sqrt(fan_in), fan_in counting the bias input.
  void initialize(Rng& rng);

  std::vector<double> forward(std::span<const double> x) const;
  /// Adds d(upstream . output)/d weights into grad.
  void backward(std::span<const double> x, std::span<const double> upstream, std::span<double> grad) const;

 private:
  Architecture arch_ = Architecture::Linear;
  std::size_t in_ = 0, out_ = 0, hidden_ = 0;
  std::vector<double> w_;
};

struct AdamOptions {
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t num_params, AdamOptions options);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  AdamOptions opt_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

enum class Method { RS, RS2, CE, OvA, MoE, Confidence, Selective, Triage, Milp };

const char* to_string(Method m);
/// Accepts the to_string names; throws std::invalid_argument otherwise.
Method parse_method(const std::string& name);
/// Methods trained by minimizing a deferral surrogate on a joint C+1 output model.
bool is_surrogate_method(Method m);
SurrogateKind surrogate_of(Method m);

struct TrainConfig {
  Method method = Method::RS;
  double alpha = 1.0;
  std::vector<double> alpha_grid;  // empty: train at `alpha` only
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  AdamOptions adam;
  std::uint64_t seed = 0;
  std::size_t hidden_units = 0;  // 0: linear model
  double val_fraction = 0.1;
  bool track_best = true;  // false: keep the last epoch

  void validate() const;
};

/// Default grids: RS 0, 0.1, ..., 1; CE 0, 0.1, 0.5, 1.
std::vector<double> default_alpha_grid(Method m);

struct TrainedSystem {
  Method method = Method::RS;
  int num_classes = 2;
  ScoreModel model;                  // C+1 scores, or C class scores for two-stage methods
  std::optional<ScoreModel> aux_model;  // human-correctness or rejector logit
  double tau = 0.0;
  double alpha = 1.0;
};

/// Score compared against tau; larger means more inclined to defer.
///   rs, ce, ova:   g_defer - max_y g_y
///   rs2, moe:      g_defer
///   confidence:    P(human correct) - max softmax
///   selective:     -max softmax
///   triage:        rejector logit
double rejection_score(const TrainedSystem& system, std::span<const double> x);
/// Confidence defers on score > tau, every other method on score >= tau.
bool defers_at(const TrainedSystem& system, double score, double tau);
int classifier_label(const TrainedSystem& system, std::span<const double> x);
Prediction predict(const TrainedSystem& system, std::span<const double> x, int human_label);
std::vector<Decision> decide(const TrainedSystem& system, const DeferDataset& data);
std::vector<Decision> decide_at(const TrainedSystem& system, const DeferDataset& data, double tau);
double system_accuracy(const TrainedSystem& system, const DeferDataset& data);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean surrogate loss over `indices` and its gradient in the model weights.
double batch_loss_grad(const ScoreModel& model, SurrogateKind kind, double alpha, const DeferDataset& data,
                       std::span<const std::size_t> indices, std::span<double> grad);

/// Adam on the surrogate of config.method at config.alpha; returns the epoch
/// with the best validation system accuracy at tau = 0 (earliest on ties).
TrainedSystem train_surrogate(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config);
/// One train_surrogate per alpha (tau refit where the method uses it); best
/// validation accuracy wins, smaller alpha on ties.
TrainedSystem search_alpha(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config);

/// Candidates: -inf, +inf and midpoints of the sorted distinct validation
/// rejection scores. Highest validation accuracy wins, ties toward 0.
double fit_tau(const TrainedSystem& system, const DeferDataset& val);

TrainedSystem train_compare_confidence(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config);
TrainedSystem train_selective_prediction(const DeferDataset& train, const DeferDataset& val,
                                         const TrainConfig& config);
TrainedSystem train_differentiable_triage(const DeferDataset& train, const DeferDataset& val,
                                          const TrainConfig& config);

/// Points the triage classifier stage trains on: classifier 0-1 loss <= human 0-1 loss.
std::vector<std::size_t> triage_filter(const ScoreModel& classifier, const DeferDataset& data);

/// Dispatch on config.method (not Milp). Surrogate methods with a grid go
/// through search_alpha; rs, rs2 and selective get a fitted tau.
TrainedSystem train_method(const DeferDataset& train, const DeferDataset& val, const TrainConfig& config);

/// Text format:
///   system,<method>,<C>,<tau>,<alpha>
///   model,<linear|one_hidden>,<in>,<out>,<hidden>
///   <w0>,<w1>,...
///   [aux,<arch>,<in>,<out>,<hidden> + weight line]
void write_system(std::ostream& out, const TrainedSystem& system);
TrainedSystem read_system(std::istream& in);

}  // namespace deferlab
