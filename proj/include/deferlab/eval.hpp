#pragma once

// System metrics, accuracy-coverage sweeps, the halfspace generalization
// bound, and the multi-trial benchmark harness.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deferlab/core.hpp"
#include "deferlab/datagen.hpp"
#include "deferlab/milp.hpp"
#include "deferlab/train.hpp"

namespace deferlab {

struct EvalReport {
  double system_accuracy = 0.0;
  double coverage = 0.0;  // fraction not deferred
  std::optional<double> classifier_accuracy_nondeferred;  // absent when everything is deferred
  std::optional<double> human_accuracy_deferred;          // absent when nothing is deferred
  std::size_t n_points = 0;
  std::size_t n_deferred = 0;
};

EvalReport evaluate(const DeferDataset& data, std::span<const Decision> decisions);
EvalReport evaluate(const TrainedSystem& system, const DeferDataset& data);
EvalReport evaluate(const HalfspacePair& pair, const DeferDataset& data);

struct CurvePoint {
  double threshold = 0.0;
  double coverage = 0.0;
  double system_accuracy = 0.0;
};

/// Thresholds strictly increasing; the first is -inf (defer all) and the last +inf (defer none).
struct CoverageCurve {
  std::vector<CurvePoint> points;
};

/// Sweep of `defer iff score >= t` over -inf, the midpoints of the sorted
/// distinct scores, and +inf. Strict and non-strict rules agree on these
/// thresholds. When there are more than grid_size of them, evenly spaced ones
/// are kept, endpoints always.
CoverageCurve coverage_curve(const DeferDataset& data, std::span<const double> scores,
                             std::span<const int> classifier_labels, std::size_t grid_size);
CoverageCurve coverage_curve(const TrainedSystem& system, const DeferDataset& data, std::size_t grid_size);
/// Rejection score R.x~.
CoverageCurve coverage_curve(const HalfspacePair& pair, const DeferDataset& data, std::size_t grid_size);

/// train_loss + [(K_m + K_r) d sqrt(2 ln d) + 10 sqrt(ln(2/delta))] / sqrt(n p), natural logs.
/// Requires 0 < delta < 0.5, p in (0, 1], n >= 1, d >= 1, K_m, K_r >= 0.
double generalization_bound(double train_loss, double k_m, double k_r, std::size_t d, std::size_t n,
                            double human_error_rate, double delta);

struct BenchmarkInstance {
  enum class Kind { Synthetic, Grouped };
  Kind kind = Kind::Synthetic;
  SyntheticConfig synthetic;  // its seed is replaced per trial
  // grouped expert
  std::size_t d = 10;
  std::size_t n = 2000;
  int num_classes = 10;
  int expert_strength = 5;
  GroupedExpertOptions grouped;
};

struct BenchmarkOptions {
  std::vector<Method> methods;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  TrainConfig train;         // method and alpha grid set per method
  bool default_alpha_grids = true;
  MilpConfig milp;
  std::size_t curve_grid = 101;
  unsigned jobs = 1;
  /// Absolute train/val/test sizes taken from the shuffled sample; default split is 70-10-20.
  std::optional<std::array<std::size_t, 3>> split_sizes;
};

struct TrialResult {
  Method method = Method::RS;
  std::size_t trial = 0;
  EvalReport report;      // test set
  double train_error = 0.0;
  double tau = 0.0;       // operating threshold
  double alpha = 1.0;
  CoverageCurve curve;    // test set sweep
  std::string status;     // MILP status, empty otherwise
  double seconds = 0.0;
};

struct MethodSummary {
  Method method = Method::RS;
  std::size_t trials = 0;
  double mean_system_accuracy = 0.0;
  std::optional<double> se_system_accuracy;  // n-1 denominator; absent for one trial
  double mean_coverage = 0.0;
};

struct BenchmarkResult {
  std::vector<TrialResult> rows;  // trial-major, methods in option order
  std::vector<MethodSummary> summary;
};

/// Trial t draws its data from seed_for_trial(seed, t); methods see identical splits.
std::uint64_t seed_for_trial(std::uint64_t seed, std::size_t trial);

struct TrialData {
  DeferDataset train, val, test;
};
TrialData make_trial_data(const BenchmarkInstance& instance, const BenchmarkOptions& options, std::size_t trial);

BenchmarkResult run_benchmark(const BenchmarkInstance& instance, const BenchmarkOptions& options);

std::vector<MethodSummary> summarize(std::span<const TrialResult> rows, std::span<const Method> methods);

/// `method,trial,coverage,system_acc,clf_acc_nondef,hum_acc_def`; absent arms are empty fields.
void write_results_csv(std::ostream& out, std::span<const TrialResult> rows);
/// `threshold,coverage,system_acc`
void write_curve_csv(std::ostream& out, const CoverageCurve& curve);
/// `method,trials,mean_system_acc,se_system_acc,mean_coverage`
void write_summary_csv(std::ostream& out, std::span<const MethodSummary> summary);

struct SvgSeries {
  std::string name;
  CoverageCurve curve;
  double operating_coverage = 0.0;
  double operating_accuracy = 0.0;
};
/// Accuracy against coverage, one polyline per series with its operating point marked.
std::string render_coverage_svg(std::span<const SvgSeries> series, const std::string& title);

}  // namespace deferlab
