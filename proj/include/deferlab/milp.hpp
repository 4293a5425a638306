#pragma once

// Big-M mixed-integer formulation of the 0-1 deferral loss over halfspace
// pairs, and a branch-and-bound solver built on the simplex in lp.hpp.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "deferlab/core.hpp"
#include "deferlab/lp.hpp"

namespace deferlab {

struct MilpConfig {
  double gamma = 1e-5;
  double box = 1.0;                     // |M_j|, |R_j| <= box
  std::optional<double> k_m;            // defaults to box + gamma
  std::optional<double> k_r;            // defaults to box + gamma
  double lambda_reg = 0.0;              // l1 weight on M and R
  std::optional<double> coverage_beta;  // sum r_i / n <= beta
  std::optional<std::vector<int>> fairness_groups;
  std::optional<double> time_limit_s;
  std::optional<double> abs_gap;        // defaults to 0.4 / n
  bool heuristics = true;
  std::uint64_t seed = 0;               // heuristic restarts
  unsigned threads = 1;                 // speculative node solves
  bool deterministic = true;            // node order independent of threads
  std::size_t node_limit = 0;           // 0 = unlimited

  double big_m_classifier() const { return k_m.value_or(box + gamma); }
  double big_m_rejector() const { return k_r.value_or(box + gamma); }
  double gap_for(std::size_t n) const { return abs_gap.value_or(0.4 / static_cast<double>(n)); }
  void validate() const;
};

enum class VarRole { ClassifierWeight, RejectorWeight, Defer, ClassifierError, PointLoss, Pairwise, NormAux };

struct VarInfo {
  VarRole role;
  std::size_t point = 0;  // sample index for per-point variables
  std::size_t index = 0;  // coordinate, class, or competing class
};

struct MilpProblem {
  explicit MilpProblem(DeferDataset data) : original(std::move(data)) {}

  LinearProgram lp_relaxation;
  std::vector<std::size_t> binary_var_ids;
  std::vector<VarInfo> var_roles;

  // Normalized training data: x / norm_scale, bias appended (row stride d+1).
  std::vector<double> x_aug;
  std::vector<int> labels;
  std::vector<int> human;
  std::size_t n = 0;
  std::size_t d = 0;
  int num_classes = 2;
  bool multiclass_form = false;
  double norm_scale = 1.0;
  double gamma = 1e-5;
  double k_m = 1.0;
  double k_r = 1.0;
  double box = 1.0;
  double lambda_reg = 0.0;

  std::vector<std::vector<std::size_t>> classifier_vars;  // [row][coord]
  std::vector<std::size_t> rejector_vars;
  std::vector<std::size_t> defer_vars, error_vars, loss_vars;
  std::vector<std::vector<std::size_t>> pair_vars;  // [point][class], npos at the label
  std::vector<std::size_t> aux_vars;

  std::optional<double> coverage_beta;
  std::vector<int> fairness_groups;  // empty when unconstrained

  DeferDataset original;  // unnormalized, for the reported train loss

  std::span<const double> point(std::size_t i) const { return {x_aug.data() + i * (d + 1), d + 1}; }
  bool human_wrong(std::size_t i) const { return labels[i] != human[i]; }
};

/// Tolerance on the group-mean equalities added by add_fairness_constraint.
inline constexpr double kFairnessSlack = 1e-6;
/// Binaries farther than this from {0,1} count as fractional.
inline constexpr double kIntegralityTol = 1e-6;

MilpProblem build_binary_milp(const DeferDataset& data, const MilpConfig& config);
MilpProblem build_multiclass_milp(const DeferDataset& data, const MilpConfig& config);
/// Binary builder for C = 2, multiclass otherwise; applies coverage/fairness from the config.
MilpProblem build_milp(const DeferDataset& data, const MilpConfig& config);

void add_coverage_constraint(MilpProblem& problem, double beta);
void add_fairness_constraint(MilpProblem& problem, std::span<const int> groups);

/// Weights in normalized coordinates (as the LP sees them) -> original coordinates.
HalfspacePair rescale_pair(HalfspacePair normalized, double norm_scale);
/// Unpacks M and R from an integral solution; throws std::logic_error on fractional binaries.
HalfspacePair extract_pair(const MilpProblem& problem, std::span<const double> x);
/// Normalized-coordinate pair held in x, no integrality check.
HalfspacePair normalized_pair(const MilpProblem& problem, std::span<const double> x);

/// Full variable vector realising a normalized pair: weights scaled into the box
/// and big-M ranges, binaries set from the signs. nullopt when some activation
/// falls inside the margin or the point violates an added constraint.
std::optional<std::vector<double>> pair_to_solution(const MilpProblem& problem,
                                                    const HalfspacePair& normalized);

enum class MilpStatus { ProvenOptimal, TimeLimitIncumbent, TimeLimitNoSolution, Infeasible };
const char* to_string(MilpStatus s);

struct MilpSolution {
  HalfspacePair pair;  // original coordinates
  double objective = 0.0;
  double best_bound = 0.0;
  double train_loss = 0.0;
  MilpStatus status = MilpStatus::Infeasible;
  std::size_t nodes_explored = 0;
  std::size_t lp_iterations = 0;
  double wall_time_s = 0.0;
  std::vector<double> x;
  std::vector<double> bound_history;
  std::vector<double> incumbent_history;
};

MilpSolution solve_milp(const MilpProblem& problem, const MilpConfig& config);

/// Primal heuristics used to seed the incumbent (exposed for testing).
struct HeuristicOptions {
  std::uint64_t seed = 0;
  int restarts = 4;
  int descent_epochs = 1000;
  int polish_rounds = 30;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};
/// Candidate normalized pairs from the heuristics, lowest penalized 0-1 loss first.
std::vector<HalfspacePair> heuristic_pairs(const MilpProblem& problem, const HeuristicOptions& options);
/// Coordinate and random-direction exact line search on the 0-1 loss, in place.
void polish_pair(const MilpProblem& problem, HalfspacePair& normalized, std::uint64_t seed, int rounds,
                 std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt);
/// 0-1 system loss of a normalized pair on the normalized training data plus
/// the coverage penalty (1 per excess deferral).
double penalized_loss(const MilpProblem& problem, const HalfspacePair& normalized);

}  // namespace deferlab
