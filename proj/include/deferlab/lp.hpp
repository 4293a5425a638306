#pragma once

// Bounded-variable linear programs and a two-phase primal simplex solver.
//
// Convention: minimize c.x subject to row_i(x) {<=,>=,=} b_i and lo <= x <= hi.
// Infinite bounds are +-std::numeric_limits<double>::infinity().

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace deferlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LinearTerm {
  std::size_t var;
  double coef;
};

struct LinearRow {
  std::vector<LinearTerm> terms;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
};

/// The model keeps rows as term lists; the solver works on a dense copy.
class LinearProgram {
 public:
  std::size_t add_variable(double lo, double hi, double cost);
  std::size_t add_row(std::vector<LinearTerm> terms, RowSense sense, double rhs);

  std::size_t num_vars() const noexcept { return cost_.size(); }
  std::size_t num_rows() const noexcept { return rows_.size(); }

  std::span<const double> cost() const noexcept { return cost_; }
  std::span<const double> lower() const noexcept { return lo_; }
  std::span<const double> upper() const noexcept { return hi_; }
  const std::vector<LinearRow>& rows() const noexcept { return rows_; }

  void set_bounds(std::size_t var, double lo, double hi);
  void set_cost(std::size_t var, double c) { cost_.at(var) = c; }

  double objective(std::span<const double> x) const;
  double row_activity(std::size_t row, std::span<const double> x) const;
  /// Largest violation of any row or bound at x (0 when feasible).
  double max_violation(std::span<const double> x) const;

 private:
  std::vector<double> cost_, lo_, hi_;
  std::vector<LinearRow> rows_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, TimeLimit };

const char* to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective_value = 0.0;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-10;
  double optimality_tol = 1e-10;
  /// 0 selects the default 50*(rows+vars).
  std::size_t iteration_limit = 0;
  /// 0 selects the default 3*(rows+vars) degenerate pivots before Bland's rule.
  std::size_t bland_after = 0;
  /// Basis inverse is recomputed from scratch every this many pivots.
  std::size_t refactor_every = 100;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

/// Plain-text dump for reproducing solver faults:
///
///   deferlab-lp 1
///   vars <n>
///   <lo> <hi> <cost>            (n lines; bounds may be inf/-inf)
///   rows <m>
///   <L|G|E> <rhs> <k> <var>:<coef> ...   (m lines)
void write_lp_text(std::ostream& out, const LinearProgram& lp);
LinearProgram read_lp_text(std::istream& in);

}  // namespace deferlab
