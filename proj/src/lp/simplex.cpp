// Two-phase bounded-variable primal simplex on a dense explicit basis inverse.
//
// Every row i gets a logical column s_i with a_i.x + s_i = b_i, bounded so
// that the row sense holds. Rows whose logical cannot absorb the initial
// residual get an artificial column; phase 1 drives the artificials to zero.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deferlab/lp.hpp"

namespace deferlab {

std::size_t LinearProgram::add_variable(double lo, double hi, double cost) {
  if (lo > hi) throw std::invalid_argument("variable lower bound exceeds upper bound");
  lo_.push_back(lo);
  hi_.push_back(hi);
  cost_.push_back(cost);
  return cost_.size() - 1;
}

std::size_t LinearProgram::add_row(std::vector<LinearTerm> terms, RowSense sense, double rhs) {
  for (const auto& t : terms)
    if (t.var >= num_vars()) throw std::invalid_argument("row references unknown variable");
  rows_.push_back({std::move(terms), sense, rhs});
  return rows_.size() - 1;
}

void LinearProgram::set_bounds(std::size_t var, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("variable lower bound exceeds upper bound");
  lo_.at(var) = lo;
  hi_.at(var) = hi;
}

double LinearProgram::objective(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < cost_.size(); ++j) s += cost_[j] * x[j];
  return s;
}

double LinearProgram::row_activity(std::size_t row, std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : rows_[row].terms) s += t.coef * x[t.var];
  return s;
}

double LinearProgram::max_violation(std::span<const double> x) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < num_vars(); ++j) {
    worst = std::max(worst, lo_[j] - x[j]);
    worst = std::max(worst, x[j] - hi_[j]);
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    double a = row_activity(i, x);
    switch (rows_[i].sense) {
      case RowSense::LessEqual: worst = std::max(worst, a - rows_[i].rhs); break;
      case RowSense::GreaterEqual: worst = std::max(worst, rows_[i].rhs - a); break;
      case RowSense::Equal: worst = std::max(worst, std::abs(a - rows_[i].rhs)); break;
    }
  }
  return worst;
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
    case LpStatus::TimeLimit: return "time_limit";
  }
  return "unknown";
}

namespace {

enum class NonbasicAt : unsigned char { Lower, Upper, Zero, Basic };

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& opt)
      : opt_(opt), m_(lp.num_rows()), v_(lp.num_vars()) {
    dense_.assign(m_ * v_, 0.0);
    b_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& row = lp.rows()[i];
      for (const auto& t : row.terms) dense_[i * v_ + t.var] += t.coef;
      b_[i] = row.rhs;
    }
    const std::size_t cols = v_ + m_;
    lo_.resize(cols);
    hi_.resize(cols);
    cost_.assign(cols, 0.0);
    for (std::size_t j = 0; j < v_; ++j) {
      lo_[j] = lp.lower()[j];
      hi_[j] = lp.upper()[j];
      cost_[j] = lp.cost()[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      switch (lp.rows()[i].sense) {
        case RowSense::LessEqual: lo_[v_ + i] = 0.0; hi_[v_ + i] = kInf; break;
        case RowSense::GreaterEqual: lo_[v_ + i] = -kInf; hi_[v_ + i] = 0.0; break;
        case RowSense::Equal: lo_[v_ + i] = 0.0; hi_[v_ + i] = 0.0; break;
      }
    }
    iteration_limit_ = opt.iteration_limit ? opt.iteration_limit : 50 * (m_ + v_);
    bland_after_ = opt.bland_after ? opt.bland_after : 3 * (m_ + v_);
  }

  LpSolution run() {
    LpSolution out;
    initialize();
    if (!artificial_row_.empty()) {
      phase_costs(true);
      LpStatus st = iterate();
      if (st != LpStatus::Optimal) return finish(out, st);
      double infeas = 0.0;
      for (std::size_t k = 0; k < artificial_row_.size(); ++k) infeas += x_[v_ + m_ + k];
      if (infeas > 10.0 * opt_.feasibility_tol * std::max(1.0, b_scale_))
        return finish(out, LpStatus::Infeasible);
      for (std::size_t k = 0; k < artificial_row_.size(); ++k) {
        const std::size_t col = v_ + m_ + k;
        lo_[col] = hi_[col] = 0.0;
        if (state_[col] != NonbasicAt::Basic) x_[col] = 0.0;
      }
    }
    phase_costs(false);
    return finish(out, iterate());
  }

 private:
  std::size_t num_cols() const { return v_ + m_ + artificial_row_.size(); }

  void column(std::size_t j, std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (j < v_) {
      for (std::size_t i = 0; i < m_; ++i) out[i] = dense_[i * v_ + j];
    } else if (j < v_ + m_) {
      out[j - v_] = 1.0;
    } else {
      std::size_t k = j - v_ - m_;
      out[artificial_row_[k]] = artificial_sign_[k];
    }
  }

  double nonbasic_start(std::size_t j, NonbasicAt& at) const {
    if (std::isfinite(lo_[j])) {
      at = NonbasicAt::Lower;
      return lo_[j];
    }
    if (std::isfinite(hi_[j])) {
      at = NonbasicAt::Upper;
      return hi_[j];
    }
    at = NonbasicAt::Zero;
    return 0.0;
  }

  void initialize() {
    x_.assign(v_ + m_, 0.0);
    state_.assign(v_ + m_, NonbasicAt::Lower);
    for (std::size_t j = 0; j < v_; ++j) x_[j] = nonbasic_start(j, state_[j]);
    b_scale_ = 0.0;
    for (double bi : b_) b_scale_ = std::max(b_scale_, std::abs(bi));

    basis_.assign(m_, 0);
    std::vector<double> binv_diag(m_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double r = b_[i];
      for (std::size_t j = 0; j < v_; ++j) r -= dense_[i * v_ + j] * x_[j];
      const std::size_t s = v_ + i;
      if (r >= lo_[s] - opt_.feasibility_tol && r <= hi_[s] + opt_.feasibility_tol) {
        basis_[i] = s;
        state_[s] = NonbasicAt::Basic;
        x_[s] = r;
        continue;
      }
      double sb = r < lo_[s] ? lo_[s] : hi_[s];
      x_[s] = sb;
      state_[s] = sb == lo_[s] ? NonbasicAt::Lower : NonbasicAt::Upper;
      const double sign = r - sb > 0.0 ? 1.0 : -1.0;
      artificial_row_.push_back(i);
      artificial_sign_.push_back(sign);
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      cost_.push_back(0.0);
      x_.push_back(std::abs(r - sb));
      state_.push_back(NonbasicAt::Basic);
      basis_[i] = x_.size() - 1;
      binv_diag[i] = sign;
    }
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = binv_diag[i];
    true_cost_ = cost_;
  }

  void phase_costs(bool phase1) {
    phase1_ = phase1;
    if (phase1) {
      std::fill(cost_.begin(), cost_.end(), 0.0);
      for (std::size_t k = 0; k < artificial_row_.size(); ++k) cost_[v_ + m_ + k] = 1.0;
    } else {
      cost_ = true_cost_;
      for (std::size_t k = 0; k < artificial_row_.size(); ++k) cost_[v_ + m_ + k] = 0.0;
    }
    degenerate_ = 0;
    bland_ = false;
  }

  bool refactor() {
    // Gauss-Jordan on [B | I] with partial pivoting.
    std::vector<double> bmat(m_ * m_), inv(m_ * m_, 0.0), col(m_);
    for (std::size_t p = 0; p < m_; ++p) {
      column(basis_[p], col);
      for (std::size_t i = 0; i < m_; ++i) bmat[i * m_ + p] = col[i];
    }
    for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < m_; ++r)
        if (std::abs(bmat[r * m_ + c]) > std::abs(bmat[piv * m_ + c])) piv = r;
      if (std::abs(bmat[piv * m_ + c]) < 1e-14) return false;
      if (piv != c) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(bmat[piv * m_ + k], bmat[c * m_ + k]);
          std::swap(inv[piv * m_ + k], inv[c * m_ + k]);
        }
      }
      const double d = bmat[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) {
        bmat[c * m_ + k] /= d;
        inv[c * m_ + k] /= d;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = bmat[r * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          bmat[r * m_ + k] -= f * bmat[c * m_ + k];
          inv[r * m_ + k] -= f * inv[c * m_ + k];
        }
      }
    }
    binv_ = std::move(inv);
    recompute_basic_values();
    return true;
  }

  void recompute_basic_values() {
    // x_B = B^-1 (b - N x_N)
    std::vector<double> rhs = b_;
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v_; ++j)
        if (state_[j] != NonbasicAt::Basic) s += dense_[i * v_ + j] * x_[j];
      if (state_[v_ + i] != NonbasicAt::Basic) s += x_[v_ + i];
      rhs[i] -= s;
    }
    for (std::size_t k = 0; k < artificial_row_.size(); ++k) {
      const std::size_t col = v_ + m_ + k;
      if (state_[col] != NonbasicAt::Basic)
        rhs[artificial_row_[k]] -= artificial_sign_[k] * x_[col];
    }
    for (std::size_t p = 0; p < m_; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < m_; ++i) s += binv_[p * m_ + i] * rhs[i];
      x_[basis_[p]] = s;
    }
  }

  bool eligible(std::size_t j, double d) const {
    if (lo_[j] == hi_[j]) return false;
    switch (state_[j]) {
      case NonbasicAt::Lower: return d < -opt_.optimality_tol;
      case NonbasicAt::Upper: return d > opt_.optimality_tol;
      case NonbasicAt::Zero: return std::abs(d) > opt_.optimality_tol;
      case NonbasicAt::Basic: return false;
    }
    return false;
  }

  LpStatus iterate() {
    std::vector<double> y(m_), d(num_cols()), alpha(m_), col(m_);
    std::size_t since_refactor = 0;
    while (true) {
      if (iterations_ >= iteration_limit_) return LpStatus::IterationLimit;
      if (opt_.deadline && std::chrono::steady_clock::now() >= *opt_.deadline)
        return LpStatus::TimeLimit;

      // Duals y = c_B^T B^-1.
      std::fill(y.begin(), y.end(), 0.0);
      for (std::size_t p = 0; p < m_; ++p) {
        const double cb = cost_[basis_[p]];
        if (cb == 0.0) continue;
        const double* row = &binv_[p * m_];
        for (std::size_t i = 0; i < m_; ++i) y[i] += cb * row[i];
      }
      // Reduced costs.
      for (std::size_t j = 0; j < v_; ++j) d[j] = cost_[j];
      for (std::size_t i = 0; i < m_; ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        const double* arow = &dense_[i * v_];
        for (std::size_t j = 0; j < v_; ++j) d[j] -= yi * arow[j];
      }
      for (std::size_t i = 0; i < m_; ++i) d[v_ + i] = cost_[v_ + i] - y[i];
      for (std::size_t k = 0; k < artificial_row_.size(); ++k)
        d[v_ + m_ + k] = cost_[v_ + m_ + k] - artificial_sign_[k] * y[artificial_row_[k]];

      std::size_t enter = num_cols();
      double best = 0.0;
      for (std::size_t j = 0; j < num_cols(); ++j) {
        if (state_[j] == NonbasicAt::Basic || !eligible(j, d[j])) continue;
        if (bland_) {
          enter = j;
          break;
        }
        if (std::abs(d[j]) > best) {
          best = std::abs(d[j]);
          enter = j;
        }
      }
      if (enter == num_cols()) return LpStatus::Optimal;

      column(enter, col);
      for (std::size_t p = 0; p < m_; ++p) {
        const double* row = &binv_[p * m_];
        double s = 0.0;
        for (std::size_t i = 0; i < m_; ++i) s += row[i] * col[i];
        alpha[p] = s;
      }

      // Entering moves by dir*t, t >= 0; basic p moves by -dir*alpha[p]*t.
      const double dir = d[enter] < 0.0 ? 1.0 : -1.0;
      double step = kInf;
      std::size_t leave = m_;
      bool leave_to_upper = false;
      if (std::isfinite(lo_[enter]) && std::isfinite(hi_[enter])) step = hi_[enter] - lo_[enter];
      for (std::size_t p = 0; p < m_; ++p) {
        const double rate = -dir * alpha[p];
        if (std::abs(alpha[p]) <= opt_.pivot_tol) continue;
        const std::size_t bj = basis_[p];
        double limit;
        bool to_upper;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[bj])) continue;
          limit = (x_[bj] - lo_[bj]) / -rate;
          to_upper = false;
        } else {
          if (!std::isfinite(hi_[bj])) continue;
          limit = (hi_[bj] - x_[bj]) / rate;
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        bool take = false;
        if (limit < step - 1e-12)
          take = true;
        else if (limit <= step + 1e-12)
          take = leave == m_ ||
                 (bland_ ? bj < basis_[leave] : std::abs(alpha[p]) > std::abs(alpha[leave]));
        if (take) {
          step = limit;
          leave = p;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(step)) return LpStatus::Unbounded;

      ++iterations_;
      if (step <= 1e-12) {
        if (++degenerate_ >= bland_after_) bland_ = true;
      }

      x_[enter] += dir * step;
      for (std::size_t p = 0; p < m_; ++p) x_[basis_[p]] -= dir * step * alpha[p];

      if (leave == m_) {
        // Bound flip, basis unchanged.
        state_[enter] = dir > 0.0 ? NonbasicAt::Upper : NonbasicAt::Lower;
        x_[enter] = dir > 0.0 ? hi_[enter] : lo_[enter];
        continue;
      }

      const std::size_t out_col = basis_[leave];
      x_[out_col] = leave_to_upper ? hi_[out_col] : lo_[out_col];
      state_[out_col] = leave_to_upper ? NonbasicAt::Upper : NonbasicAt::Lower;
      if (out_col >= v_ + m_) {
        lo_[out_col] = hi_[out_col] = 0.0;
        x_[out_col] = 0.0;
      }
      basis_[leave] = enter;
      state_[enter] = NonbasicAt::Basic;

      const double piv = alpha[leave];
      double* prow = &binv_[leave * m_];
      for (std::size_t i = 0; i < m_; ++i) prow[i] /= piv;
      for (std::size_t p = 0; p < m_; ++p) {
        if (p == leave || alpha[p] == 0.0) continue;
        const double f = alpha[p];
        double* row = &binv_[p * m_];
        for (std::size_t i = 0; i < m_; ++i) row[i] -= f * prow[i];
      }

      if (++since_refactor >= opt_.refactor_every) {
        since_refactor = 0;
        if (!refactor()) throw std::runtime_error("simplex basis became singular");
      }
    }
  }

  LpSolution& finish(LpSolution& out, LpStatus st) {
    out.status = st;
    out.iterations = iterations_;
    out.x.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(v_));
    out.objective_value = 0.0;
    for (std::size_t j = 0; j < v_; ++j) out.objective_value += true_cost_[j] * out.x[j];
    return out;
  }

  const SimplexOptions& opt_;
  std::size_t m_, v_;
  std::vector<double> dense_, b_, lo_, hi_, cost_, true_cost_, x_, binv_;
  std::vector<NonbasicAt> state_;
  std::vector<std::size_t> basis_, artificial_row_;
  std::vector<double> artificial_sign_;
  std::size_t iterations_ = 0, iteration_limit_ = 0, bland_after_ = 0, degenerate_ = 0;
  double b_scale_ = 0.0;
  bool bland_ = false;
  bool phase1_ = false;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  if (lp.num_vars() == 0) {
    LpSolution s;
    s.status = LpStatus::Optimal;
    for (const auto& row : lp.rows()) {
      bool ok = row.sense == RowSense::LessEqual     ? 0.0 <= row.rhs + options.feasibility_tol
                : row.sense == RowSense::GreaterEqual ? 0.0 >= row.rhs - options.feasibility_tol
                                                      : std::abs(row.rhs) <= options.feasibility_tol;
      if (!ok) s.status = LpStatus::Infeasible;
    }
    return s;
  }
  Simplex simplex(lp, options);
  return simplex.run();
}

}  // namespace deferlab
