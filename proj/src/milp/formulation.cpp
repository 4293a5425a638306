#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "deferlab/milp.hpp"

namespace deferlab {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void normalize_features(MilpProblem& p, const DeferDataset& data) {
  p.n = data.size();
  p.d = data.dim();
  p.num_classes = data.num_classes();
  double scale = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    double l1 = 0.0;
    for (double v : data.row(i)) l1 += std::abs(v);
    scale = std::max(scale, l1);
  }
  p.norm_scale = scale > 0.0 ? scale : 1.0;
  p.x_aug.resize(p.n * (p.d + 1));
  for (std::size_t i = 0; i < p.n; ++i) {
    auto row = data.row(i);
    for (std::size_t j = 0; j < p.d; ++j) p.x_aug[i * (p.d + 1) + j] = row[j] / p.norm_scale;
    p.x_aug[i * (p.d + 1) + p.d] = 1.0;
  }
  p.labels.assign(data.labels().begin(), data.labels().end());
  p.human.assign(data.human_preds().begin(), data.human_preds().end());
}

std::size_t add_var(MilpProblem& p, double lo, double hi, double cost, VarInfo info, bool binary) {
  std::size_t id = p.lp_relaxation.add_variable(lo, hi, cost);
  p.var_roles.push_back(info);
  if (binary) p.binary_var_ids.push_back(id);
  return id;
}

std::vector<std::size_t> add_weights(MilpProblem& p, VarRole role, std::size_t row) {
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j <= p.d; ++j) ids.push_back(add_var(p, -p.box, p.box, 0.0, {role, row, j}, false));
  return ids;
}

std::vector<LinearTerm> dot_terms(const MilpProblem& p, const std::vector<std::size_t>& w, std::size_t i,
                                  double sign) {
  std::vector<LinearTerm> terms;
  auto x = p.point(i);
  for (std::size_t j = 0; j <= p.d; ++j)
    if (x[j] != 0.0) terms.push_back({w[j], sign * x[j]});
  return terms;
}

MilpProblem start_problem(const DeferDataset& data, const MilpConfig& config) {
  config.validate();
  MilpProblem p(data);
  normalize_features(p, data);
  p.gamma = config.gamma;
  p.k_m = config.big_m_classifier();
  p.k_r = config.big_m_rejector();
  p.box = config.box;
  p.lambda_reg = config.lambda_reg;
  return p;
}

void add_point_vars(MilpProblem& p) {
  const double inv_n = 1.0 / static_cast<double>(p.n);
  p.rejector_vars = add_weights(p, VarRole::RejectorWeight, 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    p.defer_vars.push_back(
        add_var(p, 0.0, 1.0, p.human_wrong(i) ? inv_n : 0.0, {VarRole::Defer, i, 0}, true));
    p.error_vars.push_back(add_var(p, 0.0, 1.0, 0.0, {VarRole::ClassifierError, i, 0}, true));
    p.loss_vars.push_back(add_var(p, 0.0, kInf, inv_n, {VarRole::PointLoss, i, 0}, false));
  }
}

void add_rejector_and_loss_rows(MilpProblem& p) {
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t r = p.defer_vars[i], t = p.error_vars[i], phi = p.loss_vars[i];
    p.lp_relaxation.add_row({{phi, 1.0}, {t, -1.0}, {r, 1.0}}, RowSense::GreaterEqual, 0.0);
    auto upper = dot_terms(p, p.rejector_vars, i, 1.0);
    upper.push_back({r, -(p.k_r + p.gamma)});
    auto lower = upper;
    p.lp_relaxation.add_row(std::move(upper), RowSense::LessEqual, -p.gamma);
    p.lp_relaxation.add_row(std::move(lower), RowSense::GreaterEqual, -p.k_r);
  }
}

void add_regularization(MilpProblem& p) {
  if (p.lambda_reg <= 0.0) return;
  std::vector<std::size_t> weights;
  for (const auto& row : p.classifier_vars) weights.insert(weights.end(), row.begin(), row.end());
  weights.insert(weights.end(), p.rejector_vars.begin(), p.rejector_vars.end());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    std::size_t aux = add_var(p, 0.0, p.box, p.lambda_reg, {VarRole::NormAux, 0, k}, false);
    p.aux_vars.push_back(aux);
    p.lp_relaxation.add_row({{aux, 1.0}, {weights[k], -1.0}}, RowSense::GreaterEqual, 0.0);
    p.lp_relaxation.add_row({{aux, 1.0}, {weights[k], 1.0}}, RowSense::GreaterEqual, 0.0);
  }
}

void apply_config_constraints(MilpProblem& p, const MilpConfig& config) {
  if (config.coverage_beta) add_coverage_constraint(p, *config.coverage_beta);
  if (config.fairness_groups) add_fairness_constraint(p, *config.fairness_groups);
}

}  // namespace

void MilpConfig::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (!(box > 0.0)) throw std::invalid_argument("box must be > 0");
  if (big_m_classifier() < gamma || big_m_rejector() < gamma)
    throw std::invalid_argument("big-M constants must be >= gamma");
  if (lambda_reg < 0.0) throw std::invalid_argument("lambda_reg must be >= 0");
  if (coverage_beta && !(*coverage_beta >= 0.0 && *coverage_beta <= 1.0))
    throw std::invalid_argument("coverage beta must lie in [0,1]");
  if (time_limit_s && !(*time_limit_s >= 0.0)) throw std::invalid_argument("time limit must be >= 0");
  if (abs_gap && !(*abs_gap >= 0.0)) throw std::invalid_argument("gap must be >= 0");
}

MilpProblem build_binary_milp(const DeferDataset& data, const MilpConfig& config) {
  if (data.num_classes() != 2) throw std::invalid_argument("binary MILP needs C = 2; use the multiclass builder");
  MilpProblem p = start_problem(data, config);
  p.classifier_vars.push_back(add_weights(p, VarRole::ClassifierWeight, 0));
  add_point_vars(p);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double y = p.labels[i] == 1 ? 1.0 : -1.0;
    auto terms = dot_terms(p, p.classifier_vars[0], i, y);
    terms.push_back({p.error_vars[i], p.k_m});
    p.lp_relaxation.add_row(std::move(terms), RowSense::GreaterEqual, p.gamma);
  }
  add_rejector_and_loss_rows(p);
  add_regularization(p);
  apply_config_constraints(p, config);
  return p;
}

MilpProblem build_multiclass_milp(const DeferDataset& data, const MilpConfig& config) {
  MilpProblem p = start_problem(data, config);
  p.multiclass_form = true;
  const auto classes = static_cast<std::size_t>(p.num_classes);
  for (std::size_t k = 0; k < classes; ++k) p.classifier_vars.push_back(add_weights(p, VarRole::ClassifierWeight, k));
  add_point_vars(p);
  p.pair_vars.assign(p.n, std::vector<std::size_t>(classes, kNone));
  const double inv = 1.0 / static_cast<double>(classes - 1);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto y = static_cast<std::size_t>(p.labels[i]);
    std::vector<LinearTerm> cover{{p.error_vars[i], 1.0}};
    for (std::size_t j = 0; j < classes; ++j) {
      if (j == y) continue;
      std::size_t c = add_var(p, 0.0, 1.0, 0.0, {VarRole::Pairwise, i, j}, true);
      p.pair_vars[i][j] = c;
      auto diff = dot_terms(p, p.classifier_vars[y], i, 1.0);
      auto neg = dot_terms(p, p.classifier_vars[j], i, -1.0);
      diff.insert(diff.end(), neg.begin(), neg.end());
      diff.push_back({c, -(2.0 * p.k_m + p.gamma)});
      auto lower = diff;
      p.lp_relaxation.add_row(std::move(diff), RowSense::LessEqual, -p.gamma);
      p.lp_relaxation.add_row(std::move(lower), RowSense::GreaterEqual, -2.0 * p.k_m);
      cover.push_back({c, inv});
    }
    p.lp_relaxation.add_row(std::move(cover), RowSense::GreaterEqual, 1.0);
  }
  add_rejector_and_loss_rows(p);
  add_regularization(p);
  apply_config_constraints(p, config);
  return p;
}

MilpProblem build_milp(const DeferDataset& data, const MilpConfig& config) {
  return data.num_classes() == 2 ? build_binary_milp(data, config) : build_multiclass_milp(data, config);
}

void add_coverage_constraint(MilpProblem& p, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("coverage beta must lie in [0,1]");
  std::vector<LinearTerm> terms;
  const double inv_n = 1.0 / static_cast<double>(p.n);
  for (std::size_t r : p.defer_vars) terms.push_back({r, inv_n});
  p.lp_relaxation.add_row(std::move(terms), RowSense::LessEqual, beta);
  p.coverage_beta = p.coverage_beta ? std::min(*p.coverage_beta, beta) : beta;
}

void add_fairness_constraint(MilpProblem& p, std::span<const int> groups) {
  if (groups.size() != p.n) throw std::invalid_argument("fairness groups must have one id per point");
  std::map<int, std::size_t> sizes;
  for (int g : groups) ++sizes[g];
  if (sizes.size() < 2) throw std::invalid_argument("fairness needs at least two nonempty groups");
  for (const auto& [g, count] : sizes) {
    const double in = 1.0 / static_cast<double>(count);
    const double out = -1.0 / static_cast<double>(p.n - count);
    std::vector<LinearTerm> terms;
    for (std::size_t i = 0; i < p.n; ++i) {
      const double w = groups[i] == g ? in : out;
      terms.push_back({p.loss_vars[i], w});
      if (p.human_wrong(i)) terms.push_back({p.defer_vars[i], w});
    }
    auto lower = terms;
    p.lp_relaxation.add_row(std::move(terms), RowSense::LessEqual, kFairnessSlack);
    p.lp_relaxation.add_row(std::move(lower), RowSense::GreaterEqual, -kFairnessSlack);
  }
  p.fairness_groups.assign(groups.begin(), groups.end());
}

HalfspacePair rescale_pair(HalfspacePair pair, double norm_scale) {
  auto fix = [&](std::vector<double>& w) {
    for (std::size_t j = 0; j + 1 < w.size(); ++j) w[j] /= norm_scale;
  };
  for (auto& row : pair.classifier) fix(row);
  fix(pair.rejector);
  return pair;
}

HalfspacePair normalized_pair(const MilpProblem& p, std::span<const double> x) {
  HalfspacePair pair;
  for (const auto& row : p.classifier_vars) {
    std::vector<double> w;
    for (std::size_t id : row) w.push_back(x[id]);
    pair.classifier.push_back(std::move(w));
  }
  for (std::size_t id : p.rejector_vars) pair.rejector.push_back(x[id]);
  return pair;
}

HalfspacePair extract_pair(const MilpProblem& p, std::span<const double> x) {
  if (x.size() != p.lp_relaxation.num_vars()) throw std::invalid_argument("solution length mismatch");
  for (std::size_t id : p.binary_var_ids)
    if (std::abs(x[id] - std::round(x[id])) > kIntegralityTol)
      throw std::logic_error("extract_pair called on a fractional solution");
  return rescale_pair(normalized_pair(p, x), p.norm_scale);
}

std::optional<std::vector<double>> pair_to_solution(const MilpProblem& p, const HalfspacePair& pair) {
  const std::size_t n = p.n;
  std::vector<double> x(p.lp_relaxation.num_vars(), 0.0);

  // Rejector: scale into the box and |R.x| <= K_r, then every point needs |R.x| >= gamma.
  std::vector<double> rs(n);
  double wmax = 0.0, amax = 0.0;
  for (double v : pair.rejector) wmax = std::max(wmax, std::abs(v));
  for (std::size_t i = 0; i < n; ++i) {
    rs[i] = affine_score(pair.rejector, p.point(i).first(p.d));
    amax = std::max(amax, std::abs(rs[i]));
  }
  if (wmax == 0.0) return std::nullopt;
  double sr = p.box / wmax;
  if (amax > 0.0) sr = std::min(sr, p.k_r / amax);
  if (p.lambda_reg > 0.0) {
    // Smallest scale keeping every point outside the margin.
    double amin = kInf;
    for (double a : rs) amin = std::min(amin, std::abs(a));
    if (amin > 0.0) sr = std::min(sr, 2.0 * p.gamma / amin);
  }
  for (std::size_t j = 0; j <= p.d; ++j) x[p.rejector_vars[j]] = sr * pair.rejector[j];
  std::vector<int> defer(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = sr * rs[i];
    if (std::abs(a) < p.gamma) return std::nullopt;
    defer[i] = a > 0.0;
  }

  std::vector<int> wrong(n);
  if (!p.multiclass_form) {
    const auto& w = pair.classifier.at(0);
    double cmax = 0.0, worst = 0.0;
    for (double v : w) cmax = std::max(cmax, std::abs(v));
    std::vector<double> margin(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = p.labels[i] == 1 ? 1.0 : -1.0;
      margin[i] = y * affine_score(w, p.point(i).first(p.d));
      worst = std::max(worst, -margin[i]);
    }
    double sm = cmax > 0.0 ? p.box / cmax : 0.0;
    if (worst > 0.0) sm = std::min(sm, (p.k_m - p.gamma) / worst);
    if (p.lambda_reg > 0.0) {
      double best = kInf;
      for (double m : margin)
        if (m > 0.0) best = std::min(best, m);
      sm = best < kInf ? std::min(sm, 2.0 * p.gamma / best) : 0.0;
    }
    for (std::size_t j = 0; j <= p.d; ++j) x[p.classifier_vars[0][j]] = sm * w[j];
    for (std::size_t i = 0; i < n; ++i) wrong[i] = sm * margin[i] < p.gamma;
  } else {
    const auto classes = static_cast<std::size_t>(p.num_classes);
    std::vector<double> scores(n * classes);
    double cmax = 0.0, dmax = 0.0;
    for (const auto& row : pair.classifier)
      for (double v : row) cmax = std::max(cmax, std::abs(v));
    if (cmax == 0.0) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < classes; ++k)
        scores[i * classes + k] = affine_score(pair.classifier[k], p.point(i).first(p.d));
      const auto y = static_cast<std::size_t>(p.labels[i]);
      for (std::size_t k = 0; k < classes; ++k)
        dmax = std::max(dmax, std::abs(scores[i * classes + y] - scores[i * classes + k]));
    }
    double sm = p.box / cmax;
    if (dmax > 0.0) sm = std::min(sm, 2.0 * p.k_m / dmax);
    if (p.lambda_reg > 0.0) {
      double dmin = kInf;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < classes; ++k)
          if (k != static_cast<std::size_t>(p.labels[i]))
            dmin = std::min(dmin, std::abs(scores[i * classes + p.labels[i]] - scores[i * classes + k]));
      if (dmin > 0.0 && dmin < kInf) sm = std::min(sm, 2.0 * p.gamma / dmin);
    }
    for (std::size_t k = 0; k < classes; ++k)
      for (std::size_t j = 0; j <= p.d; ++j) x[p.classifier_vars[k][j]] = sm * pair.classifier[k][j];
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<std::size_t>(p.labels[i]);
      bool all = true;
      for (std::size_t k = 0; k < classes; ++k) {
        if (k == y) continue;
        const double diff = sm * (scores[i * classes + y] - scores[i * classes + k]);
        if (std::abs(diff) < p.gamma) return std::nullopt;
        x[p.pair_vars[i][k]] = diff > 0.0;
        all = all && diff > 0.0;
      }
      wrong[i] = !all;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    x[p.defer_vars[i]] = defer[i];
    x[p.error_vars[i]] = wrong[i];
    x[p.loss_vars[i]] = std::max(0, wrong[i] - defer[i]);
  }
  if (!p.aux_vars.empty()) {
    std::size_t k = 0;
    for (const auto& row : p.classifier_vars)
      for (std::size_t id : row) x[p.aux_vars[k++]] = std::abs(x[id]);
    for (std::size_t id : p.rejector_vars) x[p.aux_vars[k++]] = std::abs(x[id]);
  }
  if (p.lp_relaxation.max_violation(x) > 1e-9) return std::nullopt;
  return x;
}

}  // namespace deferlab
