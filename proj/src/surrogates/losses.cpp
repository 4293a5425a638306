#include "deferlab/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "deferlab/core.hpp"

namespace deferlab {
namespace {

void check(std::span<const double> g, int y) {
  if (g.size() < 3) throw std::invalid_argument("scores need at least two classes plus the defer entry");
  if (y < 0 || static_cast<std::size_t>(y) + 1 >= g.size()) throw std::invalid_argument("label out of range");
  for (double v : g)
    if (!std::isfinite(v)) throw std::invalid_argument("scores must be finite");
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
}

// Softmax over g[0..count), written into p; returns log-sum-exp.
double softmax(std::span<const double> g, std::size_t count, std::vector<double>& p) {
  const double m = *std::max_element(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(count));
  double sum = 0.0;
  p.resize(count);
  for (std::size_t k = 0; k < count; ++k) sum += (p[k] = std::exp(g[k] - m));
  for (std::size_t k = 0; k < count; ++k) p[k] /= sum;
  return m + std::log(sum);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

// log(1 + e^{-z})
double phi(double z) { return -log_sigmoid(z); }

double logaddexp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

LossEval loss_rs(std::span<const double> g, int y, bool human_correct) {
  check(g, y);
  const std::size_t all = g.size(), bot = all - 1;
  std::vector<double> p;
  const double lse = softmax(g, all, p);
  const double log_num = human_correct ? logaddexp(g[y], g[bot]) : g[y];
  const double scale = 2.0 / std::numbers::ln2;
  LossEval out;
  out.value = scale * (lse - log_num);
  out.grad.resize(all);
  for (std::size_t k = 0; k < all; ++k) {
    double share = 0.0;
    if (k == static_cast<std::size_t>(y)) share = std::exp(g[y] - log_num);
    if (k == bot && human_correct) share = std::exp(g[bot] - log_num);
    out.grad[k] = scale * (p[k] - share);
  }
  return out;
}

LossEval loss_rs_alpha(std::span<const double> g, int y, bool human_correct, double alpha) {
  check_alpha(alpha);
  LossEval out = loss_rs(g, y, human_correct);
  if (alpha == 1.0) return out;
  const std::size_t classes = g.size() - 1;
  std::vector<double> p;
  const double lse = softmax(g, classes, p);
  const double ce = (lse - g[y]) / std::numbers::ln2;
  out.value = alpha * out.value + (1.0 - alpha) * ce;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double gce = 0.0;
    if (k < classes) gce = (p[k] - (k == static_cast<std::size_t>(y) ? 1.0 : 0.0)) / std::numbers::ln2;
    out.grad[k] = alpha * out.grad[k] + (1.0 - alpha) * gce;
  }
  return out;
}

LossEval loss_rs2(std::span<const double> g, int y, bool human_correct) {
  check(g, y);
  const std::size_t classes = g.size() - 1, bot = classes;
  std::vector<double> p;
  const double lse = softmax(g, classes, p);
  const double log_py = g[y] - lse;
  const double s = sigmoid(g[bot]);
  const double la = log_py + log_sigmoid(-g[bot]);
  double log_z = la, a = 1.0, b = 0.0;
  if (human_correct) {
    const double lb = log_sigmoid(g[bot]);
    log_z = logaddexp(la, lb);
    a = std::exp(la - log_z);
    b = std::exp(lb - log_z);
  }
  LossEval out;
  out.value = -log_z;
  out.grad.resize(g.size());
  for (std::size_t k = 0; k < classes; ++k) out.grad[k] = -a * ((k == static_cast<std::size_t>(y) ? 1.0 : 0.0) - p[k]);
  out.grad[bot] = a * s - b * (1.0 - s);
  return out;
}

LossEval loss_ce_alpha(std::span<const double> g, int y, bool human_correct, double alpha) {
  check(g, y);
  check_alpha(alpha);
  const std::size_t all = g.size(), bot = all - 1;
  std::vector<double> p;
  const double lse = softmax(g, all, p);
  const double a = human_correct ? alpha : 1.0;
  const double h = human_correct ? 1.0 : 0.0;
  LossEval out;
  out.value = a * (lse - g[y]) + h * (lse - g[bot]);
  out.grad.resize(all);
  for (std::size_t k = 0; k < all; ++k)
    out.grad[k] = (a + h) * p[k] - (k == static_cast<std::size_t>(y) ? a : 0.0) - (k == bot ? h : 0.0);
  return out;
}

LossEval loss_ova(std::span<const double> g, int y, bool human_correct) {
  check(g, y);
  const std::size_t classes = g.size() - 1, bot = classes;
  const double h = human_correct ? 1.0 : 0.0;
  LossEval out;
  out.grad.resize(g.size());
  for (std::size_t k = 0; k < classes; ++k) {
    if (k == static_cast<std::size_t>(y)) {
      out.value += phi(g[k]);
      out.grad[k] = -sigmoid(-g[k]);
    } else {
      out.value += phi(-g[k]);
      out.grad[k] = sigmoid(g[k]);
    }
  }
  out.value += phi(-g[bot]) + h * (phi(g[bot]) - phi(-g[bot]));
  out.grad[bot] = sigmoid(g[bot]) - h;
  return out;
}

LossEval loss_moe(std::span<const double> g, int y, bool human_correct) {
  check(g, y);
  const std::size_t classes = g.size() - 1, bot = classes;
  std::vector<double> p;
  const double lse = softmax(g, classes, p);
  const double log_py = g[y] - lse;
  const double log_h = std::log(human_correct ? 1.0 : kMoeHumanFloor);
  const double s = sigmoid(g[bot]);
  LossEval out;
  out.value = -((1.0 - s) * log_py + s * log_h);
  out.grad.resize(g.size());
  for (std::size_t k = 0; k < classes; ++k)
    out.grad[k] = -(1.0 - s) * ((k == static_cast<std::size_t>(y) ? 1.0 : 0.0) - p[k]);
  out.grad[bot] = s * (1.0 - s) * (log_py - log_h);
  return out;
}

const char* to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::RS: return "rs";
    case SurrogateKind::RS2: return "rs2";
    case SurrogateKind::CE: return "ce";
    case SurrogateKind::OvA: return "ova";
    case SurrogateKind::MoE: return "moe";
  }
  return "unknown";
}

LossEval surrogate_loss(SurrogateKind kind, std::span<const double> g, int y, bool human_correct, double alpha) {
  switch (kind) {
    case SurrogateKind::RS: return loss_rs_alpha(g, y, human_correct, alpha);
    case SurrogateKind::RS2: return loss_rs2(g, y, human_correct);
    case SurrogateKind::CE: return loss_ce_alpha(g, y, human_correct, alpha);
    case SurrogateKind::OvA: return loss_ova(g, y, human_correct);
    case SurrogateKind::MoE: return loss_moe(g, y, human_correct);
  }
  throw std::invalid_argument("unknown surrogate");
}

double induced_system_loss(std::span<const double> g, int y, bool human_correct) {
  check(g, y);
  const std::size_t classes = g.size() - 1;
  auto cls = g.first(classes);
  const std::size_t pred = argmax_lowest(cls);
  if (g[classes] >= cls[pred]) return human_correct ? 0.0 : 1.0;
  return pred == static_cast<std::size_t>(y) ? 0.0 : 1.0;
}

}  // namespace deferlab
