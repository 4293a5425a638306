#include <algorithm>
#include <cmath>
#include <numeric>

#include "deferlab/milp.hpp"
#include "deferlab/rng.hpp"

namespace deferlab {
namespace {

using Clock = std::chrono::steady_clock;
using Deadline = std::optional<Clock::time_point>;

constexpr int kSharpenSteps = 150;

bool expired(const Deadline& d) { return d && Clock::now() >= *d; }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log sigma(z) without overflow.
double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

// Standardized copy of the normalized data. Sign patterns of affine functions
// are the same in both coordinate systems; weights are mapped back on exit.
struct Workspace {
  std::size_t n, d, classes;
  bool multiclass;
  std::vector<double> z;  // n x (d+1), bias last
  std::vector<double> mean, sd;
  std::vector<int> y;
  std::vector<char> herr;
  std::size_t cap;  // allowed deferrals

  std::span<const double> row(std::size_t i) const { return {z.data() + i * (d + 1), d + 1}; }
};

Workspace make_workspace(const MilpProblem& p) {
  Workspace w{p.n, p.d, static_cast<std::size_t>(p.num_classes), p.multiclass_form, {}, {}, {}, p.labels, {}, p.n};
  w.mean.assign(p.d, 0.0);
  w.sd.assign(p.d, 0.0);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.d; ++j) w.mean[j] += p.point(i)[j];
  for (double& m : w.mean) m /= static_cast<double>(p.n);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.d; ++j) w.sd[j] += std::pow(p.point(i)[j] - w.mean[j], 2);
  for (double& s : w.sd) {
    s = std::sqrt(s / static_cast<double>(p.n));
    if (!(s > 1e-12)) s = 1.0;
  }
  w.z.resize(p.n * (p.d + 1));
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t j = 0; j < p.d; ++j) w.z[i * (p.d + 1) + j] = (p.point(i)[j] - w.mean[j]) / w.sd[j];
    w.z[i * (p.d + 1) + p.d] = 1.0;
  }
  for (std::size_t i = 0; i < p.n; ++i) w.herr.push_back(p.human_wrong(i));
  if (p.coverage_beta) w.cap = static_cast<std::size_t>(std::floor(*p.coverage_beta * static_cast<double>(p.n) + 1e-9));
  return w;
}

std::vector<double> to_normalized(const Workspace& w, const std::vector<double>& v) {
  std::vector<double> out(w.d + 1);
  double bias = v[w.d];
  for (std::size_t j = 0; j < w.d; ++j) {
    out[j] = v[j] / w.sd[j];
    bias -= v[j] * w.mean[j] / w.sd[j];
  }
  out[w.d] = bias;
  return out;
}

std::vector<double> to_standard(const Workspace& w, const std::vector<double>& v) {
  std::vector<double> out(w.d + 1);
  double bias = v[w.d];
  for (std::size_t j = 0; j < w.d; ++j) {
    out[j] = v[j] * w.sd[j];
    bias += v[j] * w.mean[j];
  }
  out[w.d] = bias;
  return out;
}

HalfspacePair pair_to_normalized(const Workspace& w, const HalfspacePair& s) {
  HalfspacePair out;
  for (const auto& row : s.classifier) out.classifier.push_back(to_normalized(w, row));
  out.rejector = to_normalized(w, s.rejector);
  return out;
}

HalfspacePair pair_to_standard(const Workspace& w, const HalfspacePair& s) {
  HalfspacePair out;
  for (const auto& row : s.classifier) out.classifier.push_back(to_standard(w, row));
  out.rejector = to_standard(w, s.rejector);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// Scores and decisions of a pair on the workspace, kept in sync by the line search.
struct State {
  std::vector<double> scores;  // n x rows
  std::vector<double> rej;     // n
  std::vector<int> pred;
  std::vector<char> defer;
  std::size_t rows;
};

int predict(const Workspace&, const double* s, std::size_t rows) {
  if (rows == 1) return s[0] > 0.0 ? 1 : 0;
  return static_cast<int>(argmax_lowest(std::span<const double>(s, rows)));
}

State make_state(const Workspace& w, const HalfspacePair& pair) {
  State st;
  st.rows = pair.classifier.size();
  st.scores.resize(w.n * st.rows);
  st.rej.resize(w.n);
  st.pred.resize(w.n);
  st.defer.resize(w.n);
  for (std::size_t i = 0; i < w.n; ++i) {
    for (std::size_t k = 0; k < st.rows; ++k) st.scores[i * st.rows + k] = dot(pair.classifier[k], w.row(i));
    st.rej[i] = dot(pair.rejector, w.row(i));
    st.pred[i] = predict(w, &st.scores[i * st.rows], st.rows);
    st.defer[i] = st.rej[i] >= 0.0;
  }
  return st;
}

double penalty(const Workspace& w, std::size_t deferred) {
  return deferred > w.cap ? 2.0 * static_cast<double>(deferred - w.cap) : 0.0;
}

double state_cost(const Workspace& w, const State& st) {
  double c = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < w.n; ++i) {
    cnt += st.defer[i];
    c += st.defer[i] ? w.herr[i] : (st.pred[i] != w.y[i]);
  }
  return c + penalty(w, cnt);
}

struct Event {
  double t;
  std::size_t i;
  double delta_cost;
  int delta_count;
};

// Best step t along a direction given per-point flip events, ordered by t.
// base: cost at t -> -inf. Returns the chosen t, or 0 when no strict gain.
double best_step(std::vector<Event>& ev, double base_cost, std::size_t base_count, const Workspace& w,
                 double current_cost) {
  if (ev.empty()) return 0.0;
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  double cost = base_cost;
  long long cnt = static_cast<long long>(base_count);
  auto total = [&]() { return cost + penalty(w, static_cast<std::size_t>(std::max(0LL, cnt))); };
  double best = total();
  double best_t = ev.front().t - 1.0;
  double best_width = kInf;
  std::size_t k = 0;
  while (k < ev.size()) {
    const double t0 = ev[k].t;
    while (k < ev.size() && ev[k].t == t0) {
      cost += ev[k].delta_cost;
      cnt += ev[k].delta_count;
      ++k;
    }
    const double t1 = k < ev.size() ? ev[k].t : kInf;
    const double width = t1 - t0;
    const double c = total();
    if (c < best - 1e-9 || (c <= best + 1e-9 && width > best_width)) {
      best = c;
      best_width = width;
      best_t = t1 < kInf ? 0.5 * (t0 + t1) : t0 + 1.0;
    }
  }
  return best < current_cost - 1e-9 ? best_t : 0.0;
}

// Line search along a direction in classifier row `row`.
bool move_classifier(const Workspace& w, HalfspacePair& pair, State& st, std::size_t row,
                     const std::vector<double>& dir, double& cost) {
  std::vector<double> u(w.n);
  for (std::size_t i = 0; i < w.n; ++i) u[i] = dot(dir, w.row(i));
  std::vector<Event> ev;
  double base = 0.0;
  std::size_t cnt = 0;
  const std::size_t R = st.rows;
  for (std::size_t i = 0; i < w.n; ++i) {
    cnt += st.defer[i];
    if (st.defer[i]) {
      base += w.herr[i];
      continue;
    }
    const double* s = &st.scores[i * R];
    if (R == 1) {
      if (u[i] == 0.0) {
        base += st.pred[i] != w.y[i];
        continue;
      }
      const int at_minus = u[i] > 0 ? 0 : 1;
      const double e_minus = at_minus != w.y[i];
      base += e_minus;
      ev.push_back({-s[0] / u[i], i, (1.0 - e_minus) - e_minus, 0});
    } else {
      double other = -kInf;
      std::size_t other_k = 0;
      for (std::size_t k = 0; k < R; ++k)
        if (k != row && s[k] > other) {
          other = s[k];
          other_k = k;
        }
      if (u[i] == 0.0) {
        base += st.pred[i] != w.y[i];
        continue;
      }
      const int lose = static_cast<int>(other_k);
      const int win = static_cast<int>(row);
      const int at_minus = u[i] > 0 ? lose : win;
      const int at_plus = u[i] > 0 ? win : lose;
      const double e_minus = at_minus != w.y[i];
      base += e_minus;
      ev.push_back({(other - s[row]) / u[i], i, (at_plus != w.y[i]) - e_minus, 0});
    }
  }
  const double t = best_step(ev, base, cnt, w, cost);
  if (t == 0.0) return false;
  for (std::size_t j = 0; j <= w.d; ++j) pair.classifier[row][j] += t * dir[j];
  for (std::size_t i = 0; i < w.n; ++i) {
    st.scores[i * R + row] += t * u[i];
    st.pred[i] = predict(w, &st.scores[i * R], R);
  }
  cost = state_cost(w, st);
  return true;
}

bool move_rejector(const Workspace& w, HalfspacePair& pair, State& st, const std::vector<double>& dir,
                   double& cost) {
  std::vector<double> u(w.n);
  for (std::size_t i = 0; i < w.n; ++i) u[i] = dot(dir, w.row(i));
  std::vector<Event> ev;
  double base = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < w.n; ++i) {
    const double clf = st.pred[i] != w.y[i];
    const double hum = w.herr[i];
    if (u[i] == 0.0) {
      base += st.defer[i] ? hum : clf;
      cnt += st.defer[i];
      continue;
    }
    // Deferred iff rej + t u >= 0.
    const bool defer_minus = u[i] < 0;
    base += defer_minus ? hum : clf;
    cnt += defer_minus;
    const double dc = defer_minus ? clf - hum : hum - clf;
    ev.push_back({-st.rej[i] / u[i], i, dc, defer_minus ? -1 : 1});
  }
  const double t = best_step(ev, base, cnt, w, cost);
  if (t == 0.0) return false;
  for (std::size_t j = 0; j <= w.d; ++j) pair.rejector[j] += t * dir[j];
  for (std::size_t i = 0; i < w.n; ++i) {
    st.rej[i] += t * u[i];
    st.defer[i] = st.rej[i] >= 0.0;
  }
  cost = state_cost(w, st);
  return true;
}

void renormalize(HalfspacePair& pair, State& st) {
  // Common scale across classifier rows keeps the argmax.
  double m = 0.0;
  for (const auto& row : pair.classifier)
    for (double v : row) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    for (auto& row : pair.classifier)
      for (double& v : row) v /= m;
    for (double& s : st.scores) s /= m;
  }
  double r = 0.0;
  for (double v : pair.rejector) r = std::max(r, std::abs(v));
  if (r > 0.0) {
    for (double& v : pair.rejector) v /= r;
    for (double& s : st.rej) s /= r;
  }
}

std::vector<double> unit(std::size_t dim, std::size_t j) {
  std::vector<double> e(dim, 0.0);
  e[j] = 1.0;
  return e;
}

std::vector<double> gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

// Polishes a standardized-coordinate pair; returns its cost (in points).
double polish_standard(const Workspace& w, HalfspacePair& pair, Rng& rng, int rounds, const Deadline& deadline) {
  State st = make_state(w, pair);
  double cost = state_cost(w, st);
  HalfspacePair best_pair = pair;
  double best_cost = cost;
  const std::size_t dim = w.d + 1;
  int stale = 0;
  for (int round = 0; round < rounds && !expired(deadline) && best_cost > 0.0; ++round) {
    bool improved = false;
    for (std::size_t k = 0; k < st.rows; ++k)
      for (std::size_t j = 0; j < dim; ++j) improved |= move_classifier(w, pair, st, k, unit(dim, j), cost);
    for (std::size_t j = 0; j < dim; ++j) improved |= move_rejector(w, pair, st, unit(dim, j), cost);
    for (int r = 0; r < 8; ++r) {
      improved |= move_classifier(w, pair, st, rng.uniform_index(st.rows), gaussian(rng, dim), cost);
      improved |= move_rejector(w, pair, st, gaussian(rng, dim), cost);
    }
    renormalize(pair, st);
    if (cost < best_cost) {
      best_cost = cost;
      best_pair = pair;
      stale = 0;
    } else if (!improved || ++stale > 2) {
      // Kick: perturb from the best pair and keep searching.
      pair = best_pair;
      const double scale = 0.3;
      for (auto& row : pair.classifier)
        for (double& v : row) v += scale * rng.normal();
      for (double& v : pair.rejector) v += scale * rng.normal();
      st = make_state(w, pair);
      cost = state_cost(w, st);
      stale = 0;
    }
  }
  pair = best_pair;
  return best_cost;
}

// Adam on the smoothed objective -log(P(classifier right) P(keep) + P(human right) P(defer)).
HalfspacePair smoothed_descent(const Workspace& w, Rng& rng, int epochs, bool random_init, const Deadline& deadline) {
  const std::size_t dim = w.d + 1;
  const std::size_t rows = w.multiclass ? w.classes : 1;
  const std::size_t np = (rows + 1) * dim;
  std::vector<double> theta(np, 0.0), m(np, 0.0), v(np, 0.0), g(np);
  if (random_init)
    for (double& t : theta) t = 0.5 * rng.normal();
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> s(rows), gs(rows);
  for (int epoch = 1; epoch <= epochs && !expired(deadline); ++epoch) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < w.n; ++i) {
      auto x = w.row(i);
      for (std::size_t k = 0; k < rows; ++k) s[k] = dot(std::span<const double>(&theta[k * dim], dim), x);
      const double b = dot(std::span<const double>(&theta[rows * dim], dim), x);
      // log p and its gradient wrt the class scores.
      double logp;
      if (rows == 1) {
        const double a = w.y[i] == 1 ? s[0] : -s[0];
        logp = log_sigmoid(a);
        gs[0] = (w.y[i] == 1 ? 1.0 : -1.0) * (1.0 - sigmoid(a));
      } else {
        double mx = *std::max_element(s.begin(), s.end()), sum = 0.0;
        for (std::size_t k = 0; k < rows; ++k) sum += std::exp(s[k] - mx);
        logp = s[w.y[i]] - mx - std::log(sum);
        for (std::size_t k = 0; k < rows; ++k)
          gs[k] = (k == static_cast<std::size_t>(w.y[i]) ? 1.0 : 0.0) - std::exp(s[k] - mx) / sum;
      }
      const double log_keep = log_sigmoid(-b), log_defer = log_sigmoid(b);
      double wa, db;  // weight on dlogp, derivative wrt b of log Z
      if (w.herr[i]) {
        wa = 1.0;
        db = -sigmoid(b);
      } else {
        const double la = logp + log_keep;
        const double mx = std::max(la, log_defer);
        const double logz = mx + std::log(std::exp(la - mx) + std::exp(log_defer - mx));
        const double pa = std::exp(la - logz);  // share of the classifier branch
        wa = pa;
        const double q = sigmoid(b);
        db = pa * (-q) + (1.0 - pa) * (1.0 - q);
      }
      for (std::size_t k = 0; k < rows; ++k)
        for (std::size_t j = 0; j < dim; ++j) g[k * dim + j] -= wa * gs[k] * x[j];
      for (std::size_t j = 0; j < dim; ++j) g[rows * dim + j] -= db * x[j];
    }
    const double inv_n = 1.0 / static_cast<double>(w.n);
    const double c1 = 1.0 - std::pow(b1, epoch), c2 = 1.0 - std::pow(b2, epoch);
    for (std::size_t k = 0; k < np; ++k) {
      const double gk = g[k] * inv_n;
      m[k] = b1 * m[k] + (1 - b1) * gk;
      v[k] = b2 * v[k] + (1 - b2) * gk * gk;
      theta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
  HalfspacePair pair;
  for (std::size_t k = 0; k < rows; ++k) pair.classifier.emplace_back(theta.begin() + k * dim, theta.begin() + (k + 1) * dim);
  pair.rejector.assign(theta.begin() + rows * dim, theta.end());
  return pair;
}

// Weighted logistic (rows == 1) or softmax regression by full-batch Adam.
std::vector<std::vector<double>> fit_linear(const Workspace& w, const std::vector<int>& target,
                                            const std::vector<double>& weight, std::size_t rows,
                                            std::vector<std::vector<double>> theta, int epochs,
                                            const Deadline& deadline) {
  const std::size_t dim = w.d + 1;
  std::vector<std::vector<double>> m(rows, std::vector<double>(dim, 0.0)), v = m, g = m;
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, l2 = 1e-4;
  double wsum = 0.0;
  for (double x : weight) wsum += x;
  if (wsum <= 0.0) return theta;
  std::vector<double> s(rows);
  for (int epoch = 1; epoch <= epochs && !expired(deadline); ++epoch) {
    for (auto& row : g) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t i = 0; i < w.n; ++i) {
      if (weight[i] == 0.0) continue;
      auto x = w.row(i);
      if (rows == 1) {
        const double z = dot(theta[0], x);
        const double r = (sigmoid(z) - (target[i] == 1 ? 1.0 : 0.0)) * weight[i];
        for (std::size_t j = 0; j < dim; ++j) g[0][j] += r * x[j];
      } else {
        for (std::size_t k = 0; k < rows; ++k) s[k] = dot(theta[k], x);
        const double mx = *std::max_element(s.begin(), s.end());
        double sum = 0.0;
        for (double& e : s) sum += (e = std::exp(e - mx));
        for (std::size_t k = 0; k < rows; ++k) {
          const double r = (s[k] / sum - (static_cast<int>(k) == target[i] ? 1.0 : 0.0)) * weight[i];
          for (std::size_t j = 0; j < dim; ++j) g[k][j] += r * x[j];
        }
      }
    }
    const double c1 = 1.0 - std::pow(b1, epoch), c2 = 1.0 - std::pow(b2, epoch);
    for (std::size_t k = 0; k < rows; ++k)
      for (std::size_t j = 0; j < dim; ++j) {
        const double gk = g[k][j] / wsum + l2 * theta[k][j];
        m[k][j] = b1 * m[k][j] + (1 - b1) * gk;
        v[k][j] = b2 * v[k][j] + (1 - b2) * gk * gk;
        theta[k][j] -= lr * (m[k][j] / c1) / (std::sqrt(v[k][j] / c2) + eps);
      }
  }
  return theta;
}

// Continuation on the expected 0-1 loss with sigmoid-smoothed decisions whose
// sharpness grows stage by stage; rows are kept at unit norm. Returns the
// best 0-1 state seen.
double sharpen(const Workspace& w, HalfspacePair& pair, int steps_per_stage, const Deadline& deadline) {
  const std::size_t dim = w.d + 1;
  const std::size_t rows = pair.classifier.size();
  auto unit_norm = [](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& x : v) x /= s;
  };
  auto unit_rows = [&](std::vector<std::vector<double>>& m) {
    double s = 0.0;
    for (const auto& r : m)
      for (double x : r) s += x * x;
    s = std::sqrt(s);
    if (s > 0.0)
      for (auto& r : m)
        for (double& x : r) x /= s;
  };
  unit_rows(pair.classifier);
  unit_norm(pair.rejector);
  HalfspacePair best = pair;
  double best_cost = state_cost(w, make_state(w, pair));
  std::vector<std::vector<double>> gm(rows, std::vector<double>(dim)), mm(rows, std::vector<double>(dim, 0.0)),
      vm = mm;
  std::vector<double> gr(dim), mr(dim, 0.0), vr(dim, 0.0), sc(rows);
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t = 0;
  for (double k : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
    for (int step = 0; step < steps_per_stage && !expired(deadline); ++step) {
      ++t;
      for (auto& r : gm) std::fill(r.begin(), r.end(), 0.0);
      std::fill(gr.begin(), gr.end(), 0.0);
      for (std::size_t i = 0; i < w.n; ++i) {
        auto x = w.row(i);
        const double q = sigmoid(k * dot(pair.rejector, x));
        double p;
        if (rows == 1) {
          const double yy = w.y[i] == 1 ? 1.0 : -1.0;
          p = sigmoid(k * yy * dot(pair.classifier[0], x));
          const double c = -(1.0 - q) * p * (1.0 - p) * k * yy;
          for (std::size_t j = 0; j < dim; ++j) gm[0][j] += c * x[j];
        } else {
          for (std::size_t r = 0; r < rows; ++r) sc[r] = k * dot(pair.classifier[r], x);
          const double mx = *std::max_element(sc.begin(), sc.end());
          double sum = 0.0;
          for (double& e : sc) sum += (e = std::exp(e - mx));
          p = sc[w.y[i]] / sum;
          for (std::size_t r = 0; r < rows; ++r) {
            const double dp = p * ((static_cast<int>(r) == w.y[i] ? 1.0 : 0.0) - sc[r] / sum) * k;
            const double c = -(1.0 - q) * dp;
            for (std::size_t j = 0; j < dim; ++j) gm[r][j] += c * x[j];
          }
        }
        const double cq = (-(1.0 - p) + w.herr[i]) * q * (1.0 - q) * k;
        for (std::size_t j = 0; j < dim; ++j) gr[j] += cq * x[j];
      }
      const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
      auto adam = [&](double g, double& m, double& v, double& th) {
        g /= static_cast<double>(w.n);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        th -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
      };
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < dim; ++j) adam(gm[r][j], mm[r][j], vm[r][j], pair.classifier[r][j]);
      for (std::size_t j = 0; j < dim; ++j) adam(gr[j], mr[j], vr[j], pair.rejector[j]);
      unit_rows(pair.classifier);
      unit_norm(pair.rejector);
      const double c = state_cost(w, make_state(w, pair));
      if (c < best_cost) {
        best_cost = c;
        best = pair;
      }
    }
  }
  pair = best;
  return best_cost;
}

// Classifier on the kept points, rejector on the points where exactly one of
// classifier and human is right, alternated and polished.
HalfspacePair alternating_fit(const Workspace& w, Rng& rng, int iterations, int polish_rounds,
                              const Deadline& deadline) {
  const std::size_t dim = w.d + 1;
  const std::size_t rows = w.multiclass ? w.classes : 1;
  HalfspacePair pair;
  pair.classifier.assign(rows, std::vector<double>(dim, 0.0));
  pair.rejector.assign(dim, 0.0);
  pair.rejector[w.d] = -1.0;
  std::vector<double> weight(w.n, 1.0);
  double best_cost = kInf;
  HalfspacePair best;
  for (int it = 0; it < iterations && !expired(deadline); ++it) {
    State st = make_state(w, pair);
    for (std::size_t i = 0; i < w.n; ++i) weight[i] = st.defer[i] ? 0.05 : 1.0;
    pair.classifier = fit_linear(w, w.y, weight, rows, pair.classifier, 300, deadline);
    st = make_state(w, pair);
    std::vector<int> target(w.n, 0);
    for (std::size_t i = 0; i < w.n; ++i) {
      const bool clf_ok = st.pred[i] == w.y[i], hum_ok = !w.herr[i];
      weight[i] = clf_ok != hum_ok ? 1.0 : 0.0;
      target[i] = hum_ok ? 1 : 0;
    }
    pair.rejector = fit_linear(w, target, weight, 1, {pair.rejector}, 300, deadline)[0];
    sharpen(w, pair, kSharpenSteps, deadline);
    double cost = polish_standard(w, pair, rng, polish_rounds, deadline);
    if (cost < best_cost) {
      best_cost = cost;
      best = pair;
    }
    if (cost == 0.0) break;
  }
  return best_cost < kInf ? best : pair;
}

std::vector<HalfspacePair> trivial_pairs(const Workspace& w) {
  const std::size_t dim = w.d + 1;
  const std::size_t rows = w.multiclass ? w.classes : 1;
  std::vector<HalfspacePair> out;
  auto constant_label = [&](std::size_t label) {
    HalfspacePair p;
    for (std::size_t k = 0; k < rows; ++k) {
      std::vector<double> row(dim, 0.0);
      if (rows == 1) row[w.d] = label == 1 ? 1.0 : -1.0;
      else row[w.d] = k == label ? 1.0 : -static_cast<double>(k + 1) / static_cast<double>(rows + 1);
      p.classifier.push_back(row);
    }
    return p;
  };
  HalfspacePair all = constant_label(0);
  all.rejector = unit(dim, w.d);
  out.push_back(all);
  for (std::size_t c = 0; c < std::max<std::size_t>(rows, 2); ++c) {
    HalfspacePair p = constant_label(c);
    p.rejector.assign(dim, 0.0);
    p.rejector[w.d] = -1.0;
    out.push_back(p);
  }
  return out;
}

}  // namespace

double penalized_loss(const MilpProblem& problem, const HalfspacePair& pair) {
  std::size_t errors = 0, deferred = 0;
  for (std::size_t i = 0; i < problem.n; ++i) {
    auto x = problem.point(i);
    const bool defer = dot(pair.rejector, x) >= 0.0;
    int label;
    if (pair.classifier.size() == 1) {
      label = dot(pair.classifier[0], x) > 0.0 ? 1 : 0;
    } else {
      std::vector<double> s;
      for (const auto& row : pair.classifier) s.push_back(dot(row, x));
      label = static_cast<int>(argmax_lowest(s));
    }
    deferred += defer;
    errors += defer ? problem.human_wrong(i) : label != problem.labels[i];
  }
  double pen = 0.0;
  if (problem.coverage_beta) {
    auto cap = static_cast<std::size_t>(std::floor(*problem.coverage_beta * static_cast<double>(problem.n) + 1e-9));
    if (deferred > cap) pen = 2.0 * static_cast<double>(deferred - cap);
  }
  return (static_cast<double>(errors) + pen) / static_cast<double>(problem.n);
}

void polish_pair(const MilpProblem& problem, HalfspacePair& normalized, std::uint64_t seed, int rounds,
                 std::optional<std::chrono::steady_clock::time_point> deadline) {
  Workspace w = make_workspace(problem);
  Rng rng(seed, Stream::Heuristic);
  HalfspacePair st = pair_to_standard(w, normalized);
  polish_standard(w, st, rng, rounds, deadline);
  HalfspacePair back = pair_to_normalized(w, st);
  if (penalized_loss(problem, back) <= penalized_loss(problem, normalized)) normalized = std::move(back);
}

std::vector<HalfspacePair> heuristic_pairs(const MilpProblem& problem, const HeuristicOptions& options) {
  Workspace w = make_workspace(problem);
  std::vector<HalfspacePair> found;
  for (const auto& t : trivial_pairs(w)) found.push_back(pair_to_normalized(w, t));
  Rng rng(options.seed, Stream::Heuristic);
  {
    HalfspacePair alt = alternating_fit(w, rng, 2, options.polish_rounds, options.deadline);
    found.push_back(pair_to_normalized(w, alt));
  }
  for (int r = 0; r < options.restarts && !expired(options.deadline); ++r) {
    HalfspacePair pair = smoothed_descent(w, rng, options.descent_epochs, r > 0, options.deadline);
    HalfspacePair smooth = pair_to_normalized(w, pair);
    found.push_back(smooth);
    if (penalized_loss(problem, smooth) > 0.0) sharpen(w, pair, kSharpenSteps, options.deadline);
    polish_standard(w, pair, rng, options.polish_rounds, options.deadline);
    found.push_back(pair_to_normalized(w, pair));
    if (penalized_loss(problem, found.back()) == 0.0) break;
  }
  std::vector<double> cost;
  for (const auto& p : found) cost.push_back(penalized_loss(problem, p));
  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
  std::vector<HalfspacePair> out;
  for (std::size_t k : order) out.push_back(std::move(found[k]));
  return out;
}

}  // namespace deferlab
