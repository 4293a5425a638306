#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "deferlab/core.hpp"

namespace deferlab::oracle {

// Every dichotomy of 2-D points realisable by a line: for each point pair take
// the line through both, both orientations, and all four side assignments of
// the two points themselves; plus the two constant labelings. Exhaustive for
// points in general position. Bit i set = point i on the positive side.
inline std::vector<std::uint32_t> line_dichotomies(const DeferDataset& data) {
  const std::size_t n = data.size();
  std::set<std::uint32_t> out{0u, (n >= 32 ? ~0u : (1u << n) - 1u)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      auto pi = data.row(i), pj = data.row(j);
      const double wx = -(pj[1] - pi[1]), wy = pj[0] - pi[0];
      const double b = -(wx * pi[0] + wy * pi[1]);
      std::uint32_t pos = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        auto pk = data.row(k);
        if (wx * pk[0] + wy * pk[1] + b > 0) pos |= 1u << k;
      }
      std::uint32_t others = 0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i && k != j) others |= 1u << k;
      for (std::uint32_t flip : {0u, 1u}) {
        std::uint32_t base = flip ? (~pos & others) : pos;
        for (std::uint32_t a = 0; a < 4; ++a)
          out.insert(base | ((a & 1u) << i) | (((a >> 1) & 1u) << j));
      }
    }
  return {out.begin(), out.end()};
}

// Minimum number of 0-1 system errors over all halfspace pairs on a binary
// 2-D dataset, optionally with at most max_deferrals deferred points.
inline int brute_force_min_errors(const DeferDataset& data, int max_deferrals = -1) {
  const std::size_t n = data.size();
  const auto dich = line_dichotomies(data);
  std::uint32_t ones = 0, herr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (data.label(i) == 1) ones |= 1u << i;
    if (!data.human_correct(i)) herr |= 1u << i;
  }
  int best = static_cast<int>(n) + 1;
  for (std::uint32_t r : dich) {
    if (max_deferrals >= 0 && std::popcount(r) > max_deferrals) continue;
    const int human = std::popcount(r & herr);
    for (std::uint32_t c : dich) {
      const int e = human + std::popcount((c ^ ones) & ~r & ((n >= 32 ? ~0u : (1u << n) - 1u)));
      if (e < best) best = e;
    }
  }
  return best;
}

}  // namespace deferlab::oracle

namespace deferlab::oracle {

// Expected 0-1 system loss of scores under the rule "defer iff g_defer is
// strictly the largest, else argmax over classes with uniform random ties".
inline double expected_loss_uniform_ties(const std::vector<double>& g, int y, bool human_correct) {
  const std::size_t classes = g.size() - 1;
  double mx = g[0];
  for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, g[k]);
  if (g[classes] > mx) return human_correct ? 0.0 : 1.0;
  int ties = 0;
  bool has_y = false;
  for (std::size_t k = 0; k < classes; ++k)
    if (g[k] == mx) {
      ++ties;
      has_y = has_y || static_cast<int>(k) == y;
    }
  return has_y ? 1.0 - 1.0 / ties : 1.0;
}

// Four-region distribution with masses 1/4+a, 1/4, 1/4-a, 1/4, labels 0,1,0,2,
// human correct only on region 0. Scores for region r under a choice of which
// region indicator feeds each output (classes 0..2, then defer).
struct FourRegion {
  double mass_shift;
  double mass(int r) const { return r == 0 ? 0.25 + mass_shift : r == 2 ? 0.25 - mass_shift : 0.25; }
  static int label(int r) { return r == 1 ? 1 : r == 3 ? 2 : 0; }
  static bool human_correct(int r) { return r == 0; }
  static std::vector<double> scores(const int (&idx)[4], double c, int r) {
    std::vector<double> g(4);
    for (int k = 0; k < 4; ++k) g[k] = idx[k] == r ? c : 0.0;
    return g;
  }
};

// Closed form of E[L_CE(f*)] - E[L_CE(f_hat)] for the construction above.
inline double four_region_ce_gap(double a, double c) {
  return 0.25 * (8 * a * c - 2 * std::log(4.0) - 2 * (1 + 4 * a) * std::log1p(std::exp(c)) +
                 (3 + 4 * a) * std::log(3 + std::exp(c)));
}

}  // namespace deferlab::oracle
