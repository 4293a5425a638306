#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "deferlab/milp.hpp"

namespace deferlab {
namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  std::size_t id;
  std::size_t depth;
  double bound;
  std::vector<std::pair<std::size_t, double>> fixed;  // binary var -> 0/1
};

// Best bound first; among equal bounds the deeper node, then the older one.
struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.depth != b.depth) return a.depth > b.depth;
    return a.id < b.id;
  }
};

LpSolution solve_node(const MilpProblem& p, const Node& node, const SimplexOptions& opts) {
  LinearProgram lp = p.lp_relaxation;
  for (auto [var, value] : node.fixed) lp.set_bounds(var, value, value);
  return solve_lp(lp, opts);
}

class Search {
 public:
  Search(const MilpProblem& p, const MilpConfig& cfg) : p_(p), cfg_(cfg), start_(Clock::now()) {
    if (cfg.time_limit_s) deadline_ = start_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*cfg.time_limit_s));
    gap_ = cfg.gap_for(p.n);
  }

  MilpSolution run();

 private:
  bool out_of_time() const { return deadline_ && Clock::now() >= *deadline_; }
  void offer(const std::vector<double>& x, double objective);
  void offer_pair(const HalfspacePair& normalized);
  double global_bound() const {
    double b = std::min(pruned_min_, incumbent_);
    if (!open_.empty()) b = std::min(b, open_.begin()->bound);
    return b;
  }
  void record() {
    solution_.bound_history.push_back(global_bound());
    solution_.incumbent_history.push_back(incumbent_);
  }
  void process(const Node& node, const LpSolution& lp);

  const MilpProblem& p_;
  const MilpConfig& cfg_;
  Clock::time_point start_;
  std::optional<Clock::time_point> deadline_;
  double gap_;
  double incumbent_ = kInf;
  std::vector<double> best_x_;
  double pruned_min_ = kInf;
  std::set<Node, NodeOrder> open_;
  std::size_t next_id_ = 0;
  bool stopped_ = false;
  MilpSolution solution_;
};

void Search::offer(const std::vector<double>& x, double objective) {
  if (objective < incumbent_ - 1e-12) {
    incumbent_ = objective;
    best_x_ = x;
  }
}

void Search::offer_pair(const HalfspacePair& normalized) {
  if (auto x = pair_to_solution(p_, normalized)) offer(*x, p_.lp_relaxation.objective(*x));
}

void Search::process(const Node& node, const LpSolution& lp) {
  ++solution_.nodes_explored;
  solution_.lp_iterations += lp.iterations;
  if (lp.status == LpStatus::Infeasible) return;
  if (lp.status == LpStatus::TimeLimit) {
    stopped_ = true;
    open_.insert(node);
    return;
  }
  double bound = node.bound;
  std::size_t branch_var = 0;
  bool have_branch = false;
  if (lp.status == LpStatus::Optimal) {
    bound = std::max(bound, lp.objective_value);
    offer_pair(normalized_pair(p_, lp.x));
    if (bound >= incumbent_ - gap_) {
      pruned_min_ = std::min(pruned_min_, bound);
      return;
    }
    double best_frac = -1.0;
    for (std::size_t id : p_.binary_var_ids) {
      const double f = lp.x[id] - std::floor(lp.x[id]);
      const double dist = std::min(f, 1.0 - f);
      if (dist > kIntegralityTol && dist > best_frac + 1e-12) {
        best_frac = dist;
        branch_var = id;
        have_branch = true;
      }
    }
    if (!have_branch) {
      std::vector<double> x = lp.x;
      for (std::size_t id : p_.binary_var_ids) x[id] = std::round(x[id]);
      if (p_.lp_relaxation.max_violation(x) <= 1e-7) offer(x, p_.lp_relaxation.objective(x));
      else offer(lp.x, lp.objective_value);
      return;
    }
  } else {
    // Unresolved relaxation (iteration limit): split on the first free binary.
    std::vector<char> is_fixed(p_.lp_relaxation.num_vars(), 0);
    for (auto [var, value] : node.fixed) is_fixed[var] = 1;
    for (std::size_t id : p_.binary_var_ids)
      if (!is_fixed[id]) {
        branch_var = id;
        have_branch = true;
        break;
      }
    if (!have_branch) return;
  }
  const double toward = lp.status == LpStatus::Optimal && lp.x[branch_var] >= 0.5 ? 1.0 : 0.0;
  for (double value : {toward, 1.0 - toward}) {
    Node child{next_id_++, node.depth + 1, bound, node.fixed};
    child.fixed.emplace_back(branch_var, value);
    if (child.bound < incumbent_ - gap_) open_.insert(std::move(child));
    else pruned_min_ = std::min(pruned_min_, child.bound);
  }
}

MilpSolution Search::run() {
  const LinearProgram& lp = p_.lp_relaxation;
  double trivial = 0.0;
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    const double c = lp.cost()[j];
    if (c > 0.0) trivial += c * lp.lower()[j];
    else if (c < 0.0) trivial += c * lp.upper()[j];
  }
  if (!std::isfinite(trivial)) trivial = -kInf;

  if (cfg_.heuristics) {
    HeuristicOptions ho;
    ho.seed = cfg_.seed;
    if (deadline_) ho.deadline = start_ + (*deadline_ - start_) / 2;
    for (const auto& pair : heuristic_pairs(p_, ho)) {
      offer_pair(pair);
      if (incumbent_ <= trivial + gap_) break;
    }
  }

  open_.insert(Node{next_id_++, 0, trivial, {}});
  std::map<std::size_t, LpSolution> cache;
  const unsigned threads = std::max(1u, cfg_.threads);
  bool root_done = false;
  while (!open_.empty()) {
    record();
    if (open_.begin()->bound >= incumbent_ - gap_) {
      pruned_min_ = std::min(pruned_min_, open_.begin()->bound);
      open_.clear();
      break;
    }
    if (out_of_time() || (cfg_.node_limit && solution_.nodes_explored >= cfg_.node_limit)) {
      stopped_ = true;
      break;
    }
    SimplexOptions opts;
    opts.deadline = deadline_;

    std::vector<Node> batch;
    for (auto it = open_.begin(); it != open_.end() && batch.size() < threads; ++it) batch.push_back(*it);
    if (threads > 1) {
      std::vector<std::thread> pool;
      std::vector<LpSolution> results(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k)
        if (!cache.count(batch[k].id))
          pool.emplace_back([&, k] { results[k] = solve_node(p_, batch[k], opts); });
      for (auto& t : pool) t.join();
      for (std::size_t k = 0; k < batch.size(); ++k)
        if (!cache.count(batch[k].id)) cache.emplace(batch[k].id, std::move(results[k]));
    }
    // Deterministic mode consumes only the head and re-reads the queue, so the
    // node order matches a single-threaded run; speculative results wait in the cache.
    const std::size_t take = cfg_.deterministic ? 1 : batch.size();
    for (std::size_t k = 0; k < take && !stopped_; ++k) {
      Node node = batch[k];
      auto it = open_.find(node);
      if (it == open_.end()) continue;
      open_.erase(it);
      if (node.bound >= incumbent_ - gap_) {
        pruned_min_ = std::min(pruned_min_, node.bound);
        cache.erase(node.id);
        continue;
      }
      LpSolution sol;
      if (auto c = cache.find(node.id); c != cache.end()) {
        sol = std::move(c->second);
        cache.erase(c);
      } else {
        sol = solve_node(p_, node, opts);
      }
      if (!root_done && sol.status == LpStatus::Optimal && cfg_.heuristics) {
        HalfspacePair rounded = normalized_pair(p_, sol.x);
        polish_pair(p_, rounded, cfg_.seed, 10, deadline_);
        offer_pair(rounded);
      }
      root_done = true;
      process(node, sol);
    }
    if (stopped_) break;
  }
  record();

  solution_.best_bound = std::min(global_bound(), incumbent_);
  const bool have = std::isfinite(incumbent_);
  if (stopped_ && !open_.empty())
    solution_.status = have ? MilpStatus::TimeLimitIncumbent : MilpStatus::TimeLimitNoSolution;
  else
    solution_.status = have ? MilpStatus::ProvenOptimal : MilpStatus::Infeasible;
  if (have) {
    solution_.x = best_x_;
    solution_.objective = incumbent_;
    solution_.pair = extract_pair(p_, best_x_);
    auto dec = decide_halfspace(solution_.pair, p_.original);
    solution_.train_loss = system_loss_01(p_.original, dec);
  }
  solution_.wall_time_s = std::chrono::duration<double>(Clock::now() - start_).count();
  return solution_;
}

}  // namespace

const char* to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::ProvenOptimal: return "proven_optimal";
    case MilpStatus::TimeLimitIncumbent: return "time_limit_incumbent";
    case MilpStatus::TimeLimitNoSolution: return "time_limit_no_solution";
    case MilpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

MilpSolution solve_milp(const MilpProblem& problem, const MilpConfig& config) {
  config.validate();
  return Search(problem, config).run();
}

}  // namespace deferlab
