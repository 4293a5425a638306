#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "deferlab/eval.hpp"
#include "deferlab/io.hpp"
#include "deferlab/rng.hpp"

namespace deferlab {

std::uint64_t seed_for_trial(std::uint64_t seed, std::size_t trial) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(Stream::Trial) * 0x10000 + trial));
}

TrialData make_trial_data(const BenchmarkInstance& instance, const BenchmarkOptions& options, std::size_t trial) {
  const std::uint64_t ts = seed_for_trial(options.seed, trial);
  std::size_t n = instance.kind == BenchmarkInstance::Kind::Synthetic ? instance.synthetic.n : instance.n;
  if (options.split_sizes) n = (*options.split_sizes)[0] + (*options.split_sizes)[1] + (*options.split_sizes)[2];
  DeferDataset all = [&] {
    if (instance.kind == BenchmarkInstance::Kind::Synthetic) {
      SyntheticConfig c = instance.synthetic;
      c.seed = ts;
      c.n = n;
      return generate_synthetic(c).dataset;
    }
    return generate_grouped_expert(instance.d, n, instance.num_classes, instance.expert_strength, ts, instance.grouped);
  }();
  std::size_t n_train, n_val;
  if (options.split_sizes) {
    n_train = (*options.split_sizes)[0];
    n_val = (*options.split_sizes)[1];
  } else {
    n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
    n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  }
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
    throw std::invalid_argument("split leaves an empty train, validation or test set");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(ts, Stream::Split);
  rng.shuffle(std::span<std::size_t>(order));
  auto part = [&](std::size_t begin, std::size_t end) {
    return all.subset(std::span<const std::size_t>(order).subspan(begin, end - begin));
  };
  return {part(0, n_train), part(n_train, n_train + n_val), part(n_train + n_val, n)};
}

namespace {

TrialResult run_trial(Method method, const TrialData& data, const BenchmarkOptions& options, std::size_t trial) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult r;
  r.method = method;
  r.trial = trial;
  const std::uint64_t ts = seed_for_trial(options.seed, trial);
  if (method == Method::Milp) {
    MilpConfig mc = options.milp;
    mc.seed = ts;
    const MilpProblem problem = build_milp(data.train, mc);
    const MilpSolution sol = solve_milp(problem, mc);
    r.status = to_string(sol.status);
    if (sol.status == MilpStatus::Infeasible || sol.status == MilpStatus::TimeLimitNoSolution)
      throw TrainingError(std::string("MILP returned no pair (") + r.status + ")");
    r.report = evaluate(sol.pair, data.test);
    r.train_error = sol.train_loss;
    r.curve = coverage_curve(sol.pair, data.test, options.curve_grid);
  } else {
    TrainConfig c = options.train;
    c.method = method;
    c.seed = ts;
    if (method != Method::RS && method != Method::CE) c.alpha_grid.clear();
    else if (c.alpha_grid.empty() && options.default_alpha_grids) c.alpha_grid = default_alpha_grid(method);
    const TrainedSystem sys = train_method(data.train, data.val, c);
    r.report = evaluate(sys, data.test);
    r.train_error = 1.0 - system_accuracy(sys, data.train);
    r.tau = sys.tau;
    r.alpha = sys.alpha;
    r.curve = coverage_curve(sys, data.test, options.curve_grid);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkInstance& instance, const BenchmarkOptions& options) {
  if (options.methods.empty()) throw std::invalid_argument("no methods to benchmark");
  if (options.trials == 0) throw std::invalid_argument("trials must be >= 1");
  if (options.curve_grid < 2) throw std::invalid_argument("curve grid must be at least 2");
  options.train.validate();
  options.milp.validate();
  const std::size_t m = options.methods.size();
  std::vector<std::optional<TrialData>> data(options.trials);
  std::vector<std::once_flag> data_once(options.trials);
  std::vector<TrialResult> rows(options.trials * m);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t task = next++; task < rows.size(); task = next++) {
      const std::size_t trial = task / m;
      try {
        std::call_once(data_once[trial], [&] { data[trial] = make_trial_data(instance, options, trial); });
        rows[task] = run_trial(options.methods[task % m], *data[trial], options, trial);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = rows.size();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(rows.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  BenchmarkResult result;
  result.rows = std::move(rows);
  result.summary = summarize(result.rows, options.methods);
  return result;
}

std::vector<MethodSummary> summarize(std::span<const TrialResult> rows, std::span<const Method> methods) {
  std::vector<MethodSummary> out;
  for (Method method : methods) {
    std::vector<double> acc, cov;
    for (const auto& r : rows)
      if (r.method == method) {
        acc.push_back(r.report.system_accuracy);
        cov.push_back(r.report.coverage);
      }
    MethodSummary s;
    s.method = method;
    s.trials = acc.size();
    if (acc.empty()) {
      out.push_back(s);
      continue;
    }
    const double k = static_cast<double>(acc.size());
    s.mean_system_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / k;
    s.mean_coverage = std::accumulate(cov.begin(), cov.end(), 0.0) / k;
    if (acc.size() > 1) {
      double ss = 0.0;
      for (double a : acc) ss += (a - s.mean_system_accuracy) * (a - s.mean_system_accuracy);
      s.se_system_accuracy = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    }
    out.push_back(s);
  }
  return out;
}

namespace {
std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
}  // namespace

void write_results_csv(std::ostream& out, std::span<const TrialResult> rows) {
  out << "method,trial,coverage,system_acc,clf_acc_nondef,hum_acc_def\n";
  for (const auto& r : rows)
    out << to_string(r.method) << ',' << r.trial << ',' << format_double(r.report.coverage) << ','
        << format_double(r.report.system_accuracy) << ',' << opt_field(r.report.classifier_accuracy_nondeferred) << ','
        << opt_field(r.report.human_accuracy_deferred) << '\n';
}

void write_curve_csv(std::ostream& out, const CoverageCurve& curve) {
  out << "threshold,coverage,system_acc\n";
  for (const auto& p : curve.points)
    out << format_double(p.threshold) << ',' << format_double(p.coverage) << ',' << format_double(p.system_accuracy)
        << '\n';
}

void write_summary_csv(std::ostream& out, std::span<const MethodSummary> summary) {
  out << "method,trials,mean_system_acc,se_system_acc,mean_coverage\n";
  for (const auto& s : summary)
    out << to_string(s.method) << ',' << s.trials << ',' << format_double(s.mean_system_accuracy) << ','
        << opt_field(s.se_system_accuracy) << ',' << format_double(s.mean_coverage) << '\n';
}

}  // namespace deferlab
