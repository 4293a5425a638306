#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "deferlab/eval.hpp"
#include "deferlab/rng.hpp"

using namespace deferlab;

namespace {

constexpr double kInfT = std::numeric_limits<double>::infinity();

DeferDataset table(const std::vector<int>& y, const std::vector<int>& h) {
  std::vector<double> x(y.size());
  std::iota(x.begin(), x.end(), 0.0);
  return DeferDataset(x, 1, y, h, 2);
}

std::vector<Decision> decisions(const std::vector<int>& defer, const std::vector<int>& clf) {
  std::vector<Decision> d(defer.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = {defer[i] != 0, clf[i]};
  return d;
}

int count_substr(const std::string& s, const std::string& needle) {
  int c = 0;
  for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++c;
  return c;
}

}  // namespace

TEST(Evaluate, DeferAllReportsHumanAccuracy) {
  // human right on 7 of 10
  const auto data = table({0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, {0, 1, 0, 1, 0, 1, 0, 0, 1, 0});
  const auto r = evaluate(data, decisions(std::vector<int>(10, 1), std::vector<int>(10, 0)));
  EXPECT_DOUBLE_EQ(r.system_accuracy, 0.7);
  EXPECT_DOUBLE_EQ(r.coverage, 0.0);
  EXPECT_FALSE(r.classifier_accuracy_nondeferred.has_value());
  EXPECT_DOUBLE_EQ(*r.human_accuracy_deferred, 0.7);
}

TEST(Evaluate, DeferNoneReportsClassifierAccuracy) {
  const auto data = table({0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, std::vector<int>(10, 0));
  const std::vector<int> clf = {0, 1, 0, 1, 0, 1, 0, 1, 0, 0};
  const auto r = evaluate(data, decisions(std::vector<int>(10, 0), clf));
  EXPECT_DOUBLE_EQ(r.system_accuracy, 0.9);
  EXPECT_DOUBLE_EQ(r.coverage, 1.0);
  EXPECT_FALSE(r.human_accuracy_deferred.has_value());
  EXPECT_DOUBLE_EQ(*r.classifier_accuracy_nondeferred, 0.9);
}

TEST(Evaluate, MixedTableMatchesHandCount) {
  //            0  1  2  3  4  5  6  7  8  9
  const std::vector<int> y = {0, 1, 1, 0, 1, 0, 0, 1, 1, 0};
  const std::vector<int> h = {0, 0, 1, 1, 1, 0, 1, 1, 0, 0};
  const std::vector<int> defer = {1, 1, 1, 0, 0, 0, 1, 0, 0, 0};
  const std::vector<int> clf = {1, 1, 1, 0, 0, 0, 0, 1, 1, 1};
  // deferred {0,1,2,6}: human right on 0,2 -> 2/4; kept {3,4,5,7,8,9}: classifier right on 3,5,7,8 -> 4/6
  const auto r = evaluate(table(y, h), decisions(defer, clf));
  EXPECT_DOUBLE_EQ(r.coverage, 0.6);
  EXPECT_DOUBLE_EQ(*r.human_accuracy_deferred, 0.5);
  EXPECT_DOUBLE_EQ(*r.classifier_accuracy_nondeferred, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.system_accuracy, 0.6);
  EXPECT_DOUBLE_EQ(r.system_accuracy, 0.6 * (4.0 / 6.0) + 0.4 * 0.5);
  EXPECT_EQ(r.n_deferred, 4u);
}

TEST(Evaluate, DecompositionHoldsOnRandomTables) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<int> y(n), h(n), defer(n), clf(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5);
      h[i] = rng.bernoulli(0.5);
      defer[i] = rng.bernoulli(0.4);
      clf[i] = rng.bernoulli(0.5);
    }
    const auto r = evaluate(table(y, h), decisions(defer, clf));
    const double kept = r.coverage * static_cast<double>(n);
    EXPECT_DOUBLE_EQ(kept, std::round(kept));
    EXPECT_GE(r.system_accuracy, 0.0);
    EXPECT_LE(r.system_accuracy, 1.0);
    if (r.classifier_accuracy_nondeferred && r.human_accuracy_deferred)
      EXPECT_DOUBLE_EQ(r.system_accuracy, r.coverage * *r.classifier_accuracy_nondeferred +
                                              (1.0 - r.coverage) * *r.human_accuracy_deferred);
  }
}

TEST(Evaluate, RejectsMismatchedInputs) {
  const auto data = table({0, 1}, {0, 1});
  EXPECT_THROW(evaluate(data, decisions({0}, {0})), std::invalid_argument);
  EXPECT_THROW(evaluate(DeferDataset({}, 1, {}, {}, 2), std::vector<Decision>{}), std::invalid_argument);
  HalfspacePair wide{{{1, 2, 3}}, {0, 0, 1}};
  EXPECT_THROW(evaluate(wide, data), std::invalid_argument);
}

TEST(Evaluate, PairUsesHalfspaceDecisions) {
  // classifier: label 1 iff x > 2.5; rejector defers iff x >= 5
  const auto data = table({0, 0, 0, 1, 1, 1, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1});
  const HalfspacePair pair{{{1.0, -2.5}}, {1.0, -5.0}};
  const auto r = evaluate(pair, data);
  EXPECT_EQ(r.n_deferred, 3u);
  EXPECT_DOUBLE_EQ(*r.classifier_accuracy_nondeferred, 1.0);
  EXPECT_DOUBLE_EQ(*r.human_accuracy_deferred, 2.0 / 3.0);
}

TEST(CoverageCurve, ConstantScoreHasOnlyEndpoints) {
  const auto data = table({0, 1, 1, 0}, {0, 0, 1, 1});
  const std::vector<double> scores(4, 0.3);
  const std::vector<int> clf = {0, 1, 0, 0};
  const auto c = coverage_curve(data, scores, clf, 50);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[0].threshold, -kInfT);
  EXPECT_EQ(c.points[1].threshold, kInfT);
  EXPECT_DOUBLE_EQ(c.points[0].coverage, 0.0);
  EXPECT_DOUBLE_EQ(c.points[1].coverage, 1.0);
}

TEST(CoverageCurve, EndpointsAndMonotoneCoverage) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(60);
    std::vector<int> y(n), h(n), clf(n);
    std::vector<double> s(n);
    double human = 0, classifier = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5);
      h[i] = rng.bernoulli(0.7) ? y[i] : 1 - y[i];
      clf[i] = rng.bernoulli(0.8) ? y[i] : 1 - y[i];
      s[i] = std::round(rng.normal() * 4) / 4;
      human += h[i] == y[i];
      classifier += clf[i] == y[i];
    }
    const auto data = table(y, h);
    const std::size_t grid = trial % 2 ? 5 : 1000;
    const auto c = coverage_curve(data, s, clf, grid);
    ASSERT_GE(c.points.size(), 2u);
    EXPECT_LE(c.points.size(), grid);
    EXPECT_EQ(c.points.front().system_accuracy, human / static_cast<double>(n));
    EXPECT_EQ(c.points.back().system_accuracy, classifier / static_cast<double>(n));
    EXPECT_EQ(c.points.front().coverage, 0.0);
    EXPECT_EQ(c.points.back().coverage, 1.0);
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      EXPECT_LT(c.points[k - 1].threshold, c.points[k].threshold);
      EXPECT_LE(c.points[k - 1].coverage, c.points[k].coverage);
    }
    // each point equals a direct evaluation at its threshold
    for (const auto& p : c.points) {
      std::vector<Decision> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = {s[i] >= p.threshold, clf[i]};
      const auto r = evaluate(data, d);
      EXPECT_DOUBLE_EQ(r.system_accuracy, p.system_accuracy);
      EXPECT_DOUBLE_EQ(r.coverage, p.coverage);
    }
  }
}

TEST(CoverageCurve, PassesThroughTheOperatingPoint) {
  SyntheticConfig sc;
  sc.n = 900;
  sc.d = 5;
  sc.seed = 3;
  const auto all = generate_synthetic(sc).dataset;
  std::vector<std::size_t> a(500), b(100), t(300);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 500);
  std::iota(t.begin(), t.end(), 600);
  const auto train = all.subset(a), val = all.subset(b), test = all.subset(t);
  for (Method m : {Method::RS, Method::Selective, Method::Confidence, Method::Triage}) {
    TrainConfig c;
    c.method = m;
    c.epochs = 40;
    const auto sys = train_method(train, val, c);
    const auto curve = coverage_curve(sys, test, 100000);
    const auto report = evaluate(sys, test);
    std::vector<double> scores;
    for (std::size_t i = 0; i < test.size(); ++i) scores.push_back(rejection_score(sys, test.row(i)));
    // the curve point whose threshold induces the same partition as tau
    bool found = false;
    for (const auto& p : curve.points) {
      bool same = true;
      for (double s : scores) same = same && (defers_at(sys, s, sys.tau) == (s >= p.threshold));
      if (!same) continue;
      found = true;
      EXPECT_DOUBLE_EQ(p.system_accuracy, report.system_accuracy) << to_string(m);
      EXPECT_DOUBLE_EQ(p.coverage, report.coverage);
    }
    EXPECT_TRUE(found) << to_string(m);
  }
}

TEST(CoverageCurve, PairSweepsRejectorActivation) {
  const auto data = table({0, 0, 1, 1}, {1, 0, 1, 0});
  const HalfspacePair pair{{{1.0, -1.5}}, {-1.0, 1.5}};  // rejector score 1.5 - x
  const auto c = coverage_curve(pair, data, 10);
  ASSERT_EQ(c.points.size(), 5u);
  EXPECT_DOUBLE_EQ(c.points[1].threshold, -1.0);
  EXPECT_DOUBLE_EQ(c.points[1].coverage, 0.25);
  EXPECT_DOUBLE_EQ(c.points.back().system_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(c.points.front().system_accuracy, 0.5);
}

TEST(CoverageCurve, AdjacentDoublesStillSplit) {
  const double a = 1.0, b = std::nextafter(1.0, 2.0);
  const auto data = table({0, 1}, {1, 1});
  const std::vector<double> s = {a, b};
  const auto c = coverage_curve(data, s, std::vector<int>{0, 0}, 10);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_GT(c.points[1].threshold, a);
  EXPECT_LE(c.points[1].threshold, b);
  EXPECT_DOUBLE_EQ(c.points[1].coverage, 0.5);
}

TEST(GeneralizationBound, WorkedExample) {
  const double expected = (2.0 * 2.0 * std::sqrt(2.0 * std::log(2.0)) + 10.0 * std::sqrt(std::log(20.0))) / std::sqrt(50.0);
  const double v = generalization_bound(0.0, 1.0, 1.0, 2, 100, 0.5, 0.1);
  EXPECT_NEAR(v, expected, 1e-12);
  EXPECT_NEAR(v, 3.1138, 1e-3);
}

TEST(GeneralizationBound, OneDimensionDropsTheComplexityTerm) {
  const double v = generalization_bound(0.2, 5.0, 7.0, 1, 400, 0.25, 0.05);
  EXPECT_NEAR(v, 0.2 + 10.0 * std::sqrt(std::log(40.0)) / std::sqrt(100.0), 1e-12);
}

TEST(GeneralizationBound, GapShrinksWithMoreData) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const double loss = rng.uniform();
    const double km = rng.uniform(0, 3), kr = rng.uniform(0, 3), p = rng.uniform(0.01, 1.0),
                 delta = rng.uniform(0.001, 0.499);
    const std::size_t d = 1 + rng.uniform_index(50), n = 1 + rng.uniform_index(100000);
    const double b1 = generalization_bound(loss, km, kr, d, n, p, delta);
    const double b2 = generalization_bound(loss, km, kr, d, 2 * n, p, delta);
    EXPECT_GE(b1, loss);
    EXPECT_LT(b2 - loss, b1 - loss);
  }
}

TEST(GeneralizationBound, RejectsBadInputs) {
  EXPECT_THROW(generalization_bound(0, 1, 1, 2, 100, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(generalization_bound(0, 1, 1, 2, 100, 0.5, 0.5), std::invalid_argument);
  EXPECT_THROW(generalization_bound(0, 1, 1, 2, 100, 0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(generalization_bound(0, 1, 1, 2, 0, 0.5, 0.1), std::invalid_argument);
  EXPECT_THROW(generalization_bound(0, 1, 1, 0, 10, 0.5, 0.1), std::invalid_argument);
}

namespace {

BenchmarkInstance small_instance() {
  BenchmarkInstance inst;
  inst.synthetic.d = 5;
  inst.synthetic.n = 400;
  return inst;
}

}  // namespace

TEST(Benchmark, SingleTrialSingleMethod) {
  BenchmarkOptions o;
  o.methods = {Method::OvA};
  o.train.epochs = 20;
  const auto r = run_benchmark(small_instance(), o);
  ASSERT_EQ(r.rows.size(), 1u);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_FALSE(r.summary[0].se_system_accuracy.has_value());
  EXPECT_EQ(r.summary[0].mean_system_accuracy, r.rows[0].report.system_accuracy);
  EXPECT_EQ(r.rows[0].report.n_points, 80u);
}

TEST(Benchmark, SplitIsSeventyTenTwenty) {
  BenchmarkOptions o;
  o.seed = 4;
  const auto d = make_trial_data(small_instance(), o, 0);
  EXPECT_EQ(d.train.size(), 280u);
  EXPECT_EQ(d.val.size(), 40u);
  EXPECT_EQ(d.test.size(), 80u);
  o.split_sizes = std::array<std::size_t, 3>{100, 20, 50};
  const auto e = make_trial_data(small_instance(), o, 1);
  EXPECT_EQ(e.train.size(), 100u);
  EXPECT_EQ(e.test.size(), 50u);
}

TEST(Benchmark, DeterministicAndIndependentOfJobs) {
  BenchmarkOptions o;
  o.methods = {Method::RS, Method::CE, Method::Milp, Method::Selective};
  o.trials = 3;
  o.seed = 99;
  o.train.epochs = 15;
  o.milp.time_limit_s = 2.0;
  o.milp.heuristics = true;
  o.split_sizes = std::array<std::size_t, 3>{30, 20, 100};
  auto as_csv = [](const BenchmarkResult& r) {
    std::ostringstream s;
    write_results_csv(s, r.rows);
    write_summary_csv(s, r.summary);
    return s.str();
  };
  const auto a = run_benchmark(small_instance(), o);
  const auto b = run_benchmark(small_instance(), o);
  o.jobs = 3;
  const auto c = run_benchmark(small_instance(), o);
  EXPECT_EQ(as_csv(a), as_csv(b));
  EXPECT_EQ(as_csv(a), as_csv(c));
  ASSERT_EQ(a.rows.size(), 12u);
  EXPECT_EQ(a.rows[2].method, Method::Milp);
  EXPECT_FALSE(a.rows[2].status.empty());
  EXPECT_TRUE(a.summary[0].se_system_accuracy.has_value());
}

TEST(Benchmark, StandardErrorUsesSampleDeviation) {
  std::vector<TrialResult> rows(3);
  const double acc[] = {0.8, 0.9, 0.7};
  for (int k = 0; k < 3; ++k) {
    rows[k].method = Method::CE;
    rows[k].report.system_accuracy = acc[k];
    rows[k].report.coverage = 0.5;
  }
  const std::vector<Method> m = {Method::CE};
  const auto s = summarize(rows, m);
  EXPECT_NEAR(s[0].mean_system_accuracy, 0.8, 1e-12);
  EXPECT_NEAR(*s[0].se_system_accuracy, 0.1 / std::sqrt(3.0), 1e-12);
}

TEST(Benchmark, RejectsEmptyOrUnknownMethods) {
  BenchmarkOptions o;
  EXPECT_THROW(run_benchmark(small_instance(), o), std::invalid_argument);
  EXPECT_THROW(parse_method("svm"), std::invalid_argument);
}

TEST(Benchmark, GroupedInstanceRuns) {
  BenchmarkInstance inst;
  inst.kind = BenchmarkInstance::Kind::Grouped;
  inst.d = 4;
  inst.n = 300;
  inst.num_classes = 4;
  inst.expert_strength = 4;
  BenchmarkOptions o;
  o.methods = {Method::Confidence};
  o.train.epochs = 10;
  const auto r = run_benchmark(inst, o);
  EXPECT_EQ(r.rows.size(), 1u);
  EXPECT_GT(r.rows[0].report.system_accuracy, 0.9);  // the expert is perfect on every class
}

TEST(ResultFiles, CsvLayouts) {
  TrialResult r;
  r.method = Method::Selective;
  r.trial = 2;
  r.report.coverage = 1.0;
  r.report.system_accuracy = 0.75;
  r.report.classifier_accuracy_nondeferred = 0.75;
  r.curve.points = {{-kInfT, 0.0, 0.5}, {0.25, 0.5, 0.625}, {kInfT, 1.0, 0.75}};
  std::ostringstream rows, curve;
  write_results_csv(rows, std::vector<TrialResult>{r});
  EXPECT_EQ(rows.str(), "method,trial,coverage,system_acc,clf_acc_nondef,hum_acc_def\nselective,2,1,0.75,0.75,\n");
  write_curve_csv(curve, r.curve);
  EXPECT_EQ(curve.str(), "threshold,coverage,system_acc\n-inf,0,0.5\n0.25,0.5,0.625\ninf,1,0.75\n");
}

TEST(SvgPlot, OnePolylinePerSeriesWithMarkers) {
  std::vector<SvgSeries> series(3);
  for (int k = 0; k < 3; ++k) {
    series[k].name = k == 2 ? "a<b & c" : "m" + std::to_string(k);
    series[k].curve.points = {{-kInfT, 0.0, 0.7}, {0.0, 0.4, 0.85}, {kInfT, 1.0, 0.8}};
    series[k].operating_coverage = 0.4;
    series[k].operating_accuracy = 0.85;
  }
  const std::string svg = render_coverage_svg(series, "title");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_substr(svg, "<polyline"), 3);
  EXPECT_EQ(count_substr(svg, "<circle"), 3);
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
  EXPECT_NE(svg.find("Coverage"), std::string::npos);
}
