#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "deferlab/datagen.hpp"
#include "deferlab/rng.hpp"
#include "deferlab/train.hpp"

using namespace deferlab;

namespace {

constexpr double kInfTau = std::numeric_limits<double>::infinity();

struct Split {
  DeferDataset train, val, test;
};

Split planted_split(std::uint64_t seed, std::size_t n_train = 1000, std::size_t n_val = 400, std::size_t n_test = 1) {
  SyntheticConfig sc;
  sc.n = n_train + n_val + n_test;
  sc.seed = seed;
  const DeferDataset all = generate_synthetic(sc).dataset;
  auto range = [&](std::size_t begin, std::size_t len) {
    std::vector<std::size_t> idx(len);
    std::iota(idx.begin(), idx.end(), begin);
    return all.subset(idx);
  };
  return {range(0, n_train), range(n_train, n_val), range(n_train + n_val, n_test)};
}

// g = (0, 0, x0): rejection score x0 for score-difference methods, classifier always predicts 0.
TrainedSystem score_is_x0() {
  TrainedSystem s;
  s.method = Method::RS;
  s.model = ScoreModel(Architecture::Linear, 1, 3);
  s.model.weights()[4] = 1.0;
  return s;
}

DeferDataset one_dim(const std::vector<double>& x, const std::vector<int>& y, const std::vector<int>& h) {
  return DeferDataset(x, 1, y, h, 2);
}

double accuracy_at(const TrainedSystem& s, const DeferDataset& d, double tau) {
  const auto dec = decide_at(s, d, tau);
  return 1.0 - system_loss_01(d, dec);
}

// Every threshold that can change a decision: below all scores, above all, and each gap.
double best_scan_accuracy(const TrainedSystem& s, const DeferDataset& d) {
  std::vector<double> scores;
  for (std::size_t i = 0; i < d.size(); ++i) scores.push_back(rejection_score(s, d.row(i)));
  std::vector<double> taus = {-kInfTau, kInfTau};
  for (double a : scores)
    for (double b : scores)
      if (a < b) taus.push_back(0.5 * (a + b));
  double best = 0.0;
  for (double t : taus) best = std::max(best, accuracy_at(s, d, t));
  return best;
}

}  // namespace

TEST(ScoreModel, LinearForwardIsAffine) {
  ScoreModel m(Architecture::Linear, 2, 3);
  const double w[] = {1, 2, 3, -1, 0, 0.5, 0, 0, 7};
  std::copy(std::begin(w), std::end(w), m.weights().begin());
  const double x[] = {2.0, -1.0};
  const auto out = m.forward(x);
  EXPECT_DOUBLE_EQ(out[0], 1 * 2 + 2 * -1 + 3);
  EXPECT_DOUBLE_EQ(out[1], -2 + 0.5);
  EXPECT_DOUBLE_EQ(out[2], 7);
  EXPECT_THROW(m.forward(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(ScoreModel, HiddenBackwardMatchesFiniteDifferences) {
  Rng rng(3);
  ScoreModel m(Architecture::OneHidden, 4, 3, 5);
  m.initialize(rng);
  const std::vector<double> x = {0.3, -1.2, 0.8, 2.0};
  const std::vector<double> up = {0.7, -1.1, 0.4};
  std::vector<double> grad(m.num_params(), 0.0);
  m.backward(x, up, grad);
  auto f = [&](const ScoreModel& mm) {
    const auto o = mm.forward(x);
    return std::inner_product(o.begin(), o.end(), up.begin(), 0.0);
  };
  for (std::size_t k = 0; k < m.num_params(); ++k) {
    ScoreModel a = m, b = m;
    a.weights()[k] += 1e-6;
    b.weights()[k] -= 1e-6;
    EXPECT_NEAR(grad[k], (f(a) - f(b)) / 2e-6, 1e-6) << k;
  }
}

TEST(ScoreModel, InitializationBoundedByFanIn) {
  Rng rng(9);
  ScoreModel m(Architecture::OneHidden, 8, 2, 3);
  m.initialize(rng);
  const auto w = m.weights();
  for (std::size_t k = 0; k < 3 * 9; ++k) EXPECT_LE(std::abs(w[k]), 1.0 / 3.0);
  for (std::size_t k = 3 * 9; k < w.size(); ++k) EXPECT_LE(std::abs(w[k]), 0.5);
}

TEST(Adam, AnalyticStepMatchesFiniteDifferenceStep) {
  const Split s = planted_split(5, 64, 1);
  Rng rng(5);
  ScoreModel m(Architecture::Linear, s.train.dim(), 3);
  m.initialize(rng);
  std::vector<std::size_t> idx(s.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (SurrogateKind kind : {SurrogateKind::RS, SurrogateKind::CE, SurrogateKind::OvA}) {
    std::vector<double> grad(m.num_params()), scratch(m.num_params()), fd(m.num_params());
    batch_loss_grad(m, kind, 0.5, s.train, idx, grad);
    for (std::size_t k = 0; k < m.num_params(); ++k) {
      ScoreModel a = m, b = m;
      a.weights()[k] += 1e-5;
      b.weights()[k] -= 1e-5;
      fd[k] = (batch_loss_grad(a, kind, 0.5, s.train, idx, scratch) -
               batch_loss_grad(b, kind, 0.5, s.train, idx, scratch)) / 2e-5;
    }
    for (int step = 0; step < 3; ++step) {
      std::vector<double> pa(m.weights().begin(), m.weights().end()), pf = pa;
      Adam adam_a(m.num_params(), {}), adam_f(m.num_params(), {});
      for (int t = 0; t <= step; ++t) {
        adam_a.step(pa, grad);
        adam_f.step(pf, fd);
      }
      for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_NEAR(pa[k], pf[k], 1e-6);
    }
  }
}

TEST(Adam, FirstStepMovesEachCoordinateByTheLearningRate) {
  std::vector<double> p = {1.0, -2.0, 0.0};
  const std::vector<double> g = {3.0, -0.5, 0.0};
  AdamOptions o;
  o.learning_rate = 0.1;
  Adam adam(3, o);
  adam.step(p, g);
  EXPECT_NEAR(p[0], 0.9, 1e-7);
  EXPECT_NEAR(p[1], -1.9, 1e-7);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.adam.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha_grid = {0.5, 1.5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::RS, Method::RS2, Method::CE, Method::OvA, Method::MoE, Method::Confidence,
                   Method::Selective, Method::Triage, Method::Milp})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("lr"), std::invalid_argument);
  EXPECT_EQ(default_alpha_grid(Method::RS).size(), 11u);
  EXPECT_EQ(default_alpha_grid(Method::CE), (std::vector<double>{0.0, 0.1, 0.5, 1.0}));
}

TEST(TrainSurrogate, DeterministicForFixedSeed) {
  const Split s = planted_split(2, 300, 100);
  TrainConfig c;
  c.epochs = 40;
  c.seed = 11;
  for (Method m : {Method::RS, Method::MoE}) {
    c.method = m;
    const auto a = train_surrogate(s.train, s.val, c);
    const auto b = train_surrogate(s.train, s.val, c);
    EXPECT_TRUE(std::equal(a.model.weights().begin(), a.model.weights().end(), b.model.weights().begin()));
  }
  c.method = Method::Triage;
  const auto a = train_method(s.train, s.val, c);
  const auto b = train_method(s.train, s.val, c);
  EXPECT_TRUE(std::equal(a.aux_model->weights().begin(), a.aux_model->weights().end(),
                         b.aux_model->weights().begin()));
}

TEST(TrainSurrogate, BestEpochIsNoWorseThanLastEpoch) {
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = planted_split(seed, 300, 100);
    TrainConfig c;
    c.epochs = 60;
    c.seed = seed;
    for (Method m : {Method::RS, Method::CE, Method::OvA}) {
      c.method = m;
      c.track_best = true;
      const double best = system_accuracy(train_surrogate(s.train, s.val, c), s.val);
      c.track_best = false;
      const double last = system_accuracy(train_surrogate(s.train, s.val, c), s.val);
      EXPECT_GE(best, last);
    }
  }
}

TEST(TrainSurrogate, DecisionsInvariantToOutputScaling) {
  const Split s = planted_split(4, 200, 200);
  Rng rng(4);
  for (Method m : {Method::RS, Method::RS2, Method::CE, Method::OvA, Method::MoE}) {
    TrainedSystem sys;
    sys.method = m;
    sys.model = ScoreModel(Architecture::Linear, s.val.dim(), 3);
    for (int trial = 0; trial < 5; ++trial) {
      for (double& w : sys.model.weights()) w = rng.normal();
      const auto before = decide(sys, s.val);
      for (double u : {0.01, 3.0, 250.0}) {
        TrainedSystem scaled = sys;
        for (double& w : scaled.model.weights()) w *= u;
        const auto after = decide(scaled, s.val);
        for (std::size_t i = 0; i < before.size(); ++i) {
          ASSERT_EQ(before[i].deferred, after[i].deferred);
          ASSERT_EQ(before[i].classifier_label, after[i].classifier_label);
        }
      }
    }
  }
}

TEST(TrainSurrogate, ConstantLabelsArePredicted) {
  Rng rng(8);
  std::vector<double> x(200 * 3);
  for (double& v : x) v = rng.normal();
  const DeferDataset train(x, 3, std::vector<int>(200, 1), std::vector<int>(200, 0), 2);
  for (Method m : {Method::RS, Method::RS2, Method::CE, Method::OvA, Method::MoE}) {
    TrainConfig c;
    c.method = m;
    c.epochs = 50;
    const auto sys = train_method(train, train, c);
    EXPECT_DOUBLE_EQ(system_accuracy(sys, train), 1.0) << to_string(m);
    for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(classifier_label(sys, train.row(i)), 1);
  }
}

TEST(TrainSurrogate, CrossEntropyTrailsRealizableSurrogate) {
  double rs = 0.0, ce = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    const Split s = planted_split(seed, 1000, 200, 5000);
    TrainConfig c;
    c.seed = seed;
    c.method = Method::RS;
    c.alpha_grid = default_alpha_grid(Method::RS);
    rs += 1.0 - system_accuracy(train_method(s.train, s.val, c), s.test);
    c.method = Method::CE;
    c.alpha_grid = default_alpha_grid(Method::CE);
    ce += 1.0 - system_accuracy(train_method(s.train, s.val, c), s.test);
  }
  EXPECT_GE((ce - rs) / seeds, 0.03);
}

TEST(TrainSurrogate, DivergenceAborts) {
  const DeferDataset bad({1e10, -1e10, 2e10, 3e10}, 1, {0, 1, 0, 1}, {1, 1, 0, 0}, 2);
  TrainConfig c;
  c.epochs = 5;
  c.adam.learning_rate = 1e300;
  EXPECT_THROW(train_surrogate(bad, bad, c), TrainingError);
}

TEST(TrainSurrogate, RejectsMismatchedSets) {
  const Split s = planted_split(1, 50, 20);
  const DeferDataset other({0.0, 1.0}, 1, {0, 1}, {0, 1}, 2);
  TrainConfig c;
  c.epochs = 1;
  EXPECT_THROW(train_surrogate(s.train, other, c), std::invalid_argument);
  c.method = Method::Confidence;
  EXPECT_THROW(train_surrogate(s.train, s.val, c), std::invalid_argument);
}

TEST(SearchAlpha, SingletonGridEqualsDirectTraining) {
  const Split s = planted_split(6, 300, 100);
  TrainConfig c;
  c.epochs = 50;
  c.alpha = 0.5;
  auto direct = train_surrogate(s.train, s.val, c);
  direct.tau = fit_tau(direct, s.val);
  c.alpha_grid = {0.5};
  c.alpha = 1.0;
  const auto searched = search_alpha(s.train, s.val, c);
  EXPECT_EQ(searched.alpha, 0.5);
  EXPECT_EQ(searched.tau, direct.tau);
  EXPECT_TRUE(std::equal(direct.model.weights().begin(), direct.model.weights().end(),
                         searched.model.weights().begin()));
}

TEST(SearchAlpha, PicksTheBetterValidationAccuracy) {
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = planted_split(seed);
    TrainConfig c;
    c.seed = seed;
    c.alpha_grid = {0.0, 1.0};
    const auto picked = search_alpha(s.train, s.val, c);
    double acc[2];
    for (int k = 0; k < 2; ++k) {
      TrainConfig one = c;
      one.alpha = k;
      auto sys = train_surrogate(s.train, s.val, one);
      sys.tau = fit_tau(sys, s.val);
      acc[k] = system_accuracy(sys, s.val);
    }
    EXPECT_EQ(picked.alpha, acc[1] > acc[0] ? 1.0 : 0.0);
    EXPECT_EQ(picked.alpha, 1.0);
  }
}

TEST(SearchAlpha, DeferredAccuracyRisesWithAlpha) {
  const std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> mean(grid.size(), 0.0);
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = planted_split(seed);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      TrainConfig c;
      c.seed = seed;
      c.alpha = grid[k];
      const auto sys = train_surrogate(s.train, s.val, c);
      const auto dec = decide(sys, s.val);
      double deferred = 0, right = 0;
      for (std::size_t i = 0; i < dec.size(); ++i)
        if (dec[i].deferred) {
          ++deferred;
          right += s.val.human_correct(i);
        }
      mean[k] += right / std::max(deferred, 1.0) / 3.0;
    }
  }
  EXPECT_GT(mean.back(), mean.front());
  double ma = 0.5, mv = std::accumulate(mean.begin(), mean.end(), 0.0) / grid.size(), cov = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) cov += (grid[k] - ma) * (mean[k] - mv);
  EXPECT_GT(cov, 0.0);
}

TEST(FitTau, PerfectHumanDefersEverything) {
  const auto sys = score_is_x0();
  const auto val = one_dim({-2, -1, 0.5, 3}, {1, 1, 0, 1}, {1, 1, 0, 1});
  EXPECT_EQ(fit_tau(sys, val), -kInfTau);
}

TEST(FitTau, WrongHumanNeverDefers) {
  const auto sys = score_is_x0();
  // the classifier (always 0) is right on the highest score, so any deferral costs a point
  const auto val = one_dim({-2, -1, 0.5, 3}, {1, 0, 1, 0}, {0, 1, 0, 1});
  EXPECT_EQ(fit_tau(sys, val), kInfTau);
}

TEST(FitTau, MatchesExhaustiveScan) {
  const auto sys = score_is_x0();
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(5);
    std::vector<int> y(5), h(5);
    for (int i = 0; i < 5; ++i) {
      x[i] = std::round(rng.uniform(-3, 3) * 2) / 2;  // repeated scores happen
      y[i] = static_cast<int>(rng.uniform_index(2));
      h[i] = static_cast<int>(rng.uniform_index(2));
    }
    const auto val = one_dim(x, y, h);
    const double tau = fit_tau(sys, val);
    const double best = best_scan_accuracy(sys, val);
    EXPECT_DOUBLE_EQ(accuracy_at(sys, val, tau), best);
    // candidates: the sentinels and midpoints of adjacent distinct scores; ties go toward zero
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates = {-kInfTau, kInfTau};
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) candidates.push_back(0.5 * (sorted[k] + sorted[k + 1]));
    for (double t : candidates)
      if (accuracy_at(sys, val, t) == best) EXPECT_LE(std::abs(tau), std::abs(t));
  }
}

TEST(FitTau, EmptyValidationThrows) {
  EXPECT_THROW(fit_tau(score_is_x0(), DeferDataset({}, 1, {}, {}, 2)), std::invalid_argument);
}

TEST(CompareConfidence, ZeroHumanConfidenceNeverDefers) {
  const Split s = planted_split(3, 200, 200);
  TrainConfig c;
  c.epochs = 20;
  auto sys = train_compare_confidence(s.train, s.val, c);
  auto w = sys.aux_model->weights();
  std::fill(w.begin(), w.end(), 0.0);
  w.back() = -60.0;
  for (const auto& d : decide(sys, s.val)) EXPECT_FALSE(d.deferred);
  w.back() = 60.0;
  for (std::size_t i = 0; i < s.val.size(); ++i) {
    const auto p = predict(sys, s.val.row(i), s.val.human(i));
    EXPECT_TRUE(p.deferred);
  }
}

TEST(CompareConfidence, BetweenClassifierAloneAndOracleDeferral) {
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = planted_split(seed, 1000, 200, 3000);
    TrainConfig c;
    c.seed = seed;
    const auto sys = train_compare_confidence(s.train, s.val, c);
    double clf = 0, oracle = 0;
    for (std::size_t i = 0; i < s.test.size(); ++i) {
      const bool ok = classifier_label(sys, s.test.row(i)) == s.test.label(i);
      clf += ok;
      oracle += ok || s.test.human_correct(i);
    }
    const double n = static_cast<double>(s.test.size());
    const double acc = system_accuracy(sys, s.test);
    EXPECT_GE(acc, clf / n);
    EXPECT_LE(acc, oracle / n);
  }
}

TEST(SelectivePrediction, TrivialHumans) {
  Rng rng(12);
  std::vector<double> x(300 * 2);
  for (double& v : x) v = rng.normal();
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = rng.bernoulli(0.5);
  TrainConfig c;
  c.epochs = 20;
  const DeferDataset perfect(x, 2, y, y, 2);
  auto sys = train_selective_prediction(perfect, perfect, c);
  EXPECT_DOUBLE_EQ(system_accuracy(sys, perfect), 1.0);
  EXPECT_DOUBLE_EQ(accuracy_at(sys, perfect, -kInfTau), 1.0);
  std::vector<int> wrong(y);
  for (int& v : wrong) v = 1 - v;
  const DeferDataset hopeless(x, 2, y, wrong, 2);
  sys = train_selective_prediction(hopeless, hopeless, c);
  EXPECT_DOUBLE_EQ(system_accuracy(sys, hopeless), accuracy_at(sys, hopeless, kInfTau));
  for (const auto& d : decide(sys, hopeless)) EXPECT_FALSE(d.deferred && sys.tau == kInfTau);
}

TEST(SelectivePrediction, ThresholdMatchesExhaustiveScan) {
  for (std::uint64_t seed : {0, 1, 2, 3}) {
    const Split s = planted_split(seed, 300, 40);
    TrainConfig c;
    c.epochs = 30;
    c.seed = seed;
    const auto sys = train_selective_prediction(s.train, s.val, c);
    EXPECT_DOUBLE_EQ(system_accuracy(sys, s.val), best_scan_accuracy(sys, s.val));
  }
}

TEST(Triage, WrongHumanKeepsEveryPointAndMatchesPlainTraining) {
  const Split s = planted_split(7, 300, 100);
  std::vector<int> wrong(s.train.labels().begin(), s.train.labels().end());
  for (int& v : wrong) v = 1 - v;
  const DeferDataset train(std::vector<double>(s.train.features().begin(), s.train.features().end()), s.train.dim(),
                           std::vector<int>(s.train.labels().begin(), s.train.labels().end()), wrong, 2);
  TrainConfig c;
  c.epochs = 30;
  Rng rng(7);
  ScoreModel probe(Architecture::Linear, train.dim(), 2);
  probe.initialize(rng);
  EXPECT_EQ(triage_filter(probe, train).size(), train.size());
  const auto triage = train_differentiable_triage(train, s.val, c);
  const auto plain = train_selective_prediction(train, s.val, c);
  EXPECT_TRUE(std::equal(triage.model.weights().begin(), triage.model.weights().end(),
                         plain.model.weights().begin()));
}

TEST(Triage, PerfectHumanKeepsOnlyPointsTheClassifierGetsRight) {
  const Split s = planted_split(8, 300, 1);
  const DeferDataset train(std::vector<double>(s.train.features().begin(), s.train.features().end()), s.train.dim(),
                           std::vector<int>(s.train.labels().begin(), s.train.labels().end()),
                           std::vector<int>(s.train.labels().begin(), s.train.labels().end()), 2);
  Rng rng(8);
  ScoreModel clf(Architecture::Linear, train.dim(), 2);
  clf.initialize(rng);
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto g = clf.forward(train.row(i));
    if (static_cast<int>(g[1] > g[0]) == train.label(i)) expected.push_back(i);
  }
  EXPECT_EQ(triage_filter(clf, train), expected);
}

TEST(Triage, RejectorAgreesWithPerPointComparison) {
  for (std::uint64_t seed : {0, 1, 2}) {
    const Split s = planted_split(seed, 1000, 200);
    TrainConfig c;
    c.seed = seed;
    const auto sys = train_differentiable_triage(s.train, s.val, c);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < s.train.size(); ++i) {
      const auto p = predict(sys, s.train.row(i), s.train.human(i));
      // agreement: the chosen agent's 0-1 loss is not above the other's (ties accept either)
      const int clf_loss = p.classifier_label != s.train.label(i);
      const int human_loss = !s.train.human_correct(i);
      agree += p.deferred ? human_loss <= clf_loss : clf_loss <= human_loss;
    }
    EXPECT_GE(agree, 900u);
  }
}

TEST(SystemFile, RoundTrip) {
  const Split s = planted_split(9, 200, 100);
  for (Method m : {Method::RS, Method::Confidence, Method::Triage, Method::Selective}) {
    TrainConfig c;
    c.method = m;
    c.epochs = 10;
    c.hidden_units = m == Method::Triage ? 4 : 0;
    const auto sys = train_method(s.train, s.val, c);
    std::stringstream ss;
    write_system(ss, sys);
    const auto back = read_system(ss);
    EXPECT_EQ(back.method, m);
    EXPECT_EQ(back.tau, sys.tau);
    EXPECT_EQ(back.aux_model.has_value(), sys.aux_model.has_value());
    EXPECT_TRUE(std::equal(sys.model.weights().begin(), sys.model.weights().end(), back.model.weights().begin()));
    for (std::size_t i = 0; i < s.val.size(); ++i)
      EXPECT_EQ(predict(sys, s.val.row(i), 0).final_label, predict(back, s.val.row(i), 0).final_label);
  }
}

TEST(SystemFile, InfiniteTauSurvives) {
  auto sys = score_is_x0();
  sys.tau = -kInfTau;
  std::stringstream ss;
  write_system(ss, sys);
  EXPECT_EQ(read_system(ss).tau, -kInfTau);
}

TEST(SystemFile, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_system(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("system,rs,2,0,1\nmodel,linear,1,3,0\n1,2,3,4,5\n"), 3u);
  EXPECT_EQ(line_of("system,xx,2,0,1\n"), 1u);
  EXPECT_EQ(line_of("system,rs,2,0,1\nmodel,cubic,1,3,0\n"), 2u);
  EXPECT_EQ(line_of("system,rs,2,0,1\nmodel,linear,1,3,0\n1,2,3,4,5,zz\n"), 3u);
  EXPECT_EQ(line_of("system,confidence,2,0,1\nmodel,linear,1,2,0\n1,2,3,4\n"), 3u);
  EXPECT_EQ(line_of("system,rs,2,0,1\nmodel,linear,1,2,0\n1,2,3,4\n"), 2u);
}
