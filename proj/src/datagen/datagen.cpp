#include "deferlab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "deferlab/io.hpp"
#include "deferlab/rng.hpp"

namespace deferlab {
namespace {

constexpr int kMaxPlantAttempts = 1000;

bool in_unit_interval(double p) { return p >= 0.0 && p <= 1.0; }

std::vector<double> random_unit_direction(Rng& rng, std::size_t d) {
  std::vector<double> w(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : w) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& v : w) v /= norm;
  return w;
}

void normalize(std::vector<double>& w) {
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : w) v /= norm;
}

// Unit direction with an offset through a random sample point, redrawn until
// both sides hold at least kPlantedMassFloor of the points.
std::vector<double> plant_halfspace(Rng& rng, const std::vector<double>& x, std::size_t n,
                                    std::size_t d) {
  for (int attempt = 0; attempt < kMaxPlantAttempts; ++attempt) {
    std::vector<double> w = random_unit_direction(rng, d);
    std::size_t anchor = static_cast<std::size_t>(rng.uniform_index(n));
    double offset = 0.0;
    for (std::size_t j = 0; j < d; ++j) offset -= w[j] * x[anchor * d + j];
    w.push_back(offset);
    std::size_t positive = 0;
    for (std::size_t i = 0; i < n; ++i)
      positive += affine_score(w, std::span<const double>(x.data() + i * d, d)) >= 0.0;
    double frac = static_cast<double>(positive) / static_cast<double>(n);
    if (frac >= kPlantedMassFloor && frac <= 1.0 - kPlantedMassFloor) {
      normalize(w);
      return w;
    }
  }
  throw std::runtime_error("could not plant a halfspace meeting the mass floor");
}

std::vector<std::vector<double>> plant_multiclass(Rng& rng, const std::vector<double>& x,
                                                  std::size_t n, std::size_t d, int classes) {
  const double floor = kPlantedMassFloor / classes;
  for (int attempt = 0; attempt < kMaxPlantAttempts; ++attempt) {
    // Nearest-anchor partition: row k scores 2 a_k.x - |a_k|^2, scaled by a
    // common factor so the argmax is unchanged.
    HalfspacePair probe;
    double scale = 0.0;
    for (int k = 0; k < classes; ++k) {
      std::size_t anchor = static_cast<std::size_t>(rng.uniform_index(n));
      std::vector<double> w(d + 1, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double a = x[anchor * d + j];
        w[j] = 2.0 * a;
        w[d] -= a * a;
      }
      for (double v : w) scale = std::max(scale, std::abs(v));
      probe.classifier.push_back(std::move(w));
    }
    if (scale > 0.0)
      for (auto& w : probe.classifier)
        for (double& v : w) v /= scale;
    probe.rejector.assign(d + 1, 0.0);
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < n; ++i)
      ++counts[classify_halfspace(probe, std::span<const double>(x.data() + i * d, d))];
    bool ok = true;
    for (std::size_t c : counts) ok = ok && static_cast<double>(c) >= floor * static_cast<double>(n);
    if (ok) return probe.classifier;
  }
  throw std::runtime_error("could not plant a multiclass classifier meeting the mass floor");
}

int wrong_label(Rng& rng, int y, int classes) {
  if (classes == 2) return 1 - y;
  int other = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes - 1)));
  return other >= y ? other + 1 : other;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(box_u > 0.0)) throw std::invalid_argument("U must be > 0");
  if (clusters < 1) throw std::invalid_argument("mixture needs K >= 1");
  if (!in_unit_interval(p_m) || !in_unit_interval(p_h0) || !in_unit_interval(p_h1))
    throw std::invalid_argument("p_m, p_h0, p_h1 must lie in [0,1]");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
}

PlantedInstance generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::size_t n = config.n;
  const std::size_t d = config.d;
  const int classes = config.num_classes;
  Rng data_rng(config.seed, Stream::Data);
  Rng plant_rng(config.seed, Stream::Planted);

  std::vector<double> x(n * d);
  if (config.distribution == FeatureDistribution::Uniform) {
    for (double& v : x) v = data_rng.uniform(0.0, config.box_u);
  } else {
    const std::size_t k = static_cast<std::size_t>(config.clusters);
    std::vector<double> means(k * d), stds(k * d);
    for (double& v : means) v = data_rng.uniform(0.0, config.box_u);
    for (double& v : stds) v = data_rng.uniform() * config.box_u;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = static_cast<std::size_t>(data_rng.uniform_index(k));
      for (std::size_t j = 0; j < d; ++j)
        x[i * d + j] = means[c * d + j] + stds[c * d + j] * data_rng.normal();
    }
  }

  HalfspacePair planted;
  planted.rejector = plant_halfspace(plant_rng, x, n, d);
  if (classes == 2)
    planted.classifier.push_back(plant_halfspace(plant_rng, x, n, d));
  else
    planted.classifier = plant_multiclass(plant_rng, x, n, d, classes);

  std::vector<int> labels(n), human(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> xi(x.data() + i * d, d);
    const bool defer_region = affine_score(planted.rejector, xi) >= 0.0;
    int y;
    if (!defer_region && !data_rng.bernoulli(config.p_m))
      y = classify_halfspace(planted, xi);
    else
      y = static_cast<int>(data_rng.uniform_index(static_cast<std::uint64_t>(classes)));
    const double p_err = defer_region ? config.p_h1 : config.p_h0;
    labels[i] = y;
    human[i] = data_rng.bernoulli(p_err) ? wrong_label(data_rng, y, classes) : y;
  }

  return {DeferDataset(std::move(x), d, std::move(labels), std::move(human), classes),
          std::move(planted)};
}

DeferDataset generate_grouped_expert(std::size_t d, std::size_t n, int num_classes,
                                     int expert_strength, std::uint64_t seed,
                                     const GroupedExpertOptions& options) {
  if (d < 1 || n < 1) throw std::invalid_argument("grouped expert needs d >= 1 and n >= 1");
  if (num_classes < 2) throw std::invalid_argument("grouped expert needs C >= 2");
  if (expert_strength < 0 || expert_strength > num_classes)
    throw std::invalid_argument("expert strength K must satisfy 0 <= K <= C");
  Rng rng(seed, Stream::Data);
  const auto classes = static_cast<std::size_t>(num_classes);

  std::vector<double> centres(classes * d);
  for (double& v : centres) v = options.mean_spread * rng.normal();

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
  rng.shuffle(std::span<int>(labels));

  std::vector<double> x(n * d);
  std::vector<int> human(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    for (std::size_t j = 0; j < d; ++j)
      x[i * d + j] = centres[y * d + j] + options.blob_std * rng.normal();
    human[i] = labels[i] < expert_strength
                   ? labels[i]
                   : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
  }
  return DeferDataset(std::move(x), d, std::move(labels), std::move(human), num_classes);
}

void write_planted_metadata(std::ostream& out, const SyntheticConfig& config,
                            const HalfspacePair& planted) {
  auto join = [](const std::vector<double>& w) {
    std::string s;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (j) s += ',';
      s += format_double(w[j]);
    }
    return s;
  };
  out << "seed=" << config.seed << '\n'
      << "n=" << config.n << '\n'
      << "d=" << config.d << '\n'
      << "distribution="
      << (config.distribution == FeatureDistribution::Uniform ? "uniform" : "gaussian") << '\n'
      << "U=" << format_double(config.box_u) << '\n'
      << "clusters=" << config.clusters << '\n'
      << "classes=" << config.num_classes << '\n'
      << "p_m=" << format_double(config.p_m) << '\n'
      << "p_h0=" << format_double(config.p_h0) << '\n'
      << "p_h1=" << format_double(config.p_h1) << '\n';
  for (std::size_t k = 0; k < planted.classifier.size(); ++k)
    out << "classifier" << k << '=' << join(planted.classifier[k]) << '\n';
  out << "rejector=" << join(planted.rejector) << '\n';
}

}  // namespace deferlab
