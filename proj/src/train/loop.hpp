#pragma once

// Shared Adam loop for the surrogate trainers and the two-stage baselines.

#include <functional>
#include <limits>

#include "deferlab/rng.hpp"
#include "deferlab/train.hpp"

namespace deferlab::detail {

inline constexpr double kInfScore = std::numeric_limits<double>::infinity();

/// Mean loss over the batch; gradient written (not added) into grad.
using BatchLossGrad = std::function<double(const ScoreModel&, std::span<const std::size_t>, std::span<double>)>;
/// Validation score of a snapshot, higher is better.
using Score = std::function<double(const ScoreModel&)>;
/// Indices trained on this epoch; empty function means all points.
using EpochPool = std::function<std::vector<std::size_t>(const ScoreModel&)>;

/// Runs config.epochs epochs of shuffled mini-batch Adam from `model` and
/// returns the snapshot with the best score, earliest on ties.
ScoreModel run_adam(ScoreModel model, std::size_t n, const TrainConfig& config, std::uint64_t shuffle_stream,
                    const BatchLossGrad& loss_grad, const Score& score, const EpochPool& pool = {});

double softmax_ce(std::span<const double> g, int y, std::span<double> grad);
double logistic_loss(double z, bool target, double& dz);

}  // namespace deferlab::detail
