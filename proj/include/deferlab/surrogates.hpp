#pragma once

// Deferral surrogate losses on a score vector g = (g_1..g_C, g_defer).
//
// L_RS, L_RS^alpha use log base 2; L_RS2 and the baselines use natural log.
// Every function returns the value and d loss / d g.

#include <span>
#include <vector>

namespace deferlab {

struct LossEval {
  double value = 0.0;
  std::vector<double> grad;
};

LossEval loss_rs(std::span<const double> g, int y, bool human_correct);
/// alpha * L_RS + (1 - alpha) * (-log2 softmax over the classes at y).
LossEval loss_rs_alpha(std::span<const double> g, int y, bool human_correct, double alpha);
LossEval loss_rs2(std::span<const double> g, int y, bool human_correct);
LossEval loss_ce_alpha(std::span<const double> g, int y, bool human_correct, double alpha);
LossEval loss_ova(std::span<const double> g, int y, bool human_correct);
/// Floor on the human likelihood inside the mixture-of-experts log.
inline constexpr double kMoeHumanFloor = 1e-6;
LossEval loss_moe(std::span<const double> g, int y, bool human_correct);

enum class SurrogateKind { RS, RS2, CE, OvA, MoE };

const char* to_string(SurrogateKind k);
/// alpha is used by RS and CE, ignored otherwise.
LossEval surrogate_loss(SurrogateKind kind, std::span<const double> g, int y, bool human_correct,
                        double alpha = 1.0);

/// Pointwise 0-1 system loss of the decision induced by scores:
/// defer iff g_defer >= max class score, else predict the argmax (lowest index on ties).
double induced_system_loss(std::span<const double> g, int y, bool human_correct);

}  // namespace deferlab
