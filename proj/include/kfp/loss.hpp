#pragma once
/**
 * @file loss.hpp
 * @brief Residual, initial, boundary and mass-conservation losses.
 *
 * All losses are uniform means over their collocation points. The second
 * order term d_vv f is carried by the auxiliary output h ~ d_v f, so the
 * residual needs first derivatives only.
 */

#include <span>
#include <utility>
#include <vector>

#include "kfp/domain.hpp"
#include "kfp/net.hpp"

namespace kfp {

struct LossBreakdown {
  double ge = 0.0;
  double ic = 0.0;
  double bc = 0.0;
  double mass = 0.0;
  double total = 0.0;
};

/// Multipliers of the four terms in the total. Terms with weight 0 are skipped
/// entirely and read 0 in the breakdown.
struct LossWeights {
  double ge = 1.0;
  double ic = 1.0;
  double bc = 1.0;
  double mass = 1.0;
};

/// Collocation points for one loss evaluation (a mini-batch or a full grid).
struct Batch {
  std::vector<Point> interior;
  std::vector<Point> initial;
  std::vector<Point> boundary;
  /// Velocity spacing of the grid the points come from; used by the
  /// diffusive wall flux quadrature.
  double dv = 0.2;
};

Batch full_batch(const GridSet& grid);

/// r1 = d_t f + v d_x f - sigma d_v h - beta (f + v d_v f),  r2 = h - d_v f.
std::pair<double, double> residual_ge(const EvalWithDerivs& e, double v, double sigma, double beta);

double loss_ge(const NetParams& params, std::span<const Point> interior, const Problem& problem);
double loss_ic(const NetParams& params, std::span<const Point> initial, const InitialCondition& ic);
/// Mean squared mismatch on the incoming points of `boundary`.
double loss_bc(const NetParams& params, std::span<const Point> boundary, const Problem& problem, double dv);
/// Mean over the distinct times in `interior` of (mean of d_t f over that slice)^2.
double loss_mass(const NetParams& params, std::span<const Point> interior);

/// Weighted total; the mass term is included only for mass-conserving
/// boundary conditions. When `grad` is non-null it receives d(total)/d(params).
LossBreakdown loss_total(const NetParams& params, const Batch& batch, const Problem& problem,
                         const LossWeights& weights = {}, ParamGrad* grad = nullptr);

}  // namespace kfp
