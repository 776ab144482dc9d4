#pragma once
/**
 * @file fdsolver.hpp
 * @brief Explicit finite-volume reference solver for the truncated problem.
 *
 * Every node (x_j, v_k) owns a cell of size dx * dv, so the discrete mass
 * sum_jk f_jk dx dv is exactly the quantity the conservative fluxes preserve.
 * Free transport uses first-order upwinding in x with boundary ghost values
 * per boundary family; the Fokker-Planck operator uses the flux
 *
 *   F_{k+1/2} = sigma (f_{k+1} - f_k) / dv + beta v_{k+1/2} (f_k + f_{k+1}) / 2
 *
 * with zero flux through |v| = v_max.
 */

#include <functional>
#include <span>
#include <vector>

#include "kfp/diag.hpp"
#include "kfp/domain.hpp"

namespace kfp {

struct FdGrid {
  std::vector<double> x;
  std::vector<double> v;
  double dx = 0.0;
  double dv = 0.0;

  /// Uniform nodes over [-1, 1] and the problem's velocity interval, endpoints included.
  static FdGrid make(const Problem& problem, double dx, double dv);
};

struct FdState {
  FieldSnapshot field;  // field.t is the accumulated time

  double time() const { return field.t; }
};

/// safety * min(dx / v_max, dv^2 / (2 sigma), 1 / (2 beta + eps)).
double cfl_dt(const FdGrid& grid, double sigma, double beta, double safety);

/// safety * min(1 / (v_max/dx + 2 sigma/dv^2), 1 / (2 beta + eps)). Explicit
/// Euler keeps nonnegative data nonnegative for dt up to this bound (given
/// dv <= 2 sigma / (beta v_max)); cfl_dt alone does not guarantee it once the
/// transport and diffusion rates add up to more than 1/dt.
double stable_dt(const FdGrid& grid, double sigma, double beta, double safety);

/// Cell averages of the initial condition (midpoint rule on subcells).
FdState initial_state(const Problem& problem, const FdGrid& grid, int subcells = 16);

/// One explicit Euler step. Throws ConfigError if dt exceeds the stability bound.
FdState step(const FdState& state, double dt, const Problem& problem);

/// Called after every step with the new state.
using FdObserver = std::function<void(const FdState&)>;

struct FdSolveOptions {
  double safety = 0.9;
  int ic_subcells = 16;
  FdObserver observer;
};

/// Snapshots at each requested time, stepping with stable_dt. Steps are shortened to land on output
/// times exactly; times must lie in [0, T].
std::vector<FieldSnapshot> solve(const Problem& problem, const FdGrid& grid, std::span<const double> output_times,
                                 const FdSolveOptions& options = {});

}  // namespace kfp
