#pragma once
/**
 * @file diag.hpp
 * @brief Riemann-sum diagnostics on sampled densities: mass, kinetic energy,
 *        entropy, free energy, relative entropy and sup norm.
 */

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kfp/domain.hpp"
#include "kfp/net.hpp"

namespace kfp {

/// Density values on a tensor (x, v) grid at one time. values(j, k) = f(x_j, v_k).
struct FieldSnapshot {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;
  Eigen::MatrixXd values;

  double dx() const;
  double dv() const;
  /// Throws ConfigError if shapes disagree or a grid is not strictly increasing.
  void validate() const;
};

using PointEvaluator = std::function<double(double t, double x, double v)>;

FieldSnapshot snapshot(const PointEvaluator& f, double t, std::span<const double> x, std::span<const double> v);
/// Network f output sampled on the grid in one batched pass.
FieldSnapshot snapshot(const NetParams& params, double t, std::span<const double> x, std::span<const double> v);

/// Entropy regularization inside the logarithm.
inline constexpr double kEntropyOffset = 1e-10;
/// Pointwise profiles below this value are shown as 0.
inline constexpr double kProfileTruncation = 0.005;

/// sum_{j,k} weight(x_j, v_k) f_jk dx dv.
double riemann_integral(const FieldSnapshot& s, const std::function<double(double x, double v)>& weight);

struct MacroRecord {
  double t = 0.0;
  double mass = 0.0;
  /// (1/N) sum |f|: the grid-mean L1 convention; mass ~ mean_abs * |Omega x V|.
  double mean_abs = 0.0;
  double kinetic_energy = 0.0;
  double entropy = 0.0;
  std::optional<double> free_energy;  // requires beta > 0
  std::optional<double> lyapunov;     // requires beta > 0
  double l_inf = 0.0;
};

/**
 * Macroscopic quantities of a snapshot. The relative entropy is
 * eta = -Ent + (beta/sigma) KE + log(|Omega| sqrt(2 pi sigma/beta) / m_ref) Mass.
 * With beta = 0 the free energy and eta are left empty.
 */
MacroRecord macroscopic(const FieldSnapshot& s, double sigma, double beta, double m_ref);

/// Sampled v-profile at (t, x) with values below the truncation mapped to 0.
std::vector<double> slice_pointwise(const PointEvaluator& f, double t, double x, std::span<const double> v_grid,
                                    double truncation = kProfileTruncation);

/// Applies the profile truncation to already sampled values.
std::vector<double> truncate_profile(std::span<const double> values, double truncation = kProfileTruncation);

/// One MacroRecord per time, sampling `snap_at(t)`.
std::vector<MacroRecord> time_series(const std::function<FieldSnapshot(double)>& snap_at, const Problem& problem,
                                     std::span<const double> times, double m_ref);

/// Convenience form sampling a point evaluator on the given (x, v) grid.
std::vector<MacroRecord> time_series(const PointEvaluator& f, const Problem& problem, std::span<const double> times,
                                     std::span<const double> x, std::span<const double> v, double m_ref);

/// sqrt(sum (a-b)^2 dx dv) and max |a-b| of two snapshots on the same grid.
struct FieldError {
  double l2;
  double linf;
};
FieldError field_error(const FieldSnapshot& a, const FieldSnapshot& b);

}  // namespace kfp
