#pragma once
/**
 * @file net.hpp
 * @brief Fully connected tanh network (t, x, v) -> (f, h) with exact input
 *        derivatives and reverse-mode parameter gradients.
 *
 * Input derivatives are propagated forward as tangents alongside the values,
 * one tangent per input coordinate. Parameter gradients run a reverse sweep
 * through both the value and the tangent recursions, so a loss may depend on
 * f, h and the first derivatives d_t f, d_x f, d_v f, d_v h.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kfp/domain.hpp"

namespace kfp {

/// Reported when a loss or gradient evaluates to NaN or infinity.
class NonFiniteError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Architecture {
  std::vector<int> layer_sizes;

  /// 3-128-256-128-2.
  static Architecture standard();
  /// Throws ConfigError unless sizes are positive, start with 3, end with 2
  /// and include at least one hidden layer.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

struct NetParams {
  std::vector<int> layer_sizes;
  std::uint64_t seed = 0;
  std::vector<DenseLayer> layers;

  static NetParams zeros(const Architecture& arch);
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Flat view in checkpoint order: per layer, row-major weights then biases.
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
};

/// Gradient with the shape of a NetParams.
struct ParamGrad {
  std::vector<DenseLayer> layers;

  static ParamGrad zeros_like(const NetParams& params);
  ParamGrad& operator+=(const ParamGrad& other);
  ParamGrad& operator*=(double scale);
  bool all_finite() const;
  double at(std::size_t flat_index) const;
  double max_abs() const;
};

struct NetOutput {
  double f;
  double h;
};

struct EvalWithDerivs {
  double f = 0.0;
  double h = 0.0;
  double df_dt = 0.0;
  double df_dx = 0.0;
  double df_dv = 0.0;
  double dh_dv = 0.0;
};

enum class DerivMode { ValuesOnly, WithInputDerivs };

/// Glorot-uniform weights, zero biases; deterministic in seed.
NetParams init_network(const Architecture& arch, std::uint64_t seed);

NetOutput forward(const NetParams& params, double t, double x, double v);
EvalWithDerivs eval_with_derivs(const NetParams& params, double t, double x, double v);

/// Evaluates a batch of points. In ValuesOnly mode the derivative fields are 0.
std::vector<EvalWithDerivs> eval_batch(const NetParams& params, std::span<const Point> points, DerivMode mode);

/// f values only on a batch of points.
Eigen::VectorXd eval_f(const NetParams& params, std::span<const Point> points);

/**
 * Scalar loss over a batch of network evaluations. Returns the loss and
 * writes dLoss/d(field) for every point into `seeds` (same length as
 * `evals`, zero-initialized by the caller).
 */
using LossEvaluator =
    std::function<double(std::span<const EvalWithDerivs> evals, std::span<EvalWithDerivs> seeds)>;

struct GradientResult {
  double loss;
  ParamGrad grad;
};

/// Loss and its gradient with respect to every weight and bias.
/// Throws NonFiniteError if the loss or the gradient is not finite.
GradientResult param_gradient(const NetParams& params, std::span<const Point> points, DerivMode mode,
                              const LossEvaluator& loss);

struct GradCheckOptions {
  /// Finite-difference step for the fourth-order central stencil.
  double step = 1e-3;
  /// Number of parameters to probe; 0 checks every parameter.
  std::size_t max_params = 0;
  std::uint64_t seed = 7;
};

/**
 * Max relative error |analytic - fd| / (|analytic| + 1e-8) over the probed
 * parameter gradients of L = sum_p sum_fields field^2 / 2 and over the input
 * derivatives d_t f, d_x f, d_v f, d_v h at each point of the batch.
 */
double grad_check(const NetParams& params, std::span<const Point> batch, const GradCheckOptions& options = {});

}  // namespace kfp
