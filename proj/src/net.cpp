#include "kfp/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kfp {

namespace {

constexpr int kInputs = 3;
constexpr int kTangents = 3;  // d/dt, d/dx, d/dv

using Eigen::Index;
using Eigen::MatrixXd;

// Forward activations kept for the reverse sweep. Column blocks of width B:
// [values | d/dt | d/dx | d/dv] when tangents are carried, [values] otherwise.
struct Tape {
  Index batch = 0;
  bool tangents = false;
  MatrixXd input;                  // 3 x B
  std::vector<MatrixXd> hidden;    // post-activation blocks per hidden layer
  std::vector<MatrixXd> pre_tan;   // pre-activation tangents (m x 3B), first layer m x 3
  MatrixXd output;                 // 2 x B or 2 x 4B
};

MatrixXd to_input_matrix(std::span<const Point> points) {
  MatrixXd x(kInputs, static_cast<Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    x(0, static_cast<Index>(i)) = points[i].t;
    x(1, static_cast<Index>(i)) = points[i].x;
    x(2, static_cast<Index>(i)) = points[i].v;
  }
  return x;
}

Tape run_forward(const NetParams& params, std::span<const Point> points, bool tangents) {
  Tape tape;
  tape.batch = static_cast<Index>(points.size());
  tape.tangents = tangents;
  tape.input = to_input_matrix(points);
  const Index B = tape.batch;
  const std::size_t n_layers = params.layers.size();

  // First affine map; its input tangents are the unit vectors, so the
  // pre-activation tangent in direction d is weight column d for every point.
  const DenseLayer& first = params.layers.front();
  MatrixXd pre = first.weight * tape.input;
  pre.colwise() += first.bias;

  MatrixXd block;
  if (tangents) {
    block.resize(pre.rows(), 4 * B);
    block.leftCols(B) = pre;
    for (int d = 0; d < kTangents; ++d)
      block.middleCols((d + 1) * B, B) = first.weight.col(d).replicate(1, B);
  } else {
    block = std::move(pre);
  }

  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    // Activate: y = tanh(a), dy = (1 - y^2) * da.
    MatrixXd z(block.rows(), block.cols());
    z.leftCols(B) = block.leftCols(B).array().tanh().matrix();
    if (tangents) {
      const auto slope = (1.0 - z.leftCols(B).array().square()).eval();
      for (int d = 0; d < kTangents; ++d)
        z.middleCols((d + 1) * B, B) = (slope * block.middleCols((d + 1) * B, B).array()).matrix();
      if (l == 0)
        tape.pre_tan.push_back(first.weight.leftCols(kTangents));
      else
        tape.pre_tan.push_back(block.rightCols(3 * B));
    }
    tape.hidden.push_back(std::move(z));

    const DenseLayer& next = params.layers[l + 1];
    block = next.weight * tape.hidden.back();
    block.leftCols(B).colwise() += next.bias;
  }
  tape.output = std::move(block);
  return tape;
}

// Reverse sweep. `seed` has the shape of tape.output.
void run_backward(const NetParams& params, const Tape& tape, MatrixXd seed, ParamGrad& grad) {
  const Index B = tape.batch;
  const std::size_t n_layers = params.layers.size();

  // Output layer is affine; its adjoint is the seed itself.
  MatrixXd adj = std::move(seed);
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    DenseLayer& g = grad.layers[l];
    g.bias.noalias() += adj.leftCols(B).rowwise().sum();
    if (l == 0) {
      g.weight.noalias() += adj.leftCols(B) * tape.input.transpose();
      if (tape.tangents)
        for (int d = 0; d < kTangents; ++d) g.weight.col(d) += adj.middleCols((d + 1) * B, B).rowwise().sum();
      break;
    }
    const MatrixXd& z = tape.hidden[l - 1];
    g.weight.noalias() += adj * z.transpose();
    MatrixXd up = layer.weight.transpose() * adj;

    // Back through the activation of hidden layer l-1.
    const auto y = z.leftCols(B).array();
    const auto slope = (1.0 - y.square()).eval();
    MatrixXd pre_adj(up.rows(), up.cols());
    if (tape.tangents) {
      Eigen::ArrayXXd slope_adj = Eigen::ArrayXXd::Zero(up.rows(), B);
      const MatrixXd& pre_tan = tape.pre_tan[l - 1];
      for (int d = 0; d < kTangents; ++d) {
        const auto up_d = up.middleCols((d + 1) * B, B).array();
        pre_adj.middleCols((d + 1) * B, B) = (slope * up_d).matrix();
        if (l - 1 == 0)
          slope_adj += up_d.colwise() * pre_tan.col(d).array();
        else
          slope_adj += up_d * pre_tan.middleCols(d * B, B).array();
      }
      pre_adj.leftCols(B) = ((up.leftCols(B).array() - 2.0 * y * slope_adj) * slope).matrix();
    } else {
      pre_adj = (up.array() * slope).matrix();
    }
    adj = std::move(pre_adj);
  }
}

std::vector<EvalWithDerivs> unpack(const Tape& tape) {
  const Index B = tape.batch;
  std::vector<EvalWithDerivs> out(static_cast<std::size_t>(B));
  for (Index i = 0; i < B; ++i) {
    EvalWithDerivs& e = out[static_cast<std::size_t>(i)];
    e.f = tape.output(0, i);
    e.h = tape.output(1, i);
    if (tape.tangents) {
      e.df_dt = tape.output(0, B + i);
      e.df_dx = tape.output(0, 2 * B + i);
      e.df_dv = tape.output(0, 3 * B + i);
      e.dh_dv = tape.output(1, 3 * B + i);
    }
  }
  return out;
}

MatrixXd pack_seed(const Tape& tape, std::span<const EvalWithDerivs> seeds) {
  const Index B = tape.batch;
  MatrixXd seed = MatrixXd::Zero(2, tape.tangents ? 4 * B : B);
  for (Index i = 0; i < B; ++i) {
    const EvalWithDerivs& s = seeds[static_cast<std::size_t>(i)];
    seed(0, i) = s.f;
    seed(1, i) = s.h;
    if (tape.tangents) {
      seed(0, B + i) = s.df_dt;
      seed(0, 2 * B + i) = s.df_dx;
      seed(0, 3 * B + i) = s.df_dv;
      seed(1, 3 * B + i) = s.dh_dv;
    }
  }
  return seed;
}

// Locates flat parameter `index` in checkpoint order.
template <class Layers>
auto& locate(Layers& layers, std::size_t index) {
  for (auto& layer : layers) {
    const auto n_weight = static_cast<std::size_t>(layer.weight.size());
    if (index < n_weight) {
      const auto cols = static_cast<std::size_t>(layer.weight.cols());
      return layer.weight(static_cast<Index>(index / cols), static_cast<Index>(index % cols));
    }
    index -= n_weight;
    const auto n_bias = static_cast<std::size_t>(layer.bias.size());
    if (index < n_bias) return layer.bias(static_cast<Index>(index));
    index -= n_bias;
  }
  throw std::out_of_range("parameter index out of range");
}

double half_sum_squares(std::span<const EvalWithDerivs> evals, std::span<EvalWithDerivs> seeds) {
  double loss = 0.0;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const EvalWithDerivs& e = evals[i];
    loss += 0.5 * (e.f * e.f + e.h * e.h + e.df_dt * e.df_dt + e.df_dx * e.df_dx + e.df_dv * e.df_dv +
                   e.dh_dv * e.dh_dv);
    seeds[i] = e;
  }
  return loss;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
}

// Fourth-order central difference of `fn` at 0 with step h.
template <class Fn>
double central_difference(Fn&& fn, double h) {
  return (-fn(2.0 * h) + 8.0 * fn(h) - 8.0 * fn(-h) + fn(-2.0 * h)) / (12.0 * h);
}

}  // namespace

Architecture Architecture::standard() { return {{3, 128, 256, 128, 2}}; }

void Architecture::validate() const {
  if (layer_sizes.size() < 3) throw ConfigError("architecture needs at least one hidden layer");
  if (layer_sizes.front() != 3) throw ConfigError("architecture must take 3 inputs (t, x, v)");
  if (layer_sizes.back() != 2) throw ConfigError("architecture must produce 2 outputs (f, h)");
  for (int n : layer_sizes)
    if (n <= 0) throw ConfigError("layer sizes must be positive");
}

NetParams NetParams::zeros(const Architecture& arch) {
  arch.validate();
  NetParams p;
  p.layer_sizes = arch.layer_sizes;
  for (std::size_t l = 1; l < arch.layer_sizes.size(); ++l) {
    p.layers.push_back({MatrixXd::Zero(arch.layer_sizes[l], arch.layer_sizes[l - 1]),
                        Eigen::VectorXd::Zero(arch.layer_sizes[l])});
  }
  return p;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

bool NetParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

double& NetParams::at(std::size_t flat_index) { return locate(layers, flat_index); }
double NetParams::at(std::size_t flat_index) const { return locate(layers, flat_index); }

ParamGrad ParamGrad::zeros_like(const NetParams& params) {
  ParamGrad g;
  for (const auto& layer : params.layers)
    g.layers.push_back({MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  return g;
}

ParamGrad& ParamGrad::operator+=(const ParamGrad& other) {
  if (other.layers.size() != layers.size()) throw std::invalid_argument("gradient shape mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

ParamGrad& ParamGrad::operator*=(double scale) {
  for (auto& layer : layers) {
    layer.weight *= scale;
    layer.bias *= scale;
  }
  return *this;
}

bool ParamGrad::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

double ParamGrad::at(std::size_t flat_index) const { return locate(layers, flat_index); }

double ParamGrad::max_abs() const {
  double m = 0.0;
  for (const auto& layer : layers) {
    if (layer.weight.size() > 0) m = std::max(m, layer.weight.cwiseAbs().maxCoeff());
    if (layer.bias.size() > 0) m = std::max(m, layer.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

NetParams init_network(const Architecture& arch, std::uint64_t seed) {
  NetParams p = NetParams::zeros(arch);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (auto& layer : p.layers) {
    const double fan = static_cast<double>(layer.weight.rows() + layer.weight.cols());
    const double bound = std::sqrt(6.0 / fan);
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill keeps the draw order identical to the checkpoint order.
    for (Index r = 0; r < layer.weight.rows(); ++r)
      for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
  }
  return p;
}

NetOutput forward(const NetParams& params, double t, double x, double v) {
  const Point p{t, x, v};
  const Tape tape = run_forward(params, {&p, 1}, false);
  return {tape.output(0, 0), tape.output(1, 0)};
}

EvalWithDerivs eval_with_derivs(const NetParams& params, double t, double x, double v) {
  const Point p{t, x, v};
  return unpack(run_forward(params, {&p, 1}, true)).front();
}

std::vector<EvalWithDerivs> eval_batch(const NetParams& params, std::span<const Point> points, DerivMode mode) {
  if (points.empty()) return {};
  return unpack(run_forward(params, points, mode == DerivMode::WithInputDerivs));
}

Eigen::VectorXd eval_f(const NetParams& params, std::span<const Point> points) {
  if (points.empty()) return {};
  return run_forward(params, points, false).output.row(0).transpose();
}

GradientResult param_gradient(const NetParams& params, std::span<const Point> points, DerivMode mode,
                              const LossEvaluator& loss) {
  GradientResult result{0.0, ParamGrad::zeros_like(params)};
  if (points.empty()) {
    result.loss = loss({}, {});
    return result;
  }
  const Tape tape = run_forward(params, points, mode == DerivMode::WithInputDerivs);
  const std::vector<EvalWithDerivs> evals = unpack(tape);
  std::vector<EvalWithDerivs> seeds(evals.size());
  result.loss = loss(evals, seeds);
  if (!std::isfinite(result.loss)) throw NonFiniteError("loss is not finite");
  run_backward(params, tape, pack_seed(tape, seeds), result.grad);
  if (!result.grad.all_finite()) throw NonFiniteError("gradient is not finite");
  return result;
}

double grad_check(const NetParams& params, std::span<const Point> batch, const GradCheckOptions& options) {
  double worst = 0.0;

  const GradientResult analytic = param_gradient(params, batch, DerivMode::WithInputDerivs, half_sum_squares);
  std::vector<std::size_t> probe(params.parameter_count());
  std::iota(probe.begin(), probe.end(), std::size_t{0});
  if (options.max_params > 0 && options.max_params < probe.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(probe.begin(), probe.end(), rng);
    probe.resize(options.max_params);
  }

  NetParams work = params;
  auto loss_at = [&](std::size_t index, double delta) {
    const double saved = work.at(index);
    work.at(index) = saved + delta;
    const auto evals = eval_batch(work, batch, DerivMode::WithInputDerivs);
    work.at(index) = saved;
    std::vector<EvalWithDerivs> unused(evals.size());
    return half_sum_squares(evals, unused);
  };
  for (std::size_t index : probe) {
    const double numeric = central_difference([&](double d) { return loss_at(index, d); }, options.step);
    worst = std::max(worst, relative_error(analytic.grad.at(index), numeric));
  }

  for (const Point& p : batch) {
    const EvalWithDerivs e = eval_with_derivs(params, p.t, p.x, p.v);
    const double h = options.step;
    const double ft = central_difference([&](double d) { return forward(params, p.t + d, p.x, p.v).f; }, h);
    const double fx = central_difference([&](double d) { return forward(params, p.t, p.x + d, p.v).f; }, h);
    const double fv = central_difference([&](double d) { return forward(params, p.t, p.x, p.v + d).f; }, h);
    const double hv = central_difference([&](double d) { return forward(params, p.t, p.x, p.v + d).h; }, h);
    worst = std::max({worst, relative_error(e.df_dt, ft), relative_error(e.df_dx, fx),
                      relative_error(e.df_dv, fv), relative_error(e.dh_dv, hv)});
  }
  return worst;
}

}  // namespace kfp
