#pragma once
// Helpers shared by the unit and acceptance tests.

#include <random>
#include <vector>

#include "kfp/domain.hpp"
#include "kfp/net.hpp"

namespace kfp::testing {

inline std::vector<Point> random_points(std::size_t n, std::uint64_t seed, double t_end = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> t(0.0, t_end), x(-1.0, 1.0), v(-10.0, 10.0);
  std::vector<Point> points(n);
  for (Point& p : points) p = {t(rng), x(rng), v(rng)};
  return points;
}

/// Random weights and biases (biases too, unlike init_network) so that no
/// derivative vanishes by construction.
inline NetParams random_params(const Architecture& arch, std::uint64_t seed, double scale = 0.5) {
  NetParams p = init_network(arch, seed);
  std::mt19937_64 rng(seed ^ 0xabcdefULL);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (DenseLayer& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] += 0.2 * u(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
  }
  return p;
}

/// Makes f and h even in v: the second half of the first hidden layer mirrors
/// the first half with the v weight negated, and the next layer weighs each
/// mirrored pair equally. Requires an even first hidden width.
inline NetParams make_v_even(NetParams p) {
  DenseLayer& first = p.layers[0];
  DenseLayer& second = p.layers[1];
  const Eigen::Index half = first.weight.rows() / 2;
  for (Eigen::Index j = 0; j < half; ++j) {
    first.weight.row(half + j) = first.weight.row(j);
    first.weight(half + j, 2) = -first.weight(j, 2);
    first.bias(half + j) = first.bias(j);
    second.weight.col(half + j) = second.weight.col(j);
  }
  return p;
}

/// Makes f and h even in x by the same mirroring on the x input.
inline NetParams make_x_even(NetParams p) {
  DenseLayer& first = p.layers[0];
  DenseLayer& second = p.layers[1];
  const Eigen::Index half = first.weight.rows() / 2;
  for (Eigen::Index j = 0; j < half; ++j) {
    first.weight.row(half + j) = first.weight.row(j);
    first.weight(half + j, 1) = -first.weight(j, 1);
    first.bias(half + j) = first.bias(j);
    second.weight.col(half + j) = second.weight.col(j);
  }
  return p;
}

/// Removes the dependence on input coordinate `column` (1 = x, 2 = v), which
/// makes the network exactly even in that coordinate, bit for bit.
inline NetParams drop_input(NetParams p, Eigen::Index column) {
  p.layers[0].weight.col(column).setZero();
  return p;
}

/// Network whose f output is the constant c and h is 0.
inline NetParams constant_network(double c) {
  NetParams p = NetParams::zeros({{3, 2, 2}});
  p.layers[1].bias(0) = c;
  return p;
}

}  // namespace kfp::testing
