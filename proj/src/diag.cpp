#include "kfp/diag.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kfp {

namespace {

double spacing(const std::vector<double>& nodes, const char* axis) {
  if (nodes.size() < 2) throw ConfigError(std::string("snapshot ") + axis + "-grid needs at least 2 nodes");
  return nodes[1] - nodes[0];
}

}  // namespace

double FieldSnapshot::dx() const { return spacing(x, "x"); }
double FieldSnapshot::dv() const { return spacing(v, "v"); }

void FieldSnapshot::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(x.size()) || values.cols() != static_cast<Eigen::Index>(v.size()))
    throw ConfigError("snapshot values do not match its grids");
  for (const auto* grid : {&x, &v})
    for (std::size_t i = 1; i < grid->size(); ++i)
      if (!((*grid)[i] > (*grid)[i - 1])) throw ConfigError("snapshot grids must be strictly increasing");
}

FieldSnapshot snapshot(const PointEvaluator& f, double t, std::span<const double> x, std::span<const double> v) {
  FieldSnapshot s{t, {x.begin(), x.end()}, {v.begin(), v.end()}, Eigen::MatrixXd(x.size(), v.size())};
  for (std::size_t j = 0; j < x.size(); ++j)
    for (std::size_t k = 0; k < v.size(); ++k)
      s.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = f(t, x[j], v[k]);
  return s;
}

FieldSnapshot snapshot(const NetParams& params, double t, std::span<const double> x, std::span<const double> v) {
  std::vector<Point> points;
  points.reserve(x.size() * v.size());
  for (double xj : x)
    for (double vk : v) points.push_back({t, xj, vk});
  const Eigen::VectorXd f = eval_f(params, points);
  FieldSnapshot s{t, {x.begin(), x.end()}, {v.begin(), v.end()}, Eigen::MatrixXd(x.size(), v.size())};
  // points are x-major, so f is the row-major flattening of values.
  s.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      f.data(), static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(v.size()));
  return s;
}

double riemann_integral(const FieldSnapshot& s, const std::function<double(double x, double v)>& weight) {
  s.validate();
  double sum = 0.0;
  for (std::size_t j = 0; j < s.x.size(); ++j)
    for (std::size_t k = 0; k < s.v.size(); ++k)
      sum += weight(s.x[j], s.v[k]) * s.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  return sum * s.dx() * s.dv();
}

MacroRecord macroscopic(const FieldSnapshot& s, double sigma, double beta, double m_ref) {
  s.validate();
  const double cell = s.dx() * s.dv();
  MacroRecord r;
  r.t = s.t;
  double mass = 0.0, abs_sum = 0.0, ke = 0.0, ent = 0.0;
  for (Eigen::Index j = 0; j < s.values.rows(); ++j) {
    for (Eigen::Index k = 0; k < s.values.cols(); ++k) {
      const double f = s.values(j, k);
      const double v = s.v[static_cast<std::size_t>(k)];
      mass += f;
      abs_sum += std::abs(f);
      ke += 0.5 * v * v * f;
      ent -= f * std::log(std::max(f, 0.0) + kEntropyOffset);
    }
  }
  r.mass = mass * cell;
  r.mean_abs = abs_sum / static_cast<double>(s.values.size());
  r.kinetic_energy = ke * cell;
  r.entropy = ent * cell;
  r.l_inf = s.values.size() > 0 ? s.values.cwiseAbs().maxCoeff() : 0.0;
  if (beta > 0.0) {
    const double temperature = sigma / beta;
    r.free_energy = r.kinetic_energy - temperature * r.entropy;
    if (!(m_ref > 0.0)) throw ConfigError("relative entropy needs a positive reference mass");
    r.lyapunov = -r.entropy + r.kinetic_energy / temperature +
                 std::log(kDomainLength * std::sqrt(2.0 * std::numbers::pi * temperature) / m_ref) * r.mass;
  }
  return r;
}

std::vector<double> truncate_profile(std::span<const double> values, double truncation) {
  std::vector<double> out(values.begin(), values.end());
  for (double& f : out)
    if (f < truncation) f = 0.0;
  return out;
}

std::vector<double> slice_pointwise(const PointEvaluator& f, double t, double x, std::span<const double> v_grid,
                                    double truncation) {
  std::vector<double> raw;
  raw.reserve(v_grid.size());
  for (double v : v_grid) raw.push_back(f(t, x, v));
  return truncate_profile(raw, truncation);
}

std::vector<MacroRecord> time_series(const std::function<FieldSnapshot(double)>& snap_at, const Problem& problem,
                                     std::span<const double> times, double m_ref) {
  std::vector<MacroRecord> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t < 0.0 || t > problem.t_end) throw ConfigError("diagnostic time outside [0, T]");
    out.push_back(macroscopic(snap_at(t), problem.sigma, problem.beta, m_ref));
  }
  return out;
}

std::vector<MacroRecord> time_series(const PointEvaluator& f, const Problem& problem, std::span<const double> times,
                                     std::span<const double> x, std::span<const double> v, double m_ref) {
  return time_series([&](double t) { return snapshot(f, t, x, v); }, problem, times, m_ref);
}

FieldError field_error(const FieldSnapshot& a, const FieldSnapshot& b) {
  a.validate();
  b.validate();
  if (a.x != b.x || a.v != b.v) throw ConfigError("field_error: snapshots live on different grids");
  const Eigen::MatrixXd diff = a.values - b.values;
  return {std::sqrt(diff.squaredNorm() * a.dx() * a.dv()), diff.size() > 0 ? diff.cwiseAbs().maxCoeff() : 0.0};
}

}  // namespace kfp
