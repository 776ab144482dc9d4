#include "kfp/fdsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kfp {

namespace {

using Eigen::Index;

constexpr double kFrictionEps = 1e-12;

bool symmetric(const std::vector<double>& v) {
  for (std::size_t k = 0; k < v.size(); ++k)
    if (std::abs(v[k] + v[v.size() - 1 - k]) > 1e-9) return false;
  return true;
}

struct Ghosts {
  Eigen::VectorXd left;   // inflow values at x = -1 (used where v > 0)
  Eigen::VectorXd right;  // inflow values at x = +1 (used where v < 0)
};

Ghosts ghost_values(const FieldSnapshot& s, const Problem& problem) {
  const Index nx = s.values.rows();
  const Index nv = s.values.cols();
  const double dv = s.dv();
  Ghosts g{Eigen::VectorXd::Zero(nv), Eigen::VectorXd::Zero(nv)};
  std::visit(
      [&](const auto& bc) {
        using T = std::decay_t<decltype(bc)>;
        if constexpr (std::is_same_v<T, Specular>) {
          for (Index k = 0; k < nv; ++k) {
            g.left(k) = s.values(0, nv - 1 - k);
            g.right(k) = s.values(nx - 1, nv - 1 - k);
          }
        } else if constexpr (std::is_same_v<T, Periodic>) {
          g.left = s.values.row(nx - 1).transpose();
          g.right = s.values.row(0).transpose();
        } else if constexpr (std::is_same_v<T, Diffusive>) {
          // Re-emit the outgoing flux with the wall profile, normalized on the
          // discrete incoming half-grid so the wall flux balances exactly.
          // v = 0 carries no flux and is left out of both half sums.
          double out_left = 0.0, out_right = 0.0, norm_left = 0.0, norm_right = 0.0;
          for (Index k = 0; k < nv; ++k) {
            const double v = s.v[static_cast<std::size_t>(k)];
            const double mu = wall_maxwellian(v);
            if (v > 0.0) {
              out_right += v * s.values(nx - 1, k) * dv;
              norm_left += v * mu * dv;
            } else if (v < 0.0) {
              out_left += -v * s.values(0, k) * dv;
              norm_right += -v * mu * dv;
            }
          }
          for (Index k = 0; k < nv; ++k) {
            const double v = s.v[static_cast<std::size_t>(k)];
            if (v > 0.0) g.left(k) = wall_maxwellian(v) * out_left / norm_left;
            if (v < 0.0) g.right(k) = wall_maxwellian(v) * out_right / norm_right;
          }
        } else if constexpr (std::is_same_v<T, Inflow>) {
          for (Index k = 0; k < nv; ++k) {
            const double v = s.v[static_cast<std::size_t>(k)];
            if (v > 0.0) g.left(k) = bc.profile(s.t, -1.0, v);
            if (v < 0.0) g.right(k) = bc.profile(s.t, 1.0, v);
          }
        }
        // Absorbing: zero ghosts.
      },
      problem.bc);
  return g;
}

}  // namespace

FdGrid FdGrid::make(const Problem& problem, double dx, double dv) {
  FdGrid g;
  g.x = uniform_nodes(problem.x_domain, dx);
  g.v = uniform_nodes(problem.v_domain, dv);
  g.dx = dx;
  g.dv = dv;
  return g;
}

double cfl_dt(const FdGrid& grid, double sigma, double beta, double safety) {
  if (!(sigma > 0.0)) throw ConfigError("cfl_dt requires sigma > 0");
  const double v_max = std::max(std::abs(grid.v.front()), std::abs(grid.v.back()));
  return safety * std::min({grid.dx / v_max, grid.dv * grid.dv / (2.0 * sigma), 1.0 / (2.0 * beta + kFrictionEps)});
}

double stable_dt(const FdGrid& grid, double sigma, double beta, double safety) {
  if (!(sigma > 0.0)) throw ConfigError("stable_dt requires sigma > 0");
  const double v_max = std::max(std::abs(grid.v.front()), std::abs(grid.v.back()));
  const double rate = v_max / grid.dx + 2.0 * sigma / (grid.dv * grid.dv);
  return safety * std::min(1.0 / rate, 1.0 / (2.0 * beta + kFrictionEps));
}

FdState initial_state(const Problem& problem, const FdGrid& grid, int subcells) {
  if (subcells < 1) throw ConfigError("initial_state needs at least one subcell");
  FdState state{{0.0, grid.x, grid.v, Eigen::MatrixXd::Zero(grid.x.size(), grid.v.size())}};
  const double hx = grid.dx / subcells;
  const double hv = grid.dv / subcells;
  const double inv = 1.0 / (static_cast<double>(subcells) * subcells);
  for (std::size_t j = 0; j < grid.x.size(); ++j) {
    for (std::size_t k = 0; k < grid.v.size(); ++k) {
      double sum = 0.0;
      for (int a = 0; a < subcells; ++a)
        for (int b = 0; b < subcells; ++b)
          sum += eval_initial(problem.ic, grid.x[j] - 0.5 * grid.dx + (a + 0.5) * hx,
                              grid.v[k] - 0.5 * grid.dv + (b + 0.5) * hv);
      state.field.values(static_cast<Index>(j), static_cast<Index>(k)) = sum * inv;
    }
  }
  return state;
}

FdState step(const FdState& state, double dt, const Problem& problem) {
  const FieldSnapshot& s = state.field;
  s.validate();
  if (!symmetric(s.v)) throw ConfigError("finite-difference velocity grid must be symmetric");
  const double dx = s.dx();
  const double dv = s.dv();
  const double v_max = std::abs(s.v.back());
  const double limit =
      std::min({dx / v_max, dv * dv / (2.0 * problem.sigma), 1.0 / (2.0 * problem.beta + kFrictionEps)});
  if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) throw ConfigError("time step violates the CFL bound");

  const Index nx = s.values.rows();
  const Index nv = s.values.cols();
  const Eigen::MatrixXd& f = s.values;
  const Ghosts ghost = ghost_values(s, problem);
  Eigen::MatrixXd rate = Eigen::MatrixXd::Zero(nx, nv);

  // Transport: d_t f_j = -(Phi_{j+1/2} - Phi_{j-1/2}) / dx with upwind Phi.
  for (Index k = 0; k < nv; ++k) {
    const double v = s.v[static_cast<std::size_t>(k)];
    const double c = v / dx;
    if (v > 0.0) {
      rate(0, k) -= c * (f(0, k) - ghost.left(k));
      for (Index j = 1; j < nx; ++j) rate(j, k) -= c * (f(j, k) - f(j - 1, k));
    } else if (v < 0.0) {
      for (Index j = 0; j + 1 < nx; ++j) rate(j, k) -= c * (f(j + 1, k) - f(j, k));
      rate(nx - 1, k) -= c * (ghost.right(k) - f(nx - 1, k));
    }
  }

  // Fokker-Planck operator in conservative form.
  for (Index k = 0; k + 1 < nv; ++k) {
    const double v_face = 0.5 * (s.v[static_cast<std::size_t>(k)] + s.v[static_cast<std::size_t>(k + 1)]);
    for (Index j = 0; j < nx; ++j) {
      const double flux = problem.sigma * (f(j, k + 1) - f(j, k)) / dv +
                          problem.beta * v_face * 0.5 * (f(j, k) + f(j, k + 1));
      rate(j, k) += flux / dv;
      rate(j, k + 1) -= flux / dv;
    }
  }

  FdState next = state;
  next.field.values += dt * rate;
  next.field.t = s.t + dt;
  return next;
}

std::vector<FieldSnapshot> solve(const Problem& problem, const FdGrid& grid, std::span<const double> output_times,
                                 const FdSolveOptions& options) {
  problem.validate();
  std::vector<double> times(output_times.begin(), output_times.end());
  for (double t : times)
    if (t < 0.0 || t > problem.t_end) throw ConfigError("output time outside [0, T]");
  if (!std::is_sorted(times.begin(), times.end())) throw ConfigError("output times must be sorted");

  const double dt = stable_dt(grid, problem.sigma, problem.beta, options.safety);
  FdState state = initial_state(problem, grid, options.ic_subcells);
  std::vector<FieldSnapshot> out;
  out.reserve(times.size());
  for (double target : times) {
    const double slack = 1e-12 * std::max(1.0, target);
    while (state.time() < target - slack) {
      const double remaining = target - state.time();
      state = step(state, std::min(remaining, dt), problem);
      if (remaining <= dt) state.field.t = target;
      if (options.observer) options.observer(state);
    }
    state.field.t = std::max(state.field.t, target);
    out.push_back(state.field);
  }
  return out;
}

}  // namespace kfp
