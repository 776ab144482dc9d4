#include "kfp/loss.hpp"

#include <cmath>
#include <map>

namespace kfp {

namespace {

void require_nonempty(std::span<const Point> points, const char* what) {
  if (points.empty()) throw ConfigError(std::string(what) + ": empty batch");
}

// Each term returns its unweighted value and, when `seeds` is non-empty, adds
// scale * d(term)/d(field) into the seeds.

double ge_term(std::span<const Point> points, std::span<const EvalWithDerivs> evals,
               std::span<EvalWithDerivs> seeds, double scale, double sigma, double beta) {
  const double n = static_cast<double>(points.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = points[i].v;
    const auto [r1, r2] = residual_ge(evals[i], v, sigma, beta);
    sum += r1 * r1 + r2 * r2;
    if (seeds.empty()) continue;
    const double a1 = scale * 2.0 * r1 / n;
    const double a2 = scale * 2.0 * r2 / n;
    EvalWithDerivs& s = seeds[i];
    s.df_dt += a1;
    s.df_dx += a1 * v;
    s.dh_dv += -a1 * sigma;
    s.f += -a1 * beta;
    s.df_dv += -a1 * beta * v - a2;
    s.h += a2;
  }
  return sum / n;
}

double mass_term(std::span<const Point> points, std::span<const EvalWithDerivs> evals,
                 std::span<EvalWithDerivs> seeds, double scale) {
  struct Slice {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<double, Slice> slices;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Slice& s = slices[points[i].t];
    s.sum += evals[i].df_dt;
    ++s.count;
  }
  const double n_slices = static_cast<double>(slices.size());
  double loss = 0.0;
  for (const auto& [t, s] : slices) {
    const double mean = s.sum / static_cast<double>(s.count);
    loss += mean * mean;
  }
  if (!seeds.empty()) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Slice& s = slices.at(points[i].t);
      const double count = static_cast<double>(s.count);
      seeds[i].df_dt += scale * 2.0 * (s.sum / count) / (n_slices * count);
    }
  }
  return loss / n_slices;
}

double ic_term(std::span<const Point> points, std::span<const EvalWithDerivs> evals,
               std::span<EvalWithDerivs> seeds, double scale, const InitialCondition& ic) {
  const double n = static_cast<double>(points.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double diff = evals[i].f - eval_initial(ic, points[i].x, points[i].v);
    sum += diff * diff;
    if (!seeds.empty()) seeds[i].f += scale * 2.0 * diff / n;
  }
  return sum / n;
}

// Boundary loss plan: the incoming points come first in `points`, followed by
// whatever extra network evaluations the targets need. `partners[i]` lists
// (index into points, coefficient) pairs whose weighted f-sum forms the
// target of incoming point i; `fixed[i]` is a data target added on top.
struct BoundaryPlan {
  std::vector<Point> points;
  std::size_t n_incoming = 0;
  std::vector<double> fixed;
  std::vector<std::vector<std::pair<std::size_t, double>>> partners;
};

BoundaryPlan plan_boundary(std::span<const Point> boundary, const Problem& problem, double dv) {
  BoundaryPlan plan;
  for (const Point& p : boundary)
    if (classify_boundary(p.x, p.v) == BoundaryClass::Incoming) plan.points.push_back(p);
  plan.n_incoming = plan.points.size();
  if (plan.n_incoming == 0) throw ConfigError("loss_bc: no incoming boundary points in batch");
  plan.fixed.assign(plan.n_incoming, 0.0);
  plan.partners.resize(plan.n_incoming);

  std::visit(
      [&](const auto& bc) {
        using T = std::decay_t<decltype(bc)>;
        if constexpr (std::is_same_v<T, Inflow>) {
          for (std::size_t i = 0; i < plan.n_incoming; ++i) {
            const Point& p = plan.points[i];
            plan.fixed[i] = bc.profile(p.t, p.x, p.v);
          }
        } else if constexpr (std::is_same_v<T, Specular>) {
          for (std::size_t i = 0; i < plan.n_incoming; ++i) {
            const Point p = plan.points[i];
            plan.partners[i].emplace_back(plan.points.size(), 1.0);
            plan.points.push_back({p.t, p.x, -p.v});
          }
        } else if constexpr (std::is_same_v<T, Periodic>) {
          for (std::size_t i = 0; i < plan.n_incoming; ++i) {
            const Point p = plan.points[i];
            plan.partners[i].emplace_back(plan.points.size(), 1.0);
            plan.points.push_back({p.t, -p.x, p.v});
          }
        } else if constexpr (std::is_same_v<T, Diffusive>) {
          // Outgoing flux at a wall: sum over outgoing grid velocities w of
          // f(t,x,w) |w| dv. One evaluation line per distinct (t, x).
          const std::vector<double> velocities = uniform_nodes(problem.v_domain, dv);
          std::map<std::pair<double, double>, std::vector<std::pair<std::size_t, double>>> lines;
          for (std::size_t i = 0; i < plan.n_incoming; ++i) {
            const Point p = plan.points[i];
            auto [it, inserted] = lines.try_emplace({p.t, p.x});
            if (inserted) {
              for (double w : velocities) {
                if (classify_boundary(p.x, w) != BoundaryClass::Outgoing) continue;
                it->second.emplace_back(plan.points.size(), std::abs(w) * dv);
                plan.points.push_back({p.t, p.x, w});
              }
            }
            const double profile = kDiffusiveNormalization * wall_maxwellian(p.v);
            for (auto [index, weight] : it->second) plan.partners[i].emplace_back(index, profile * weight);
          }
        }
        // Absorbing: zero target.
      },
      problem.bc);
  return plan;
}

double bc_term(const BoundaryPlan& plan, std::span<const EvalWithDerivs> evals, std::span<EvalWithDerivs> seeds,
               double scale) {
  const double n = static_cast<double>(plan.n_incoming);
  double sum = 0.0;
  for (std::size_t i = 0; i < plan.n_incoming; ++i) {
    double target = plan.fixed[i];
    for (auto [index, coeff] : plan.partners[i]) target += coeff * evals[index].f;
    const double diff = evals[i].f - target;
    sum += diff * diff;
    if (seeds.empty()) continue;
    const double a = scale * 2.0 * diff / n;
    seeds[i].f += a;
    for (auto [index, coeff] : plan.partners[i]) seeds[index].f -= a * coeff;
  }
  return sum / n;
}

}  // namespace

Batch full_batch(const GridSet& grid) {
  return {grid.interior, grid.initial, grid.boundary, grid.spacing.dv};
}

std::pair<double, double> residual_ge(const EvalWithDerivs& e, double v, double sigma, double beta) {
  const double r1 = e.df_dt + v * e.df_dx - sigma * e.dh_dv - beta * (e.f + v * e.df_dv);
  const double r2 = e.h - e.df_dv;
  return {r1, r2};
}

double loss_ge(const NetParams& params, std::span<const Point> interior, const Problem& problem) {
  require_nonempty(interior, "loss_ge");
  const auto evals = eval_batch(params, interior, DerivMode::WithInputDerivs);
  return ge_term(interior, evals, {}, 0.0, problem.sigma, problem.beta);
}

double loss_ic(const NetParams& params, std::span<const Point> initial, const InitialCondition& ic) {
  require_nonempty(initial, "loss_ic");
  const auto evals = eval_batch(params, initial, DerivMode::ValuesOnly);
  return ic_term(initial, evals, {}, 0.0, ic);
}

double loss_bc(const NetParams& params, std::span<const Point> boundary, const Problem& problem, double dv) {
  const BoundaryPlan plan = plan_boundary(boundary, problem, dv);
  const auto evals = eval_batch(params, plan.points, DerivMode::ValuesOnly);
  return bc_term(plan, evals, {}, 0.0);
}

double loss_mass(const NetParams& params, std::span<const Point> interior) {
  require_nonempty(interior, "loss_mass");
  const auto evals = eval_batch(params, interior, DerivMode::WithInputDerivs);
  return mass_term(interior, evals, {}, 0.0);
}

LossBreakdown loss_total(const NetParams& params, const Batch& batch, const Problem& problem,
                         const LossWeights& weights, ParamGrad* grad) {
  LossBreakdown out;
  const bool with_mass = conserves_mass(problem.bc) && weights.mass != 0.0;

  auto accumulate = [&](std::span<const Point> points, DerivMode mode, const LossEvaluator& evaluator) {
    if (grad != nullptr) {
      GradientResult r = param_gradient(params, points, mode, evaluator);
      *grad += r.grad;
    } else {
      const auto evals = eval_batch(params, points, mode);
      std::vector<EvalWithDerivs> unused;
      evaluator(evals, unused);
    }
  };

  if (weights.ge != 0.0 || with_mass) {
    require_nonempty(batch.interior, "loss_ge");
    accumulate(batch.interior, DerivMode::WithInputDerivs, [&](auto evals, auto seeds) {
      double value = 0.0;
      if (weights.ge != 0.0) {
        out.ge = ge_term(batch.interior, evals, seeds, weights.ge, problem.sigma, problem.beta);
        value += weights.ge * out.ge;
      }
      if (with_mass) {
        out.mass = mass_term(batch.interior, evals, seeds, weights.mass);
        value += weights.mass * out.mass;
      }
      return value;
    });
  }
  if (weights.ic != 0.0) {
    require_nonempty(batch.initial, "loss_ic");
    accumulate(batch.initial, DerivMode::ValuesOnly, [&](auto evals, auto seeds) {
      out.ic = ic_term(batch.initial, evals, seeds, weights.ic, problem.ic);
      return weights.ic * out.ic;
    });
  }
  if (weights.bc != 0.0) {
    const BoundaryPlan plan = plan_boundary(batch.boundary, problem, batch.dv);
    accumulate(plan.points, DerivMode::ValuesOnly, [&](auto evals, auto seeds) {
      out.bc = bc_term(plan, evals, seeds, weights.bc);
      return weights.bc * out.bc;
    });
  }
  out.total = weights.ge * out.ge + weights.ic * out.ic + weights.bc * out.bc + (with_mass ? weights.mass * out.mass : 0.0);
  if (!std::isfinite(out.total)) throw NonFiniteError("total loss is not finite");
  return out;
}

}  // namespace kfp
