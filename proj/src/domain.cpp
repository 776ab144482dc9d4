#include "kfp/domain.hpp"

#include <cmath>
#include <numbers>

namespace kfp {

namespace {

// Grid nodes that should sit on an open-interval edge (e.g. x = -0.9 built as
// -1 + 5 * 0.02) carry rounding noise; treat them as on the edge.
constexpr double kEdgeTol = 1e-13;

bool strictly_inside(double value, double half_width) {
  return std::abs(value) < half_width * (1.0 - kEdgeTol);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double eval_initial(const InitialCondition& ic, double x, double v) {
  return std::visit(
      overloaded{
          [&](const Cake&) { return strictly_inside(x, 0.9) && strictly_inside(v, 2.0) ? 1.0 : 0.0; },
          [&](const MShape&) {
            return strictly_inside(x, 0.9) && strictly_inside(v, 5.0) ? v * v / 25.0 : 0.0;
          },
          [&](const OscillatorySin&) {
            if (!strictly_inside(x, 0.9) || !strictly_inside(v, kVelocityMax) || v == 0.0) return 0.0;
            return std::sin(1.0 / (v * v));
          },
          [&](const CustomInitial& c) { return c.density(x, v); },
      },
      ic);
}

std::string initial_name(const InitialCondition& ic) {
  return std::visit(overloaded{
                        [](const Cake&) { return std::string("cake"); },
                        [](const MShape&) { return std::string("mshape"); },
                        [](const OscillatorySin&) { return std::string("sin"); },
                        [](const CustomInitial&) { return std::string("custom"); },
                    },
                    ic);
}

InitialCondition parse_initial(std::string_view name) {
  if (name == "cake") return Cake{};
  if (name == "mshape") return MShape{};
  if (name == "sin") return OscillatorySin{};
  throw ConfigError("unknown initial condition '" + std::string(name) + "'");
}

double inflow1(double /*t*/, double /*x*/, double v) { return std::abs(v) <= 5.0 ? 0.5 : 0.0; }

double inflow2(double /*t*/, double x, double v) {
  if (std::abs(v) > 5.0) return 0.0;
  return x < 0.0 ? 0.1 : 0.9;
}

double inflow3(double t, double /*x*/, double v) { return std::abs(v) <= 5.0 ? 0.5 * std::exp(-t) : 0.0; }

std::string boundary_name(const BoundaryCondition& bc) {
  return std::visit(overloaded{
                        [](const Specular&) { return std::string("specular"); },
                        [](const Diffusive&) { return std::string("diffusive"); },
                        [](const Periodic&) { return std::string("periodic"); },
                        [](const Absorbing&) { return std::string("absorbing"); },
                        [](const Inflow& in) { return in.name; },
                    },
                    bc);
}

BoundaryCondition parse_boundary(std::string_view name) {
  if (name == "specular") return Specular{};
  if (name == "diffusive") return Diffusive{};
  if (name == "periodic") return Periodic{};
  if (name == "absorbing") return Absorbing{};
  if (name == "inflow1") return Inflow{"inflow1", inflow1};
  if (name == "inflow2") return Inflow{"inflow2", inflow2};
  if (name == "inflow3") return Inflow{"inflow3", inflow3};
  throw ConfigError("unknown boundary condition '" + std::string(name) + "'");
}

bool conserves_mass(const BoundaryCondition& bc) {
  return std::holds_alternative<Specular>(bc) || std::holds_alternative<Periodic>(bc) ||
         std::holds_alternative<Diffusive>(bc);
}

double wall_maxwellian(double v) { return std::exp(-0.5 * v * v); }

double outward_normal(double x) {
  if (x == 1.0) return 1.0;
  if (x == -1.0) return -1.0;
  throw ConfigError("boundary position must be -1 or 1, got " + std::to_string(x));
}

BoundaryClass classify_boundary(double x, double v) {
  const double flux = outward_normal(x) * v;
  if (flux > 0.0) return BoundaryClass::Outgoing;
  if (flux < 0.0) return BoundaryClass::Incoming;
  return BoundaryClass::Grazing;
}

void Problem::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be > 0");
  if (v_domain.lo != -v_domain.hi || !(v_domain.hi > 0.0))
    throw ConfigError("velocity domain must be symmetric about 0");
  if (x_domain.lo != -1.0 || x_domain.hi != 1.0) throw ConfigError("spatial domain is fixed to (-1, 1)");
  if (const auto* in = std::get_if<Inflow>(&bc); in != nullptr && !in->profile)
    throw ConfigError("inflow boundary condition needs a profile");
  if (const auto* c = std::get_if<CustomInitial>(&ic); c != nullptr && !c->density)
    throw ConfigError("custom initial condition needs a density");
}

std::vector<double> uniform_nodes(Interval range, double h) {
  const double length = range.length();
  if (!(h > 0.0)) throw ConfigError("grid spacing must be > 0");
  if (h > length) throw ConfigError("grid spacing larger than its interval");
  const double ratio = length / h;
  const auto cells = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(cells)) > 1e-9 * ratio)
    throw ConfigError("grid spacing must divide its interval");
  if (cells < 2) throw ConfigError("grid needs at least 2 cells per interval");
  std::vector<double> nodes(cells + 1);
  const double n = static_cast<double>(cells);
  for (std::size_t i = 0; i <= cells; ++i) {
    const double k = static_cast<double>(i);
    nodes[i] = (range.lo * (n - k) + range.hi * k) / n;
  }
  return nodes;
}

GridSet make_grid(const Problem& problem, GridSpacing spacing) {
  problem.validate();
  GridSet grid;
  grid.spacing = spacing;
  grid.t_nodes = uniform_nodes({0.0, problem.t_end}, spacing.dt);
  grid.x_nodes = uniform_nodes(problem.x_domain, spacing.dx);
  grid.v_nodes = uniform_nodes(problem.v_domain, spacing.dv);

  grid.interior.reserve(grid.t_nodes.size() * grid.x_nodes.size() * grid.v_nodes.size());
  for (double t : grid.t_nodes)
    for (double x : grid.x_nodes)
      for (double v : grid.v_nodes) grid.interior.push_back({t, x, v});

  grid.initial.reserve(grid.x_nodes.size() * grid.v_nodes.size());
  for (double x : grid.x_nodes)
    for (double v : grid.v_nodes) grid.initial.push_back({0.0, x, v});

  grid.boundary.reserve(2 * grid.t_nodes.size() * grid.v_nodes.size());
  for (double t : grid.t_nodes)
    for (double x : {problem.x_domain.lo, problem.x_domain.hi})
      for (double v : grid.v_nodes) grid.boundary.push_back({t, x, v});
  return grid;
}

double maxwellian(double sigma, double beta, double total_mass, double v) {
  if (!(beta > 0.0)) throw ConfigError("maxwellian requires beta > 0");
  const double temperature = sigma / beta;
  return total_mass / (kDomainLength * std::sqrt(2.0 * std::numbers::pi * temperature)) *
         std::exp(-0.5 * v * v / temperature);
}

EquilibriumQuantities equilibrium_quantities(double sigma, double beta, double total_mass) {
  if (!(beta > 0.0)) throw ConfigError("equilibrium requires beta > 0");
  if (!(total_mass > 0.0)) throw ConfigError("equilibrium requires positive mass");
  const double temperature = sigma / beta;
  EquilibriumQuantities eq{};
  eq.kinetic_energy = sigma * total_mass / (2.0 * beta);
  eq.entropy = -total_mass * std::log(total_mass / (kDomainLength * std::sqrt(2.0 * std::numbers::pi * temperature))) +
               0.5 * total_mass;
  eq.free_energy = eq.kinetic_energy - temperature * eq.entropy;
  return eq;
}

Problem problem_from_json(const nlohmann::json& j) {
  Problem p;
  try {
    p.sigma = j.value("sigma", p.sigma);
    p.beta = j.value("beta", p.beta);
    p.t_end = j.value("t_end", p.t_end);
    p.ic = parse_initial(j.value("ic", std::string("cake")));
    p.bc = parse_boundary(j.value("bc", std::string("absorbing")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed problem config: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json problem_to_json(const Problem& problem) {
  return {{"sigma", problem.sigma},
          {"beta", problem.beta},
          {"t_end", problem.t_end},
          {"ic", initial_name(problem.ic)},
          {"bc", boundary_name(problem.bc)}};
}

GridSpacing grid_from_json(const nlohmann::json& j) {
  if (!j.contains("grid")) return {0.01, 0.02, 0.2};
  try {
    const auto& g = j.at("grid");
    return {g.value("dt", 0.01), g.value("dx", 0.02), g.value("dv", 0.2)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed grid config: ") + e.what());
  }
}

}  // namespace kfp
