#pragma once
/**
 * @file domain.hpp
 * @brief Problem definition for the 1D kinetic Fokker-Planck equation
 *
 *   d_t f + v d_x f = d_v (sigma d_v f + beta v f),   x in (-1,1), v in V,
 *
 * together with initial data, boundary conditions on the phase boundary
 * {-1,1} x V, uniform collocation grids and closed-form equilibrium values.
 */

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace kfp {

/// Raised for invalid configuration or violated preconditions.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct Interval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
};

/// Collocation point in (t, x, v).
struct Point {
  double t;
  double x;
  double v;
};

/// |Omega| for Omega = (-1, 1).
inline constexpr double kDomainLength = 2.0;
/// Half-width of the truncated velocity interval V = [-10, 10].
inline constexpr double kVelocityMax = 10.0;

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

/// 1 on (-0.9,0.9) x (-2,2), 0 elsewhere.
struct Cake {};
/// v^2/25 on (-0.9,0.9) x (-5,5), 0 elsewhere.
struct MShape {};
/// sin(1/v^2) on (-0.9,0.9) x (-10,10), 0 elsewhere and at v = 0.
struct OscillatorySin {};
struct CustomInitial {
  std::function<double(double x, double v)> density;
};

using InitialCondition = std::variant<Cake, MShape, OscillatorySin, CustomInitial>;

double eval_initial(const InitialCondition& ic, double x, double v);
std::string initial_name(const InitialCondition& ic);
InitialCondition parse_initial(std::string_view name);

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

struct Specular {};
struct Diffusive {};
struct Periodic {};
struct Absorbing {};
struct Inflow {
  std::string name;  // inflow1/inflow2/inflow3, or "custom"
  std::function<double(double t, double x, double v)> profile;
};

using BoundaryCondition = std::variant<Specular, Diffusive, Periodic, Absorbing, Inflow>;

std::string boundary_name(const BoundaryCondition& bc);
/// Accepts specular, diffusive, periodic, absorbing, inflow1, inflow2, inflow3.
BoundaryCondition parse_boundary(std::string_view name);
/// True for the families that conserve total mass (specular, periodic, diffusive).
bool conserves_mass(const BoundaryCondition& bc);

/// g = 1/2 on |v| <= 5 at both walls.
double inflow1(double t, double x, double v);
/// g = 1/10 at x = -1 and 9/10 at x = 1, on |v| <= 5.
double inflow2(double t, double x, double v);
/// g = exp(-t)/2 on |v| <= 5 at both walls.
double inflow3(double t, double x, double v);

/// Wall profile mu(v) = exp(-v^2/2) of the diffusive reflection.
double wall_maxwellian(double v);
/// Normalization (int_{v.n<0} mu |v.n| dv)^{-1} over the real line; exactly 1.
inline constexpr double kDiffusiveNormalization = 1.0;

enum class BoundaryClass { Incoming, Outgoing, Grazing };

/// Phase-boundary class of (x, v) with x = +-1. Throws ConfigError otherwise.
BoundaryClass classify_boundary(double x, double v);
/// Outward normal n_x at x = +-1.
double outward_normal(double x);

// ---------------------------------------------------------------------------
// Problem and grids
// ---------------------------------------------------------------------------

struct GridSpacing {
  double dt;
  double dx;
  double dv;
};

struct Problem {
  double sigma = 1.0;
  double beta = 1.0;
  double t_end = 5.0;
  Interval x_domain{-1.0, 1.0};
  Interval v_domain{-kVelocityMax, kVelocityMax};
  InitialCondition ic = Cake{};
  BoundaryCondition bc = Absorbing{};

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Uniform node coordinates lo, lo+h, ..., hi. Rejects h larger than the interval.
std::vector<double> uniform_nodes(Interval range, double h);

struct GridSet {
  std::vector<Point> interior;
  std::vector<Point> initial;   // t = 0 slice
  std::vector<Point> boundary;  // x = -1 and x = 1 slices
  GridSpacing spacing;
  std::vector<double> t_nodes;
  std::vector<double> x_nodes;
  std::vector<double> v_nodes;
};

/// Closed uniform grids over [0,T] x [-1,1] x V. Interior points are ordered
/// t-major, then x, then v.
GridSet make_grid(const Problem& problem, GridSpacing spacing);

// ---------------------------------------------------------------------------
// Equilibrium
// ---------------------------------------------------------------------------

/// Global Maxwellian M / (|Omega| sqrt(2 pi sigma/beta)) exp(-beta v^2 / (2 sigma)).
double maxwellian(double sigma, double beta, double total_mass, double v);

struct EquilibriumQuantities {
  double kinetic_energy;
  double entropy;
  double free_energy;
};

EquilibriumQuantities equilibrium_quantities(double sigma, double beta, double total_mass);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Reads sigma, beta, t_end, ic, bc from a JSON object.
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const Problem& problem);
/// Reads {"dt","dx","dv"} from the "grid" key.
GridSpacing grid_from_json(const nlohmann::json& j);

}  // namespace kfp
