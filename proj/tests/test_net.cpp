#include <cmath>
#include <limits>

#include <doctest.h>

#include "kfp/net.hpp"
#include "support.hpp"

using namespace kfp;
using kfp::testing::random_params;
using kfp::testing::random_points;

namespace {

const Architecture kToy{{3, 4, 2}};
const Architecture kSmall{{3, 8, 6, 2}};

double rel(double a, double b) { return std::abs(a - b) / (std::abs(a) + 1e-8); }

// Plain-loop evaluation of the network, independent of the batched engine.
NetOutput reference_forward(const NetParams& p, double t, double x, double v) {
  std::vector<double> a{t, x, v};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& L = p.layers[l];
    std::vector<double> z(static_cast<std::size_t>(L.weight.rows()));
    for (Eigen::Index i = 0; i < L.weight.rows(); ++i) {
      double s = L.bias(i);
      for (Eigen::Index j = 0; j < L.weight.cols(); ++j) s += L.weight(i, j) * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = l + 1 < p.layers.size() ? std::tanh(s) : s;
    }
    a = std::move(z);
  }
  return {a[0], a[1]};
}

// Long-double copy of the plain loop, for difference quotients.
std::pair<long double, long double> reference_forward_ld(const NetParams& p, long double t, long double x,
                                                         long double v) {
  std::vector<long double> a{t, x, v};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& L = p.layers[l];
    std::vector<long double> z(static_cast<std::size_t>(L.weight.rows()));
    for (Eigen::Index i = 0; i < L.weight.rows(); ++i) {
      long double s = L.bias(i);
      for (Eigen::Index j = 0; j < L.weight.cols(); ++j) s += L.weight(i, j) * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = l + 1 < p.layers.size() ? std::tanh(s) : s;
    }
    a = std::move(z);
  }
  return {a[0], a[1]};
}

double sum_f_squared(const NetParams& p, std::span<const Point> pts) {
  double s = 0.0;
  for (const Point& q : pts) {
    const double f = reference_forward(p, q.t, q.x, q.v).f;
    s += f * f;
  }
  return s;
}

LossEvaluator f_squared_loss(double scale = 1.0) {
  return [scale](std::span<const EvalWithDerivs> e, std::span<EvalWithDerivs> seeds) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      s += scale * e[i].f * e[i].f;
      seeds[i].f = 2.0 * scale * e[i].f;
    }
    return s;
  };
}

// Mixed loss touching every output and input derivative.
double mixed_terms(const EvalWithDerivs& e) {
  return e.f * e.f + 0.5 * e.h * e.h + e.df_dt * e.df_dx + std::pow(e.df_dv - e.h, 2) + 0.3 * e.dh_dv * e.f;
}

LossEvaluator mixed_loss() {
  return [](std::span<const EvalWithDerivs> e, std::span<EvalWithDerivs> seeds) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const EvalWithDerivs& q = e[i];
      s += mixed_terms(q);
      seeds[i].f = 2.0 * q.f + 0.3 * q.dh_dv;
      seeds[i].h = q.h - 2.0 * (q.df_dv - q.h);
      seeds[i].df_dt = q.df_dx;
      seeds[i].df_dx = q.df_dt;
      seeds[i].df_dv = 2.0 * (q.df_dv - q.h);
      seeds[i].dh_dv = 0.3 * q.f;
    }
    return s;
  };
}

}  // namespace

TEST_CASE("architecture validation") {
  CHECK_NOTHROW(Architecture::standard().validate());
  CHECK(Architecture::standard().layer_sizes == std::vector<int>{3, 128, 256, 128, 2});
  CHECK_THROWS_AS((Architecture{{3, 2}}.validate()), ConfigError);
  CHECK_THROWS_AS((Architecture{{2, 4, 2}}.validate()), ConfigError);
  CHECK_THROWS_AS((Architecture{{3, 4, 1}}.validate()), ConfigError);
  CHECK_THROWS_AS((Architecture{{3, 0, 2}}.validate()), ConfigError);
}

TEST_CASE("initialization") {
  const NetParams a = init_network(Architecture::standard(), 42);
  const NetParams b = init_network(Architecture::standard(), 42);
  const NetParams c = init_network(Architecture::standard(), 43);
  CHECK(a.parameter_count() == 3u * 128 + 128 + 128u * 256 + 256 + 256u * 128 + 128 + 128u * 2 + 2);
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.parameter_count(); ++i) {
    identical = identical && a.at(i) == b.at(i);
    differs = differs || a.at(i) != c.at(i);
  }
  CHECK(identical);
  CHECK(differs);
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 131.0));
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() > 0.9 * std::sqrt(6.0 / 131.0));
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const double bound = std::sqrt(6.0 / (a.layer_sizes[l] + a.layer_sizes[l + 1]));
    CHECK(a.layers[l].weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(a.layers[l].bias.isZero(0.0));
  }
  CHECK(a.all_finite());
}

TEST_CASE("flat parameter order is row-major weights then biases") {
  NetParams p = NetParams::zeros(kToy);
  for (std::size_t i = 0; i < p.parameter_count(); ++i) p.at(i) = static_cast<double>(i);
  CHECK(p.layers[0].weight(0, 0) == 0);
  CHECK(p.layers[0].weight(0, 1) == 1);
  CHECK(p.layers[0].weight(1, 0) == 3);
  CHECK(p.layers[0].bias(0) == 12);
  CHECK(p.layers[1].weight(0, 0) == 16);
  CHECK(p.layers[1].weight(1, 3) == 23);
  CHECK(p.layers[1].bias(1) == 25);
  CHECK(p.parameter_count() == 26);
}

TEST_CASE("zero network") {
  const NetParams z = NetParams::zeros(Architecture::standard());
  const NetOutput o = forward(z, 0.3, -0.2, 4.0);
  CHECK(o.f == 0.0);
  CHECK(o.h == 0.0);
  const EvalWithDerivs e = eval_with_derivs(z, 1.0, 0.5, -3.0);
  CHECK(e.f == 0.0);
  CHECK(e.h == 0.0);
  CHECK(e.df_dt == 0.0);
  CHECK(e.df_dx == 0.0);
  CHECK(e.df_dv == 0.0);
  CHECK(e.dh_dv == 0.0);
  CHECK(grad_check(NetParams::zeros(kToy), random_points(5, 1)) == 0.0);
}

TEST_CASE("single hidden unit matches the hand formula") {
  NetParams p = NetParams::zeros({{3, 1, 2}});
  const double w1 = 0.7, b1 = -0.2, w2 = 1.3, b2 = 0.4;
  p.layers[0].weight(0, 0) = w1;
  p.layers[0].bias(0) = b1;
  p.layers[1].weight(0, 0) = w2;
  p.layers[1].bias(0) = b2;
  for (double t : {0.0, 0.5, 2.0, 5.0}) {
    const double expected = w2 * std::tanh(w1 * t + b1) + b2;
    CHECK(forward(p, t, 0.3, -1.0).f == doctest::Approx(expected).epsilon(1e-15));
    const EvalWithDerivs e = eval_with_derivs(p, t, 0.3, -1.0);
    const double s = std::tanh(w1 * t + b1);
    CHECK(e.df_dt == doctest::Approx(w2 * (1 - s * s) * w1).epsilon(1e-14));
    CHECK(e.df_dx == 0.0);
    CHECK(e.df_dv == 0.0);
  }
}

TEST_CASE("batched evaluation agrees with a plain-loop reference") {
  const NetParams p = random_params(kSmall, 5);
  const auto pts = random_points(50, 6);
  const auto batch = eval_batch(p, pts, DerivMode::WithInputDerivs);
  const auto values = eval_batch(p, pts, DerivMode::ValuesOnly);
  const Eigen::VectorXd f = eval_f(p, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const NetOutput r = reference_forward(p, pts[i].t, pts[i].x, pts[i].v);
    CHECK(batch[i].f == doctest::Approx(r.f).epsilon(1e-13));
    CHECK(batch[i].h == doctest::Approx(r.h).epsilon(1e-13));
    CHECK(values[i].f == doctest::Approx(batch[i].f).epsilon(1e-14));
    CHECK(values[i].df_dv == 0.0);
    CHECK(f(static_cast<Eigen::Index>(i)) == values[i].f);
    const EvalWithDerivs single = eval_with_derivs(p, pts[i].t, pts[i].x, pts[i].v);
    CHECK(single.df_dv == doctest::Approx(batch[i].df_dv).epsilon(1e-13));
  }
}

TEST_CASE("output bounded by output-layer weights") {
  const NetParams p = random_params(kSmall, 9, 2.0);
  const double bound_f = p.layers.back().weight.row(0).cwiseAbs().sum() + std::abs(p.layers.back().bias(0));
  const double bound_h = p.layers.back().weight.row(1).cwiseAbs().sum() + std::abs(p.layers.back().bias(1));
  for (const Point& q : random_points(500, 10)) {
    const NetOutput o = forward(p, q.t, q.x, q.v);
    CHECK(std::abs(o.f) <= bound_f);
    CHECK(std::abs(o.h) <= bound_h);
  }
}

TEST_CASE("input derivatives match central differences") {
  const double h = 1e-4;
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const NetParams p = random_params(kSmall, 100 + trial);
    const Point q = random_points(1, 200 + trial)[0];
    const EvalWithDerivs e = eval_with_derivs(p, q.t, q.x, q.v);
    // fourth-order central stencil
    auto fd = [&](int coord, bool of_h) {
      auto eval = [&](long double shift) {
        long double t = q.t, x = q.x, v = q.v;
        (coord == 0 ? t : coord == 1 ? x : v) += shift;
        const auto o = reference_forward_ld(p, t, x, v);
        return of_h ? o.second : o.first;
      };
      const long double hl = h;
      return static_cast<double>((8 * (eval(hl) - eval(-hl)) - (eval(2 * hl) - eval(-2 * hl))) / (12 * hl));
    };
    worst = std::max({worst, rel(e.df_dt, fd(0, false)), rel(e.df_dx, fd(1, false)), rel(e.df_dv, fd(2, false)),
                      rel(e.dh_dv, fd(2, true))});
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-5);
}

TEST_CASE("v-even network has zero v-slope at v = 0") {
  const NetParams p = testing::make_v_even(random_params(kSmall, 77));
  for (const Point& q : random_points(20, 78)) {
    CHECK(forward(p, q.t, q.x, q.v).f == doctest::Approx(forward(p, q.t, q.x, -q.v).f).epsilon(1e-14));
    CHECK(std::abs(eval_with_derivs(p, q.t, q.x, 0.0).df_dv) < 1e-14);
  }
}

TEST_CASE("tanh oddness") {
  const NetParams p = random_params(kSmall, 31);
  NetParams q = p;
  q.layers[0].weight = -q.layers[0].weight;
  q.layers[0].bias = -q.layers[0].bias;
  q.layers[1].weight = -q.layers[1].weight;
  for (const Point& pt : random_points(100, 32)) {
    const NetOutput a = forward(p, pt.t, pt.x, pt.v), b = forward(q, pt.t, pt.x, pt.v);
    CHECK(a.f == b.f);
    CHECK(a.h == b.h);
  }
  // one hidden layer: negated output weights give exactly -f when the output bias is 0
  NetParams r = random_params(kToy, 33);
  r.layers[1].bias.setZero();
  NetParams s = r;
  s.layers[0].weight = -s.layers[0].weight;
  s.layers[0].bias = -s.layers[0].bias;
  for (const Point& pt : random_points(100, 34)) {
    CHECK(forward(s, pt.t, pt.x, pt.v).f == -forward(r, pt.t, pt.x, pt.v).f);
    s.layers[1].weight = -s.layers[1].weight;
    CHECK(forward(s, pt.t, pt.x, pt.v).f == forward(r, pt.t, pt.x, pt.v).f);
    s.layers[1].weight = -s.layers[1].weight;
  }
}

TEST_CASE("gradient at a stationary point is zero") {
  const NetParams z = NetParams::zeros(kSmall);
  const std::vector<Point> pt{{0.3, 0.1, 2.0}};
  const GradientResult g = param_gradient(z, pt, DerivMode::ValuesOnly, f_squared_loss());
  CHECK(g.loss == 0.0);
  CHECK(g.grad.max_abs() == 0.0);
}

TEST_CASE("parameter gradient matches central differences on weights") {
  const NetParams p = random_params(kToy, 12);
  const auto pts = random_points(10, 13);
  const GradientResult g = param_gradient(p, pts, DerivMode::ValuesOnly, f_squared_loss());
  CHECK(g.loss == doctest::Approx(sum_f_squared(p, pts)).epsilon(1e-13));
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    NetParams a = p, b = p;
    a.at(i) += h;
    b.at(i) -= h;
    const double fd = (sum_f_squared(a, pts) - sum_f_squared(b, pts)) / (2 * h);
    CHECK(rel(g.grad.at(i), fd) <= 1e-4);
  }
}

TEST_CASE("gradient through input derivatives matches differences") {
  const NetParams p = random_params(kSmall, 14);
  const auto pts = random_points(6, 15);
  const GradientResult g = param_gradient(p, pts, DerivMode::WithInputDerivs, mixed_loss());
  auto loss_at = [&](const NetParams& q) {
    double s = 0.0;
    for (const auto& e : eval_batch(q, pts, DerivMode::WithInputDerivs)) s += mixed_terms(e);
    return s;
  };
  CHECK(g.loss == doctest::Approx(loss_at(p)).epsilon(1e-13));
  const double h = 1e-3;
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    NetParams a1 = p, a2 = p, b1 = p, b2 = p;
    a1.at(i) += h;
    a2.at(i) += 2 * h;
    b1.at(i) -= h;
    b2.at(i) -= 2 * h;
    const double fd = (8 * (loss_at(a1) - loss_at(b1)) - (loss_at(a2) - loss_at(b2))) / (12 * h);
    CHECK(std::abs(g.grad.at(i) - fd) <= 1e-6 * (std::abs(fd) + 1.0));
  }
}

TEST_CASE("gradient is linear in the loss") {
  const NetParams p = random_params(kSmall, 16);
  const auto pts = random_points(20, 17);
  const GradientResult g1 = param_gradient(p, pts, DerivMode::ValuesOnly, f_squared_loss(1.0));
  const GradientResult g2 = param_gradient(p, pts, DerivMode::ValuesOnly, f_squared_loss(2.5));
  CHECK(g2.loss == doctest::Approx(2.5 * g1.loss).epsilon(1e-14));
  for (std::size_t i = 0; i < p.parameter_count(); ++i)
    CHECK(g2.grad.at(i) == doctest::Approx(2.5 * g1.grad.at(i)).epsilon(1e-13));
}

TEST_CASE("gradient of a batch sum is the sum of gradients") {
  const NetParams p = random_params(kSmall, 18);
  const auto pts = random_points(30, 19);
  const std::span<const Point> all(pts), left = all.first(12), right = all.subspan(12);
  const GradientResult g = param_gradient(p, all, DerivMode::WithInputDerivs, mixed_loss());
  GradientResult parts = param_gradient(p, left, DerivMode::WithInputDerivs, mixed_loss());
  const GradientResult g_right = param_gradient(p, right, DerivMode::WithInputDerivs, mixed_loss());
  parts.grad += g_right.grad;
  const double tol = 1e-12 * (std::abs(g.loss) + 1.0);
  for (std::size_t i = 0; i < p.parameter_count(); ++i) CHECK(std::abs(g.grad.at(i) - parts.grad.at(i)) <= tol);
}

TEST_CASE("gradients are deterministic") {
  const NetParams p = init_network(Architecture::standard(), 3);
  const auto pts = random_points(64, 4);
  const auto a = param_gradient(p, pts, DerivMode::WithInputDerivs, mixed_loss());
  const auto b = param_gradient(p, pts, DerivMode::WithInputDerivs, mixed_loss());
  CHECK(a.loss == b.loss);
  bool same = true;
  for (std::size_t i = 0; i < p.parameter_count(); ++i) same = same && a.grad.at(i) == b.grad.at(i);
  CHECK(same);
}

TEST_CASE("non-finite loss is reported") {
  const NetParams p = random_params(kToy, 20);
  const auto pts = random_points(3, 21);
  const LossEvaluator nan_loss = [](std::span<const EvalWithDerivs>, std::span<EvalWithDerivs>) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(param_gradient(p, pts, DerivMode::ValuesOnly, nan_loss), NonFiniteError);
  const LossEvaluator inf_seed = [](std::span<const EvalWithDerivs>, std::span<EvalWithDerivs> seeds) {
    seeds[0].f = std::numeric_limits<double>::infinity();
    return 1.0;
  };
  CHECK_THROWS_AS(param_gradient(p, pts, DerivMode::ValuesOnly, inf_seed), NonFiniteError);
}

TEST_CASE("grad_check on the toy and full networks") {
  CHECK(grad_check(init_network(kToy, 1), random_points(10, 2)) <= 1e-4);
  CHECK(grad_check(random_params(kToy, 3), random_points(10, 4)) <= 1e-4);
  GradCheckOptions options;
  options.max_params = 300;
  CHECK(grad_check(init_network(Architecture::standard(), 5), random_points(5, 6), options) <= 1e-3);
}
