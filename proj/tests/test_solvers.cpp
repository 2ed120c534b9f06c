#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "popt/flow.hpp"
#include "popt/proxops.hpp"
#include "popt/solvers.hpp"
#include "popt/steprules.hpp"

using namespace popt;
using grid::Image;
using grid::VectorField;

namespace {

std::mt19937_64 rng(4242);

Image random_image(int h, int w, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Image img(h, w);
  for (double& v : img.data) v = ud(rng);
  return img;
}

// Static quadratic-plus-zero problem: gradient descent toward b.
struct QuadraticOnly {
  using Primal = Image;
  Image b;
  Image grad_smooth(long, const Image& z) const { return grid::lincomb(1.0, z, -1.0, b); }
  Image prox_nonsmooth(long, const Image& z, double) const { return z; }
  Image predict(long, const Image& x) const { return x; }
};

// Reference primal-dual iteration for the static total-variation problem,
// written independently of the online solver step.
std::pair<Image, VectorField> pdps_reference(const Image& b, double alpha, int iters) {
  const double tau = 0.3, sigma = 0.3;  // tau*sigma*8 = 0.72 < 1
  Image x(b.height, b.width);
  VectorField y(b.height, b.width);
  for (int it = 0; it < iters; ++it) {
    const Image xn = proxops::prox_quadratic_data(
        grid::lincomb(1.0, x, tau, grid::div(y)), b, tau);
    const Image bar = grid::lincomb(2.0, xn, -1.0, x);
    y = proxops::project_dual_ball(grid::lincomb(1.0, y, sigma, grid::grad(bar)), alpha);
    x = xn;
  }
  return {x, y};
}

struct VecSource {
  std::vector<flow::FrameRecord> recs;
  std::size_t at = 0;
  std::optional<flow::FrameRecord> next() {
    if (at >= recs.size()) return std::nullopt;
    return recs[at++];
  }
};

flow::FrameRecord still_frame(long k, const Image& img) {
  flow::FrameRecord r;
  r.k = k;
  r.clean = img;
  r.noisy = img;
  return r;
}

}  // namespace

TEST_CASE("forward-backward step with identity predictor reduces to gradient descent") {
  QuadraticOnly prob{random_image(8, 8)};
  const Image x0 = random_image(8, 8);
  const double tau = 0.3;
  const Image x1 = solvers::pofb_step(prob, 0, x0, tau);
  for (std::size_t t = 0; t < x0.size(); ++t) {
    const double expect = x0.data[t] - tau * (x0.data[t] - prob.b.data[t]);
    CHECK(x1.data[t] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("forward-backward scalar contraction matches the closed form") {
  QuadraticOnly prob{Image(1, 1, 0.7)};
  Image x(1, 1, -1.0);
  const double tau = 0.25;
  double ref = -1.0;
  for (int k = 0; k < 30; ++k) {
    x = solvers::pofb_step(prob, k, x, tau);
    ref = ref - tau * (ref - 0.7);
    CHECK(x.at(0, 0) == doctest::Approx(ref).epsilon(1e-14));
  }
  CHECK(std::abs(x.at(0, 0) - 0.7) <= std::pow(1.0 - tau, 30) * 1.7 + 1e-12);
}

TEST_CASE("forward-backward with TV prox descends on constant data") {
  const Image b = random_image(16, 16);
  flow::KnownFlowFbProblem prob(0.05, 0.3, 10, 16, 16);
  double prev = std::numeric_limits<double>::infinity();
  for (long k = 0; k < 40; ++k) {
    auto out = prob.step(still_frame(k, b));
    REQUIRE(out.has_value());
    CHECK(out->trace.objective <= prev + 1e-9);
    prev = out->trace.objective;
  }
}

TEST_CASE("primal-dual: zero data and zero init stay at zero") {
  const auto cfg = steprules::constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  flow::KnownFlowProblem prob(cfg, 1.0, 12, 12);
  const Image zero(12, 12, 0.0);
  for (long k = 0; k < 5; ++k) {
    auto out = prob.step(still_frame(k, zero));
    REQUIRE(out.has_value());
    CHECK(grid::norm_sq(*out->x) == 0.0);
    CHECK(out->trace.pred_residual_sq == 0.0);
  }
  CHECK(grid::norm_sq(prob.y()) == 0.0);
}

TEST_CASE("primal-dual: dual iterates live in the alpha-ball after every step") {
  const auto cfg = steprules::constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  const double alpha = 0.7;
  flow::KnownFlowProblem prob(cfg, alpha, 10, 10);
  const Image b = random_image(10, 10);
  for (long k = 0; k < 20; ++k) {
    auto out = prob.step(still_frame(k, b));
    REQUIRE(out.has_value());
    const VectorField& y = prob.y();
    const std::size_t pl = y.plane();
    for (std::size_t t = 0; t < pl; ++t)
      CHECK(std::sqrt(y.data[t] * y.data[t] + y.data[pl + t] * y.data[pl + t]) <= alpha);
  }
}

TEST_CASE("primal-dual with identity predictors converges to the static saddle point") {
  const Image b = random_image(16, 16);
  const double alpha = 0.5;
  // Theta = kappa makes the shifted dual prox an exact ball projection
  const auto cfg = steprules::constant_steps(0.5, 0.9, 1.0, 0.0, 1.0, 0.9, 8.0);
  REQUIRE(cfg.rho_tilde == 0.0);

  flow::KnownFlowProblem prob(cfg, alpha, 16, 16);
  std::optional<flow::StepOutcome> out;
  for (long k = 0; k < 4000; ++k) out = prob.step(still_frame(k, b));

  const auto [xref, yref] = pdps_reference(b, alpha, 60000);
  const double rel = std::sqrt(grid::norm_sq(grid::lincomb(1.0, *out->x, -1.0, xref))) /
                     std::sqrt(grid::norm_sq(xref));
  CHECK(rel <= 1e-3);

  // fixed-point optimality residuals of the reference pair
  const Image r1 = grid::lincomb(
      1.0, xref,
      -1.0, proxops::prox_quadratic_data(grid::lincomb(1.0, xref, 0.1, grid::div(yref)), b, 0.1));
  CHECK(std::sqrt(grid::norm_sq(r1)) <= 1e-6);
  const VectorField pr = proxops::project_dual_ball(
      grid::lincomb(1.0, yref, 0.1, grid::grad(xref)), alpha);
  CHECK(std::sqrt(grid::norm_sq(grid::lincomb(1.0, yref, -1.0, pr)))  <= 1e-6);
}

TEST_CASE("one solver step per arriving frame") {
  const auto cfg = steprules::constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  flow::KnownFlowProblem prob(cfg, 1.0, 8, 8);
  VecSource src;
  for (long k = 0; k < 3; ++k) src.recs.push_back(still_frame(k, random_image(8, 8)));
  long traces = 0;
  double residual_sum = 0.0;
  const long emitted = solvers::run_online(prob, src, [&](const flow::StepOutcome& o) {
    ++traces;
    residual_sum += o.trace.pred_residual_sq;
  });
  CHECK(emitted == 3);
  CHECK(traces == 3);
  CHECK(residual_sum >= 0.0);
}

TEST_CASE("smoothness three-point inequalities hold for random quadratics") {
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
    const Eigen::MatrixXd Q = A.transpose() * A + 0.05 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
    const double L = es.eigenvalues().maxCoeff();
    const double gamma = es.eigenvalues().minCoeff();

    auto F = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(Q * v) + q.dot(v); };
    auto gradF = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Q * v + q; };

    const Eigen::VectorXd xb = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
    const Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });

    // plain smoothness form
    const double lhs = gradF(z).dot(x - xb);
    CHECK(lhs >= F(x) - F(xb) - 0.5 * L * (x - z).squaredNorm() - 1e-9);

    // strongly convex form, arbitrary beta > 0
    const double beta = 0.01 + std::abs(nd(rng));
    CHECK(lhs >= F(x) - F(xb) + 0.5 * (gamma - beta * L * L) * (x - xb).squaredNorm() -
                     0.5 / beta * (x - z).squaredNorm() - 1e-9);
  }
}

TEST_CASE("forward-backward descent inequality on scalar instances") {
  std::uniform_real_distribution<double> ud(0.1, 2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double a = ud(rng);  // F = a/2 (x-b)^2: gammaF = L = a
    const double c = ud(rng);  // G = c/2 x^2: gammaG = c
    const double b = ud(rng) - 1.0;
    const double tau = 0.2 * ud(rng);
    const double zeta = std::min(1.0, 0.5 + 0.5 * ud(rng));
    const double gamma_expect = c + a - tau * a * a / zeta;
    if (gamma_expect < 0.0) continue;
    const double gamma =
        steprules::fb_gamma({tau, zeta, a, a, c, 1.0});
    CHECK(gamma == doctest::Approx(gamma_expect).epsilon(1e-12));

    const double x = ud(rng) - 0.5, xb = ud(rng) - 0.5, z = ud(rng) - 0.5;
    auto J = [&](double v) { return 0.5 * a * (v - b) * (v - b) + 0.5 * c * v * v; };
    const double inner = (c * x + a * (z - b)) * (x - xb);
    const double rhs = J(x) - J(xb) + 0.5 * gamma * (x - xb) * (x - xb) -
                       zeta / (2.0 * tau) * (x - z) * (x - z);
    CHECK(inner >= rhs - 1e-10);
  }
}
