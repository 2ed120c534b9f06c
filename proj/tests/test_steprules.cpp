#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "popt/steprules.hpp"

using namespace popt::steprules;

namespace {
TestingParams constant_testing(const StepConfig& cfg) {
  TestingParams tp;
  tp.tau = cfg.tau;
  tp.sigma = cfg.sigma;
  return tp;
}
}  // namespace

TEST_CASE("constant_steps reproduces the analytic reference values") {
  const StepConfig cfg = constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  // solve (1+gamma*tau-Lambda)*(1-kappa)*(1+sigma*rho) = tau*sigma*|K|^2
  CHECK(cfg.sigma == doctest::Approx(0.0125).epsilon(1e-9));
  CHECK(cfg.sigma_tilde == doctest::Approx(0.0125 / 0.9).epsilon(1e-9));
  CHECK(cfg.rho_tilde == doctest::Approx(4.0).epsilon(1e-9));

  const auto rep = validate_conditions(cfg, constant_testing(cfg), 0);
  CHECK(rep.coupling >= 0.0);
  CHECK(rep.dual_step >= 0.0);
  CHECK(rep.primal_step >= 0.0);
  CHECK(rep.positivity >= 0.0);
}

TEST_CASE("constant_steps infeasibility cases") {
  // Lambda exceeds 1 + gamma*tau at sigma -> 0
  CHECK_THROWS_AS(constant_steps(0.01, 0.9, 1.0, 0.0, 1.02, 1.0, 8.0), InfeasibleStepsError);
  // equality boundary: gamma = 0, Lambda = 1 forces sigma = 0
  CHECK_THROWS_AS(constant_steps(0.01, 0.9, 0.0, 0.0, 1.0, 1.0, 8.0), InfeasibleStepsError);
  CHECK_THROWS_AS(constant_steps(-1.0, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0), InfeasibleStepsError);
  CHECK_THROWS_AS(constant_steps(0.01, 1.0, 1.0, 0.0, 1.0, 1.0, 8.0), InfeasibleStepsError);
}

TEST_CASE("phantom dual strong convexity enlarges sigma and clamps rho_tilde at zero") {
  const StepConfig cfg = constant_steps(0.01, 0.9, 1.0, 100.0, 1.0, 1.0, 8.0);
  CHECK(cfg.sigma == doctest::Approx(1.0 / (0.01 * 8.0)).epsilon(1e-9));  // positivity-bound
  CHECK(cfg.rho_tilde == 0.0);
  const auto rep = validate_conditions(cfg, constant_testing(cfg), 3);
  CHECK(rep.ok());
}

TEST_CASE("validate_conditions flags an inflated sigma on the metric-update inequality") {
  StepConfig cfg = constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  cfg.sigma *= 10.0;
  cfg.sigma_tilde = cfg.Theta * cfg.sigma / (cfg.kappa * (1.0 + cfg.sigma * cfg.rho));
  const auto rep = validate_conditions(cfg, constant_testing(cfg), 0);
  CHECK(rep.primal_step < 0.0);
  CHECK(rep.positivity >= 0.0);  // 0.01*0.125*8 = 0.01 stays below 1
  CHECK(rep.worst_name() == "primal_step");
}

TEST_CASE("validate_conditions flags violated coupling for explicit sequences") {
  const StepConfig cfg = constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  TestingParams tp = constant_testing(cfg);
  tp.phi_override = {1.0, 2.0, 4.0};
  tp.eta_override = {cfg.tau, cfg.tau, cfg.tau};                            // breaks eta = phi*tau
  tp.psi_override = {cfg.tau / cfg.sigma, cfg.tau / cfg.sigma, cfg.tau / cfg.sigma};
  const auto rep = validate_conditions(cfg, tp, 1);
  CHECK(rep.coupling < 0.0);
}

TEST_CASE("random feasible configurations validate with nonnegative margins") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double tau = 0.001 + ud(rng);
    const double kappa = 0.05 + 0.9 * ud(rng);
    const double gamma = 0.05 + 2.0 * ud(rng);
    const double rho = (t % 3 == 0) ? 0.0 : 5.0 * ud(rng);
    const double Lambda = 0.8 + ud(rng) * (0.19 + gamma * tau);  // keeps 1+gamma*tau > Lambda
    const double Theta = 0.5 + 1.5 * ud(rng);
    const double K2 = 1.0 + 9.0 * ud(rng);
    StepConfig cfg;
    try {
      cfg = constant_steps(tau, kappa, gamma, rho, Lambda, Theta, K2);
    } catch (const InfeasibleStepsError&) {
      continue;
    }
    const auto rep = validate_conditions(cfg, constant_testing(cfg), 0);
    CHECK(rep.coupling >= 0.0);
    CHECK(rep.dual_step >= 0.0);
    CHECK(rep.primal_step >= 0.0);
    CHECK(rep.positivity >= 0.0);
  }
}

TEST_CASE("sigma is monotone in gamma and Lambda") {
  const double s0 = constant_steps(0.02, 0.8, 0.5, 0.0, 1.0, 1.0, 8.0).sigma;
  const double s1 = constant_steps(0.02, 0.8, 1.0, 0.0, 1.0, 1.0, 8.0).sigma;
  const double s2 = constant_steps(0.02, 0.8, 1.0, 0.0, 1.005, 1.0, 8.0).sigma;
  CHECK(s1 >= s0);
  CHECK(s2 <= s1);
}

TEST_CASE("exponential testing parameters") {
  StepConfig cfg = constant_steps(0.01, 0.9, 1.0, 0.0, 1.0, 1.0, 8.0);
  const TestingParams flat = exponential_testing(cfg, 1.0, 50);
  for (int k : {0, 3, 17}) CHECK(flat.phi(k) == doctest::Approx(1.0));  // rho = 0

  cfg.rho = 0.1 / cfg.sigma;  // rho*sigma = 0.1
  const TestingParams tp = exponential_testing(cfg, 1.0, 50);
  for (int k : {0, 1, 2, 7, 20})
    CHECK(tp.phi(k) == doctest::Approx(std::pow(1.1, k)).epsilon(1e-12));
  for (int k = 0; k <= 20; ++k) {
    CHECK(tp.eta(k) == doctest::Approx(tp.phi(k) * cfg.tau).epsilon(1e-12));
    CHECK(tp.psi(k) * cfg.sigma == doctest::Approx(tp.eta(k)).epsilon(1e-12));
  }
}

TEST_CASE("forward-backward contraction factor cases") {
  // gammaF = 0: gamma = gammaG under tau*L <= zeta
  CHECK(fb_gamma({0.1, 1.0, 2.0, 0.0, 2.0, 1.0}) == 2.0);  // tau*L = 0.2 <= 1
  CHECK_THROWS_AS(fb_gamma({0.6, 0.5, 2.0, 0.0, 2.0, 1.0}), InfeasibleStepsError);  // 1.2 > 0.5

  // gammaF > 0: gamma = gammaG + gammaF - tau*L^2/zeta
  CHECK(fb_gamma({0.1, 1.0, 2.0, 1.0, 0.0, 1.0}) == doctest::Approx(1.0 - 0.1 * 4.0).epsilon(1e-15));
  CHECK_THROWS_AS(fb_gamma({1.0, 0.5, 2.0, 1.0, 0.0, 1.0}), InfeasibleStepsError);  // 1 - 8 < 0
}
