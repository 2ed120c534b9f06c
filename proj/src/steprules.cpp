#include "popt/steprules.hpp"

#include <algorithm>
#include <cmath>

namespace popt::steprules {

double TestingParams::phi(int k) const {
  if (!phi_override.empty()) return phi_override.at(static_cast<std::size_t>(k));
  return phi0 * std::pow(growth, k);
}

double TestingParams::eta(int k) const {
  if (!eta_override.empty()) return eta_override.at(static_cast<std::size_t>(k));
  return phi(k) * tau;
}

double TestingParams::psi(int k) const {
  if (!psi_override.empty()) return psi_override.at(static_cast<std::size_t>(k));
  return phi(k) * tau / sigma;
}

bool ConditionReport::ok() const {
  return coupling >= 0.0 && dual_step >= 0.0 && primal_step >= 0.0 && positivity >= 0.0;
}

std::string ConditionReport::worst_name() const {
  const double vals[4] = {coupling, dual_step, primal_step, positivity};
  const char* names[4] = {"coupling", "dual_step", "primal_step", "positivity"};
  int w = 0;
  for (int i = 1; i < 4; ++i)
    if (vals[i] < vals[w]) w = i;
  return names[w];
}

StepConfig constant_steps(double tau, double kappa, double gamma, double rho, double Lambda,
                          double Theta, double Knorm_sq) {
  if (!(tau > 0.0)) throw InfeasibleStepsError("constant_steps: tau must be > 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw InfeasibleStepsError("constant_steps: kappa must be in (0,1)");
  if (!(Theta > 0.0) || !(Lambda > 0.0)) throw InfeasibleStepsError("constant_steps: Lambda, Theta must be > 0");
  if (gamma < 0.0 || rho < 0.0) throw InfeasibleStepsError("constant_steps: gamma, rho must be >= 0");
  if (!(Knorm_sq > 0.0)) throw InfeasibleStepsError("constant_steps: Knorm_sq must be > 0");

  // primal_step at sigma -> 0+ requires 1 + gamma*tau >= Lambda.
  using ld = long double;
  const ld c = (1.0L + static_cast<ld>(gamma) * tau - Lambda) * (1.0L - kappa);
  if (c <= 0.0L)
    throw InfeasibleStepsError(
        "constant_steps: primal_step inequality infeasible (1 + gamma*tau must exceed Lambda)");

  // primal_step: c*(1 + sigma*rho) >= tau*sigma*|K|^2, solved for the largest sigma;
  // positivity: tau*sigma*|K|^2 <= 1. A relative safety factor keeps the
  // recomputed margins strictly nonnegative in floating point.
  constexpr ld kSafety = 1e-10L;
  ld sigma = 1.0L / (static_cast<ld>(tau) * Knorm_sq);
  const ld slope = static_cast<ld>(tau) * Knorm_sq - c * rho;
  if (slope > 0.0L) sigma = std::min(sigma, c / slope);
  sigma *= 1.0L - kSafety;

  StepConfig cfg;
  cfg.tau = tau;
  cfg.kappa = kappa;
  cfg.gamma = gamma;
  cfg.rho = rho;
  cfg.Lambda = Lambda;
  cfg.Theta = Theta;
  cfg.Knorm_sq = Knorm_sq;
  cfg.sigma = static_cast<double>(sigma);
  cfg.sigma_tilde = static_cast<double>(Theta * sigma / (kappa * (1.0L + sigma * rho)));
  const ld rt = (1.0L - kappa * (1.0L + sigma * rho) / Theta) / (2.0L * sigma);
  cfg.rho_tilde = rt > 0.0L ? static_cast<double>(rt * (1.0L + kSafety)) : 0.0;
  return cfg;
}

ConditionReport validate_conditions(const StepConfig& cfg, const TestingParams& tp, int k) {
  using ld = long double;
  ConditionReport rep;

  const ld tau = cfg.tau, sigma = cfg.sigma, st = cfg.sigma_tilde, rt = cfg.rho_tilde;
  const ld kappa = cfg.kappa, gamma = cfg.gamma, rho = cfg.rho;
  const ld Lambda = cfg.Lambda, Theta = cfg.Theta, K2 = cfg.Knorm_sq;
  const ld phi_k = tp.phi(k), phi_k1 = tp.phi(k + 1);
  const ld psi_k = tp.psi(k), eta_k1 = tp.eta(k + 1);

  // eta_k = phi_k*tau = psi_k*sigma. Rule-derived parameters satisfy this by
  // construction; explicit sequences are measured.
  if (tp.derived()) {
    rep.coupling = 0.0;
  } else {
    const ld eta_k = tp.eta(k);
    const ld scale = std::max<ld>(1.0, std::fabs(static_cast<double>(eta_k)));
    const ld r = std::max(std::abs(phi_k * tau - eta_k), std::abs(psi_k * sigma - eta_k));
    rep.coupling = static_cast<double>(-r / scale);
  }

  // rho_tilde >= Theta*eta_{k+1}/sigma_tilde^2 / (2*kappa*(1+sigma*rho)*psi_k)
  //              + 1/(2*sigma) - 1/sigma_tilde
  const ld need_rt =
      Theta * eta_k1 / (st * st) / (2.0L * kappa * (1.0L + sigma * rho) * psi_k) + 1.0L / (2.0L * sigma) -
      1.0L / st;
  rep.dual_step = static_cast<double>(rt - need_rt);

  // phi_k*(1+gamma*tau) >= phi_{k+1}*Lambda + phi_k*tau*sigma*|K|^2 / ((1-kappa)*(1+sigma*rho))
  const ld lhs_p = phi_k * (1.0L + gamma * tau);
  const ld rhs_p = phi_k1 * Lambda + phi_k * tau * sigma * K2 / ((1.0L - kappa) * (1.0L + sigma * rho));
  rep.primal_step = static_cast<double>(lhs_p - rhs_p);

  rep.positivity = static_cast<double>(1.0L - tau * sigma * K2);
  return rep;
}

TestingParams exponential_testing(const StepConfig& cfg, double phi0, int N) {
  if (!(phi0 > 0.0)) throw std::invalid_argument("exponential_testing: phi0 must be > 0");
  if (N < 0) throw std::invalid_argument("exponential_testing: N must be >= 0");
  TestingParams tp;
  tp.phi0 = phi0;
  tp.growth = 1.0 + cfg.rho * cfg.sigma;
  tp.tau = cfg.tau;
  tp.sigma = cfg.sigma;
  return tp;
}

double fb_gamma(const FbStepConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw InfeasibleStepsError("fb_gamma: tau must be > 0");
  if (!(cfg.zeta > 0.0 && cfg.zeta <= 1.0)) throw InfeasibleStepsError("fb_gamma: zeta must be in (0,1]");
  if (cfg.gammaF < 0.0 || cfg.gammaG < 0.0) throw InfeasibleStepsError("fb_gamma: negative convexity factor");

  double g;
  if (cfg.gammaF > 0.0) {
    g = cfg.gammaG + cfg.gammaF - cfg.tau * cfg.L * cfg.L / cfg.zeta;
  } else {
    if (cfg.tau * cfg.L > cfg.zeta)
      throw InfeasibleStepsError("fb_gamma: tau*L <= zeta required when the smooth part is not strongly convex");
    g = cfg.gammaG;
  }
  if (g < 0.0) throw InfeasibleStepsError("fb_gamma: negative contraction factor");
  return g;
}

}  // namespace popt::steprules
