#pragma once

#include <stdexcept>
#include <string>
#include <vector>

// Step-length and testing-parameter rules for the online primal-dual and
// forward-backward solvers, plus the feasibility inequalities that certify a
// configuration.

namespace popt::steprules {

class InfeasibleStepsError : public std::runtime_error {
 public:
  explicit InfeasibleStepsError(const std::string& what) : std::runtime_error(what) {}
};

// Scalar bundle for the primal-dual solver. `gamma` and `rho` are the primal
// and dual strong-convexity factors, `Lambda`/`Theta` the primal/dual
// predictor growth factors, `kappa` the coupling split in (0,1).
struct StepConfig {
  double tau = 0.0;
  double sigma = 0.0;
  double sigma_tilde = 0.0;
  double rho_tilde = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double Lambda = 1.0;
  double Theta = 1.0;
  double Knorm_sq = 8.0;
};

// Testing parameters phi_k, psi_k, eta_k coupled to the steps by
// eta_k = phi_k*tau = psi_k*sigma. The rule-based form stores phi_0 and the
// geometric growth factor; tests may supply explicit sequences instead.
struct TestingParams {
  double phi0 = 1.0;
  double growth = 1.0;  // phi_{k+1} = growth * phi_k
  double tau = 0.0;
  double sigma = 0.0;

  std::vector<double> phi_override;  // when non-empty, overrides everything
  std::vector<double> psi_override;
  std::vector<double> eta_override;

  bool derived() const { return phi_override.empty(); }
  double phi(int k) const;
  double eta(int k) const;
  double psi(int k) const;
};

// Margins of the four feasibility inequalities at index k. Negative margin
// flags a violation.
struct ConditionReport {
  double coupling = 0.0;
  double dual_step = 0.0;   // prox-predictor restriction on rho_tilde
  double primal_step = 0.0; // testing-parameter update inequality
  double positivity = 0.0;  // 1 >= tau*sigma*|K|^2

  bool ok() const;
  std::string worst_name() const;
};

// Constant steps: maximal sigma for the given tau, minimal feasible
// rho_tilde (clamped at 0), and sigma_tilde = Theta*sigma/(kappa*(1+sigma*rho)).
// Throws InfeasibleStepsError naming the violated inequality when no
// positive sigma exists.
StepConfig constant_steps(double tau, double kappa, double gamma, double rho, double Lambda,
                          double Theta, double Knorm_sq);

ConditionReport validate_conditions(const StepConfig& cfg, const TestingParams& tp, int k);

// phi_{k+1} = phi_k*(1 + rho*sigma), eta_k = phi_k*tau, psi_k = (tau/sigma)*phi_k.
TestingParams exponential_testing(const StepConfig& cfg, double phi0, int N);

// Forward-backward step bundle.
struct FbStepConfig {
  double tau = 0.0;
  double zeta = 1.0;  // in (0, 1]
  double L = 0.0;     // Lipschitz factor of the smooth gradient
  double gammaF = 0.0;
  double gammaG = 0.0;
  double Lambda = 1.0;
};

// Contraction factor gamma of the forward-backward step:
//   gammaF > 0:  gammaG + gammaF - tau*L^2/zeta
//   gammaF = 0:  gammaG, requiring tau*L <= zeta.
// Throws InfeasibleStepsError when negative or the zeta condition fails.
double fb_gamma(const FbStepConfig& cfg);

}  // namespace popt::steprules
