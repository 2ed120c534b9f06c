#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popt/steprules.hpp"

// Desk-scale verification layer: gap functionals evaluated in closed form or
// by brute force over sample sets, regret certificates for both online
// solvers, and the local strong-convexity check for the ball indicator.

namespace popt::diag {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense saddle-point instance: F(x) = 0.5|x-b|^2, G(z) = alpha*|z|_2,
// G*(y) = indicator of the alpha-ball. Dimensions stay small enough for
// brute force.
struct SmallSaddleProblem {
  Mat K;
  Vec b;
  double alpha = 1.0;

  double F(const Vec& x) const { return 0.5 * (x - b).squaredNorm(); }
  double Fstar(const Vec& w) const { return 0.5 * w.squaredNorm() + w.dot(b); }
  double G(const Vec& z) const { return alpha * z.norm(); }
  bool dual_feasible(const Vec& y, double tol = 1e-9) const {
    return y.norm() <= alpha * (1.0 + tol);
  }
  double primal_value(const Vec& x) const { return F(x) + G(K * x); }
  // +/-inf when y is outside the alpha-ball
  double lagrangian(const Vec& x, const Vec& y) const;
};

// [F(x)+G(Kx)] + [F*(-K'y)+G*(y)]; nonnegative, zero only at critical points.
double duality_gap(const SmallSaddleProblem& p, const Vec& x, const Vec& y);

// L(x, ybar) - L(xbar, y).
double lagrangian_gap(const SmallSaddleProblem& p, const Vec& x, const Vec& y, const Vec& xbar,
                      const Vec& ybar);

struct SamplePoint {
  Vec x, y;
};

// sup over the sample set of the inf-over-dual Lagrangian gap, using the
// closed-form inner infimum F(x) + <Kx, ybar> - G*(ybar) - [F+G.K](xbar).
double partial_primal_gap_bruteforce(const SmallSaddleProblem& p, const Vec& x,
                                     std::span<const SamplePoint> B);

// Gap-modified regularizer on the same sample set:
//   max_B ( <y', ybar> - G*(ybar) - [F+G.K](xbar) ) + min_B [F+G.K](xbar).
double tilde_g_bruteforce(const SmallSaddleProblem& p, const Vec& yprime,
                          std::span<const SamplePoint> B);

// Support function of B(0,alpha) /\ B(yhat,rho). Closed form in any
// dimension by reduction to the plane spanned by yhat and y'. Throws when
// the intersection is empty.
double tilde_g_ball_closed_form(const Vec& yprime, double alpha, const Vec& yhat, double rho);

// -G(-y') <= tilde G <= G(y') on every sample direction.
struct BoundReport {
  double min_lower_margin = 0.0;
  double min_upper_margin = 0.0;
  bool ok() const { return min_lower_margin >= -1e-8 && min_upper_margin >= -1e-8; }
};
BoundReport tilde_g_lower_bound_check(const SmallSaddleProblem& p, std::span<const SamplePoint> B,
                                      std::span<const Vec> yprimes);

// Reference critical point by a long plain primal-dual run.
struct Saddle {
  Vec x, y;
  double residual = 0.0;  // optimality residual of the returned pair
};
Saddle solve_saddle(const SmallSaddleProblem& p, int iters);

// --- regret certificates ----------------------------------------------------

struct Certificate {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  bool applicable = true;
  std::string note;
};

// Per-frame inputs of the forward-backward certificate; entry i describes
// frame i+1.
struct RegretLedger {
  std::vector<double> objective_gaps;     // J_{k}(x^k) - J_k(xbar^k)
  std::vector<double> eps;                // prediction penalties
  std::vector<double> pred_residual_sq;   // |x^{k+1} - A_k(x^k)|^2
  double init_dist_sq = 0.0;              // sup over the initial comparison set
  double Lambda = 1.0;
};

// Constant-step forward-backward regret bound:
//   sum gaps + (1-zeta)/(2 tau) * sum residuals
//     <= init*(1+gamma*tau)/(2 tau) + sum eps/tau,
// applicable when 1 + gamma*tau >= Lambda.
Certificate pofb_regret_certificate(const RegretLedger& ledger, const steprules::FbStepConfig& cfg);

// Primal-dual regret bound on a dense instance with identity predictors and a
// singleton initial comparison point. Runs the actual solver loop for N steps
// from (x0, y0) and evaluates both sides exactly.
Certificate popd_regret_certificate(const SmallSaddleProblem& p, const steprules::StepConfig& cfg,
                                    int N, const SamplePoint& u0bar, const Vec& x0, const Vec& y0);

// --- ball indicator local strong convexity ----------------------------------

// Verifies the strong subdifferentiability inequality of the ball indicator
// at x on the sphere with subgradient lambda*x, over `samples` random points
// drawn from the admissible neighborhood; optionally searches for a
// violation outside it.
struct BallScReport {
  long tested = 0;
  long violations = 0;
  bool counterexample_searched = false;
  bool counterexample_found = false;
};
BallScReport ball_local_strong_convexity_check(double alpha, double gamma_sc, const Vec& x,
                                               double lambda, long samples, std::uint64_t seed,
                                               bool search_outside);

}  // namespace popt::diag
