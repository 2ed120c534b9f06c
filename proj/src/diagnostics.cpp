#include "popt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "popt/solvers.hpp"

namespace popt::diag {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec project_ball(const Vec& z, double radius) {
  const double n = z.norm();
  return n > radius ? Vec(z * (radius / n)) : z;
}
}  // namespace

double SmallSaddleProblem::lagrangian(const Vec& x, const Vec& y) const {
  if (!dual_feasible(y)) return -kInf;
  return F(x) + y.dot(K * x);
}

double duality_gap(const SmallSaddleProblem& p, const Vec& x, const Vec& y) {
  if (!p.dual_feasible(y)) return kInf;
  return p.F(x) + p.G(p.K * x) + p.Fstar(-p.K.transpose() * y);
}

double lagrangian_gap(const SmallSaddleProblem& p, const Vec& x, const Vec& y, const Vec& xbar,
                      const Vec& ybar) {
  return p.lagrangian(x, ybar) - p.lagrangian(xbar, y);
}

double partial_primal_gap_bruteforce(const SmallSaddleProblem& p, const Vec& x,
                                     std::span<const SamplePoint> B) {
  if (B.empty()) throw std::invalid_argument("partial_primal_gap_bruteforce: empty sample set");
  const Vec Kx = p.K * x;
  const double fx = p.F(x);
  double best = -kInf;
  for (const auto& s : B) {
    if (!p.dual_feasible(s.y)) continue;
    best = std::max(best, fx + Kx.dot(s.y) - p.primal_value(s.x));
  }
  return best;
}

double tilde_g_bruteforce(const SmallSaddleProblem& p, const Vec& yprime,
                          std::span<const SamplePoint> B) {
  if (B.empty()) throw std::invalid_argument("tilde_g_bruteforce: empty sample set");
  double best = -kInf, min_primal = kInf;
  for (const auto& s : B) {
    if (!p.dual_feasible(s.y)) continue;
    const double pv = p.primal_value(s.x);
    best = std::max(best, yprime.dot(s.y) - pv);
    min_primal = std::min(min_primal, pv);
  }
  return best + min_primal;
}

double tilde_g_ball_closed_form(const Vec& yprime, double alpha, const Vec& yhat, double rho) {
  if (!(alpha > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("tilde_g_ball_closed_form: alpha, rho must be > 0");
  const double h = yhat.norm();
  if (h > alpha + rho) throw std::invalid_argument("tilde_g_ball_closed_form: empty intersection");

  const double yn = yprime.norm();
  if (yn == 0.0) return 0.0;
  if (h == 0.0) return std::min(alpha, rho) * yn;
  if (rho >= h + alpha) return alpha * yn;             // lens is the alpha-ball
  if (alpha >= h + rho) return yhat.dot(yprime) + rho * yn;  // lens is B(yhat, rho)

  // unconstrained maximizer of one ball inside the other?
  const Vec dir = yprime / yn;
  if ((alpha * dir - yhat).norm() <= rho) return alpha * yn;
  if ((yhat + rho * dir).norm() <= alpha) return yhat.dot(yprime) + rho * yn;

  // supremum on the rim: |z| = alpha, |z - yhat| = rho
  const double c = (h * h + alpha * alpha - rho * rho) / (2.0 * h);
  const double r2 = alpha * alpha - c * c;
  const double r = r2 > 0.0 ? std::sqrt(r2) : 0.0;
  const Vec axis = yhat / h;
  const double along = yprime.dot(axis);
  const double perp = std::sqrt(std::max(0.0, yn * yn - along * along));
  return c * along + r * perp;
}

BoundReport tilde_g_lower_bound_check(const SmallSaddleProblem& p, std::span<const SamplePoint> B,
                                      std::span<const Vec> yprimes) {
  BoundReport rep;
  rep.min_lower_margin = kInf;
  rep.min_upper_margin = kInf;
  for (const Vec& yp : yprimes) {
    const double tg = tilde_g_bruteforce(p, yp, B);
    const double upper = p.G(yp);        // alpha |y'|
    const double lower = -p.G(-yp);      // -alpha |y'|
    rep.min_lower_margin = std::min(rep.min_lower_margin, tg - lower);
    rep.min_upper_margin = std::min(rep.min_upper_margin, upper - tg);
  }
  return rep;
}

Saddle solve_saddle(const SmallSaddleProblem& p, int iters) {
  const double knorm = std::sqrt(
      Eigen::SelfAdjointEigenSolver<Mat>(p.K.transpose() * p.K).eigenvalues().maxCoeff());
  const double tau = 0.95 / std::max(knorm, 1e-12);
  const double sigma = tau;

  Vec x = Vec::Zero(p.K.cols()), y = Vec::Zero(p.K.rows());
  for (int it = 0; it < iters; ++it) {
    const Vec xn = (x - tau * (p.K.transpose() * y) + tau * p.b) / (1.0 + tau);
    const Vec yn = project_ball(y + sigma * (p.K * (2.0 * xn - x)), p.alpha);
    x = xn;
    y = yn;
  }
  Saddle s;
  s.x = x;
  s.y = y;
  const Vec opt1 = (x - p.b) + p.K.transpose() * y;                // -K'y in dF(x)
  const Vec opt2 = y - project_ball(y + p.K * x, p.alpha);         // Kx in dG*(y)
  s.residual = std::max(opt1.norm(), opt2.norm());
  return s;
}

Certificate pofb_regret_certificate(const RegretLedger& ledger, const steprules::FbStepConfig& cfg) {
  const double gamma = steprules::fb_gamma(cfg);
  Certificate cert;
  cert.applicable = 1.0 + gamma * cfg.tau >= ledger.Lambda;
  if (!cert.applicable) {
    cert.note = "requires 1 + gamma*tau >= Lambda";
    return cert;
  }
  double lhs = 0.0;
  for (double g : ledger.objective_gaps) lhs += g;
  for (double r : ledger.pred_residual_sq) lhs += (1.0 - cfg.zeta) / (2.0 * cfg.tau) * r;
  double rhs = ledger.init_dist_sq * (1.0 + gamma * cfg.tau) / (2.0 * cfg.tau);
  for (double e : ledger.eps) rhs += e / cfg.tau;
  cert.lhs = lhs;
  cert.rhs = rhs;
  cert.margin = rhs - lhs;
  return cert;
}

namespace {

// Dense-vector adapter for the generic primal-dual step.
struct DVec {
  Vec v;
};
DVec lincomb(double a, const DVec& x, double b, const DVec& y) { return {a * x.v + b * y.v}; }
double norm_sq(const DVec& x) { return x.v.squaredNorm(); }

struct DenseAdapter {
  using Primal = DVec;
  using Dual = DVec;
  const SmallSaddleProblem* p = nullptr;
  double rho_tilde = 0.0;

  Primal prox_primal(long, const Primal& z, double tau) const {
    return {(z.v + tau * p->b) / (1.0 + tau)};
  }
  Dual prox_dual(long, const Dual& z, double) const { return {project_ball(z.v, p->alpha)}; }
  Dual prox_dual_shifted(long, const Dual& z, double st) const {
    return {project_ball(z.v / (1.0 + st * rho_tilde), p->alpha)};
  }
  Dual apply_k(long, const Primal& x) const { return {p->K * x.v}; }
  Primal apply_k_adjoint(long, const Dual& y) const { return {p->K.transpose() * y.v}; }
  Primal predict_primal(long, const Primal& x) const { return x; }
  Dual predict_dual(long, const Dual& y) const { return y; }
};

}  // namespace

Certificate popd_regret_certificate(const SmallSaddleProblem& p, const steprules::StepConfig& cfg,
                                    int N, const SamplePoint& u0bar, const Vec& x0, const Vec& y0) {
  Certificate cert;
  {
    steprules::TestingParams tp;
    tp.tau = cfg.tau;
    tp.sigma = cfg.sigma;
    const auto rep = steprules::validate_conditions(cfg, tp, 0);
    if (!rep.ok()) {
      cert.applicable = false;
      cert.note = "infeasible step configuration: " + rep.worst_name();
      return cert;
    }
  }

  DenseAdapter prob{&p, cfg.rho_tilde};
  std::vector<Vec> xs(N + 1), ys(N + 1);
  xs[0] = x0;
  ys[0] = y0;
  solvers::PopdState<DenseAdapter> st{{x0}, {y0}};
  for (int k = 0; k < N; ++k) {
    auto [next, tr] = solvers::popd_step(prob, cfg, k, st);
    st = std::move(next);
    xs[k + 1] = st.x.v;
    ys[k + 1] = st.y.v;
  }

  // comparison sequence: constant primal, dual driven by the shifted prox
  std::vector<Vec> xbar(N + 1), ybar(N + 1);
  xbar[0] = u0bar.x;
  ybar[0] = u0bar.y;
  for (int k = 0; k < N; ++k) {
    xbar[k + 1] = xbar[k];
    ybar[k + 1] =
        project_ball((ybar[k] + cfg.sigma_tilde * (p.K * xbar[k + 1])) / (1.0 + cfg.sigma_tilde * cfg.rho_tilde),
                     p.alpha);
  }

  const double eta = cfg.tau, phi = 1.0, psi = cfg.tau / cfg.sigma;

  // gap part of the left-hand side, with the gap-modified regularizer exact
  // for a singleton comparison set: sum eta*(F(x)+<Kx,ybar>-G*(ybar)) minus
  // the comparison objective sum.
  double lhs = 0.0;
  for (int k = 1; k <= N; ++k) {
    lhs += eta * (p.F(xs[k]) + (p.K * xs[k]).dot(ybar[k]));
    lhs -= eta * p.primal_value(xbar[k]);
  }
  // prediction residual sum in the step metric
  double resid = 0.0;
  for (int k = 0; k < N; ++k) {
    const Vec xi = xs[k];  // identity primal predictor
    const Vec ups =
        project_ball((ys[k] + cfg.sigma_tilde * (p.K * xi)) / (1.0 + cfg.sigma_tilde * cfg.rho_tilde), p.alpha);
    const Vec dx = xs[k + 1] - xi;
    const Vec dy = ys[k + 1] - ups;
    resid += 0.5 * (phi * dx.squaredNorm() + psi * dy.squaredNorm() - 2.0 * eta * (p.K * dx).dot(dy));
  }
  lhs += resid;

  const Vec dx0 = x0 - u0bar.x;
  const Vec dy0 = y0 - u0bar.y;
  const double rhs = 0.5 * phi * (1.0 + cfg.gamma * cfg.tau) * dx0.squaredNorm() +
                     0.5 * psi * (1.0 + cfg.rho * cfg.sigma) * dy0.squaredNorm() -
                     eta * (p.K * dx0).dot(dy0);

  cert.lhs = lhs;
  cert.rhs = rhs;
  cert.margin = rhs - lhs;
  return cert;
}

BallScReport ball_local_strong_convexity_check(double alpha, double gamma_sc, const Vec& x,
                                               double lambda, long samples, std::uint64_t seed,
                                               bool search_outside) {
  if (std::abs(x.norm() - alpha) > 1e-9 * std::max(1.0, alpha))
    throw std::invalid_argument("ball_local_strong_convexity_check: x must lie on the sphere");
  if (lambda < 0.0) throw std::invalid_argument("ball_local_strong_convexity_check: lambda must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const auto dim = x.size();
  auto sample_ball = [&] {
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = nd(rng);
    v *= alpha * std::pow(ud(rng), 1.0 / static_cast<double>(dim)) / v.norm();
    return v;
  };
  // Inside the ball the inequality reads 0 >= lambda<x, x'-x> + (gamma/2)|x'-x|^2.
  auto violated = [&](const Vec& xp) {
    const Vec d = xp - x;
    return lambda * x.dot(d) + 0.5 * gamma_sc * d.squaredNorm() > 1e-12 * std::max(1.0, alpha * alpha);
  };

  const bool restrict_neighborhood = gamma_sc * alpha > lambda * alpha;  // gamma > lambda case
  BallScReport rep;
  long produced = 0;
  while (produced < samples) {
    Vec xp = sample_ball();
    if (restrict_neighborhood && (xp - x).norm() > alpha) continue;  // outside U_x
    ++produced;
    ++rep.tested;
    if (violated(xp)) ++rep.violations;
  }

  if (search_outside && restrict_neighborhood) {
    rep.counterexample_searched = true;
    long tries = 0;
    while (tries < 100000 && !rep.counterexample_found) {
      Vec xp = sample_ball();
      if ((xp - x).norm() <= alpha) continue;
      ++tries;
      if (violated(xp)) rep.counterexample_found = true;
    }
  }
  return rep;
}

}  // namespace popt::diag
