#pragma once

#include <span>
#include <vector>

#include "popt/grid.hpp"

// Proximal maps and projections used by the online solvers.

namespace popt::proxops {

using grid::Image;
using grid::Vec2;
using grid::VectorField;

// Parameters of the shifted dual prox: the prox of
// sigma_tilde * (indicator of the alpha-ball + (rho_tilde/2)|.|^2).
struct HuberDualParams {
  double alpha = 1.0;
  double sigma_tilde = 1.0;
  double rho_tilde = 0.0;

  void validate() const;
};

// Weights of the windowed displacement-estimation energy: data fidelity
// theta on the linearised brightness-constancy residual, Tikhonov weight
// lambda1 on inter-frame shifts, time step T, window length n, and the
// smoothing kernel applied to the frames.
struct FlowEnergyParams {
  double theta = 0.0;
  double lambda1 = 1.0;
  double T = 1.0;
  int window_frames = 1;  // n
  double kernel_std = 3.0;
  int kernel_window = 11;

  void validate() const;
};

// Exact prox of tau * (1/2)|. - b|^2:  (z + tau*b) / (1 + tau).
Image prox_quadratic_data(const Image& z, const Image& b, double tau);

// Pointwise radial projection onto the alpha-ball: y <- y * min(1, alpha/|y|_2).
VectorField project_dual_ball(VectorField y, double alpha);

// project_dual_ball(z / (1 + sigma_tilde*rho_tilde), alpha).
VectorField prox_huber_dual(const VectorField& z, const HuberDualParams& p);

// Approximate prox of alpha_tau * TV at z: FISTA on the dual
// min_{|y|_{2,inf} <= alpha_tau} (1/2)|div y + z|^2, fixed iteration count,
// returning z + div(y). Deterministic.
Image fista_tv_prox(const Image& z, double alpha_tau, int iters);

// Quadratic data of one window term, accumulated over pixels for the frame
// pair (b_j, b_{j+1}):
//   residual(d) = g + <d, grad c>,  c = kernel*b_j,  g = kernel*(b_{j+1}-b_j)/T.
// Stores the raw sums; theta/lambda1/n scaling happens at solve time.
struct FlowPairTerm {
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;  // sum of grad c outer products
  double r1 = 0.0, r2 = 0.0;               // sum of g * grad c
  double g_sq = 0.0;                       // sum of g^2
  std::size_t pixels = 0;
};

FlowPairTerm build_flow_pair_term(const Image& b_j, const Image& b_j1, const FlowEnergyParams& p);

// Windowed energy value at the given inter-frame chain. state[q] is the
// cumulative shift u of frame (base+1+q) from the window base; terms[t]
// couples (u_{t-1}, u_t) with u_{-1} = 0.
double flow_energy(std::span<const Vec2> state, std::span<const FlowPairTerm> terms,
                   const FlowEnergyParams& p);

// Exact minimizer of tau*E(.) + (1/2)|. - state|^2, solved as a
// block-tridiagonal system of 2x2 blocks by direct elimination.
std::vector<Vec2> prox_flow_energy(std::span<const Vec2> state, std::span<const FlowPairTerm> terms,
                                   const FlowEnergyParams& p, double tau);

// Convenience overload building the pair terms from the buffered frames
// (frames.size() == state.size() + 1).
std::vector<Vec2> prox_flow_energy(std::span<const Vec2> state, std::span<const Image> frames,
                                   const FlowEnergyParams& p, double tau);

}  // namespace popt::proxops
