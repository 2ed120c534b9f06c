#pragma once

#include <chrono>
#include <optional>
#include <utility>

#include "popt/steprules.hpp"

// Online solver loops, generic over problem interfaces.
//
// A forward-backward problem P provides:
//   using Primal = ...;            // vector-space type with lincomb/norm_sq via ADL
//   Primal grad_smooth(long k, const Primal& z);
//   Primal prox_nonsmooth(long k, const Primal& z, double tau);
//   Primal predict(long k, const Primal& x);
//
// A primal-dual problem P provides:
//   using Primal = ...; using Dual = ...;
//   Primal prox_primal(long k, const Primal& z, double tau);
//   Dual prox_dual(long k, const Dual& z, double sigma);
//   Dual prox_dual_shifted(long k, const Dual& z, double sigma_tilde);
//   Dual apply_k(long k, const Primal& x);
//   Primal apply_k_adjoint(long k, const Dual& y);
//   Primal predict_primal(long k, const Primal& x);
//   Dual predict_dual(long k, const Dual& y);
//
// Index convention: step k consumes the data of frame k+1 and produces the
// iterate for frame k+1.

namespace popt::solvers {

struct IterationTrace {
  long k = 0;
  double objective = 0.0;
  double pred_residual_sq = 0.0;  // |x_{k+1} - A_k(x_k)|^2
  double dual_residual_sq = 0.0;  // |y_{k+1} - dual prediction|^2
  double step_ms = 0.0;           // wall time of the step, metrics excluded
};

// One forward-backward step: predict, then gradient step and prox at the new
// frame.
template <class P>
typename P::Primal pofb_step(P& prob, long k, const typename P::Primal& x, double tau) {
  auto z = prob.predict(k, x);
  auto g = prob.grad_smooth(k + 1, z);
  auto shifted = lincomb(1.0, z, -tau, g);
  return prob.prox_nonsmooth(k + 1, shifted, tau);
}

template <class P>
struct PopdState {
  typename P::Primal x;
  typename P::Dual y;
};

// One primal-dual step: primal and dual prediction, primal prox, dual prox
// with over-relaxed primal.
template <class P>
std::pair<PopdState<P>, IterationTrace> popd_step(P& prob, const steprules::StepConfig& cfg, long k,
                                                  const PopdState<P>& state) {
  const auto t0 = std::chrono::steady_clock::now();

  auto xi = prob.predict_primal(k, state.x);
  auto pre = lincomb(1.0, prob.predict_dual(k, state.y), cfg.sigma_tilde, prob.apply_k(k + 1, xi));
  auto upsilon = prob.prox_dual_shifted(k + 1, pre, cfg.sigma_tilde);

  auto xnew = prob.prox_primal(k + 1, lincomb(1.0, xi, -cfg.tau, prob.apply_k_adjoint(k + 1, upsilon)),
                               cfg.tau);
  auto over = lincomb(2.0, xnew, -1.0, xi);
  auto ynew = prob.prox_dual(k + 1, lincomb(1.0, upsilon, cfg.sigma, prob.apply_k(k + 1, over)), cfg.sigma);

  const auto t1 = std::chrono::steady_clock::now();

  IterationTrace tr;
  tr.k = k + 1;
  tr.pred_residual_sq = norm_sq(lincomb(1.0, xnew, -1.0, xi));
  tr.dual_residual_sq = norm_sq(lincomb(1.0, ynew, -1.0, upsilon));
  tr.step_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  PopdState<P> out{std::move(xnew), std::move(ynew)};
  return {std::move(out), tr};
}

// Drives a frame stream through a stateful problem. The problem's
// step(frame) performs at most one solver step per frame (warm-up frames
// return nothing); Source::next() yields std::optional<Frame>, Sink receives
// each emitted (solution, trace). Memory stays bounded by the problem's own
// buffers.
template <class Problem, class Source, class Sink>
long run_online(Problem& prob, Source&& frames, Sink&& sink) {
  long emitted = 0;
  while (auto frame = frames.next()) {
    if (auto out = prob.step(*frame)) {
      ++emitted;
      sink(*out);
    }
  }
  return emitted;
}

}  // namespace popt::solvers
