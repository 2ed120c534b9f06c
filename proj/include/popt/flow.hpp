#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "popt/grid.hpp"
#include "popt/proxops.hpp"
#include "popt/solvers.hpp"
#include "popt/steprules.hpp"

// Problem builders binding the online solvers to video denoising with
// optical-flow displacement predictors, plus synthetic scene generation.

namespace popt::flow {

using grid::Displacement;
using grid::Image;
using grid::Vec2;
using grid::VectorField;

// One frame of the stream. `shift_true`/`shift_meas` describe the content
// motion from the previous frame to this one: warp(prev, shift) ~ this.
// Frame 0 carries zero shifts.
struct FrameRecord {
  long k = 0;
  Image clean;
  Image noisy;
  Vec2 shift_true;
  Vec2 shift_meas;
};

// Crop window wandering over a source image by Brownian motion, reflected at
// the borders so the crop never leaves the source. Fully determined by seed.
struct SyntheticScene {
  Image source;
  int crop_height = 64;
  int crop_width = 64;
  double brown_std = 2.0;        // pixels/frame, per component
  double image_noise_std = 0.5;  // additive Gaussian, intensities nominally [0,1]
  double disp_noise_frac = 0.05; // measured shift noise: std = frac * |true step|
  std::uint64_t seed = 1;
};

// Deterministic Gaussian source used by generators and tests.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
  double normal();

 private:
  double uniform();
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

class SceneGenerator {
 public:
  explicit SceneGenerator(SyntheticScene scene);
  std::optional<FrameRecord> next();      // never exhausts; cap externally
  void set_frame_limit(long n) { limit_ = n; }

 private:
  SyntheticScene scene_;
  GaussianRng rng_;
  Vec2 pos_;
  long frame_ = 0;
  long limit_ = -1;
};

// Procedural grayscale test chart: smooth ramps, blobs and hard edges.
Image make_test_source(int height, int width);

// Penalty term of the warping prediction bound:
//   LambdaV*(4*Lambda - 3*LambdaV) / (8*(Lambda - LambdaV)) * M * |v - v_true|^2.
// Requires Lambda > LambdaV > 0 and M >= 0.
double prediction_penalty(double Lambda, double LambdaV, double M, double v_err_norm_sq);

// Primal/dual predictor pair for a measured displacement: both variables are
// warped by the same field. The dual prediction prox is applied afterwards by
// the solver step.
struct KnownFlowPrediction {
  Image xi;
  VectorField dual_pre;
};
KnownFlowPrediction known_flow_predictors(const Image& x, const VectorField& y,
                                          const Displacement& v);

// --- window bookkeeping for the unknown-displacement model ----------------

// State-k window: cumulative shifts u_j of frames j = iota(k)..k+1 relative
// to the base frame iota(k)-1 (whose shift is pinned at 0).
long window_base(long k, int n);  // iota(k) = max(1, k+2-n)

struct FlowWindow {
  long k = 0;
  int n = 1;
  std::vector<Vec2> u;
};

// Advance the window across one prediction step: the inter-frame shift used
// to warp x and y, the re-based window for state k+1 with the next entry
// predicted by holding the last cumulative shift, and the re-base amount
// (old shift of the new base frame).
struct WindowPrediction {
  Vec2 step_shift;
  std::vector<Vec2> u_next;
  Vec2 rebase_shift;
  bool rebased = false;
};
WindowPrediction unknown_flow_step_predictors(const FlowWindow& w);

// --- per-step output -------------------------------------------------------

struct StepOutcome {
  const Image* x = nullptr;            // emitted iterate
  const Image* frame_clean = nullptr;  // ground truth of the emitted frame
  const Image* frame_noisy = nullptr;  // data of the emitted frame
  solvers::IterationTrace trace;
  Vec2 cum_disp_est;   // cumulative displacement estimate at the emitted frame
  Vec2 cum_disp_true;  // cumulative true displacement at the emitted frame
};

// --- problems ---------------------------------------------------------------

// Primal-dual denoising with measured displacements. One solver step per
// frame record.
class KnownFlowProblem {
 public:
  using Primal = Image;
  using Dual = VectorField;

  KnownFlowProblem(steprules::StepConfig cfg, double alpha, int height, int width);

  std::optional<StepOutcome> step(const FrameRecord& rec);

  // solver interface
  Primal prox_primal(long k, const Primal& z, double tau) const;
  Dual prox_dual(long k, const Dual& z, double sigma) const;
  Dual prox_dual_shifted(long k, const Dual& z, double sigma_tilde) const;
  Dual apply_k(long k, const Primal& x) const;
  Primal apply_k_adjoint(long k, const Dual& y) const;
  Primal predict_primal(long k, const Primal& x) const;
  Dual predict_dual(long k, const Dual& y) const;

  double objective(const Image& x, const Image& b) const;
  const Image& x() const { return state_.x; }
  const VectorField& y() const { return state_.y; }
  const steprules::StepConfig& config() const { return cfg_; }

 private:
  steprules::StepConfig cfg_;
  double alpha_;
  solvers::PopdState<KnownFlowProblem> state_;
  Image cur_clean_, cur_noisy_;
  Displacement cur_disp_ = Displacement::constant({0, 0});
  Vec2 cum_meas_, cum_true_;
  long k_ = 0;
};

// Forward-backward variant: TV prox solved by fixed-iteration FISTA.
class KnownFlowFbProblem {
 public:
  using Primal = Image;

  KnownFlowFbProblem(double tau, double alpha, int fista_iters, int height, int width);

  std::optional<StepOutcome> step(const FrameRecord& rec);

  Primal grad_smooth(long k, const Primal& z) const;
  Primal prox_nonsmooth(long k, const Primal& z, double tau) const;
  Primal predict(long k, const Primal& x);

  double objective(const Image& x, const Image& b) const;
  const Image& x() const { return x_; }

 private:
  double tau_, alpha_;
  int fista_iters_;
  Image x_;
  Image cur_clean_, cur_noisy_;
  Image last_prediction_;
  Displacement cur_disp_ = Displacement::constant({0, 0});
  Vec2 cum_meas_, cum_true_;
  long k_ = 0;
};

// Joint denoising and displacement estimation. The windowed energy couples
// frames (k+1, k+2), so the first two records only prime the buffers and the
// emitted iterate lags the newest frame by one.
class UnknownFlowProblem {
 public:
  struct Primal {
    Image x;
    std::vector<Vec2> u;
  };
  using Dual = VectorField;

  UnknownFlowProblem(steprules::StepConfig cfg, double alpha, proxops::FlowEnergyParams flow,
                     int height, int width);

  std::optional<StepOutcome> step(const FrameRecord& rec);

  // solver interface
  Primal prox_primal(long k, const Primal& z, double tau) const;
  Dual prox_dual(long k, const Dual& z, double sigma) const;
  Dual prox_dual_shifted(long k, const Dual& z, double sigma_tilde) const;
  Dual apply_k(long k, const Primal& x) const;
  Primal apply_k_adjoint(long k, const Dual& y) const;
  Primal predict_primal(long k, const Primal& x);
  Dual predict_dual(long k, const Dual& y) const;

  double objective(const Primal& p, const Image& b) const;
  Vec2 absolute_displacement() const;
  // displacement of the newest solved frame relative to the window base frame
  Vec2 window_relative_displacement() const;
  long window_base_frame() const { return window_base(k_, flow_.window_frames) - 1; }
  const Primal& primal() const { return state_.x; }
  int warmup_records() const { return 2; }

 private:
  steprules::StepConfig cfg_;
  double alpha_;
  proxops::FlowEnergyParams flow_;
  solvers::PopdState<UnknownFlowProblem> state_;

  std::deque<Image> noisy_, clean_;
  std::vector<proxops::FlowPairTerm> terms_;
  long first_buffered_ = 0;  // frame index of noisy_.front()
  long records_seen_ = 0;
  long k_ = 0;  // next solver step index
  Vec2 base_offset_;
  Vec2 cum_true_prev_, cum_true_cur_;
  Vec2 pending_shift_;
  std::vector<Vec2> pending_window_;
};

// vector-space operations for the composite primal
UnknownFlowProblem::Primal lincomb(double a, const UnknownFlowProblem::Primal& p, double b,
                                   const UnknownFlowProblem::Primal& q);
double norm_sq(const UnknownFlowProblem::Primal& p);

}  // namespace popt::flow
