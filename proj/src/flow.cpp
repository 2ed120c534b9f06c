#include "popt/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace popt::flow {

double GaussianRng::uniform() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return (z >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double GaussianRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

namespace {

double fold(double x, double lo, double hi) {
  if (hi <= lo) return lo;
  const double period = 2.0 * (hi - lo);
  double t = std::fmod(x - lo, period);
  if (t < 0.0) t += period;
  if (t > hi - lo) t = period - t;
  return lo + t;
}

Image crop_bilinear(const Image& src, Vec2 pos, int h, int w) {
  Image out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) out.at(i, j) = grid::sample_clamped(src, pos.di + i, pos.dj + j);
  return out;
}

}  // namespace

SceneGenerator::SceneGenerator(SyntheticScene scene) : scene_(std::move(scene)), rng_(scene_.seed) {
  if (scene_.source.height < scene_.crop_height || scene_.source.width < scene_.crop_width)
    throw std::invalid_argument("SceneGenerator: crop larger than source");
  pos_ = {0.5 * (scene_.source.height - scene_.crop_height),
          0.5 * (scene_.source.width - scene_.crop_width)};
}

std::optional<FrameRecord> SceneGenerator::next() {
  if (limit_ >= 0 && frame_ >= limit_) return std::nullopt;
  FrameRecord rec;
  rec.k = frame_;
  if (frame_ > 0) {
    const Vec2 inc{rng_.normal() * scene_.brown_std, rng_.normal() * scene_.brown_std};
    const double hi_i = static_cast<double>(scene_.source.height - scene_.crop_height);
    const double hi_j = static_cast<double>(scene_.source.width - scene_.crop_width);
    const Vec2 np{fold(pos_.di + inc.di, 0.0, hi_i), fold(pos_.dj + inc.dj, 0.0, hi_j)};
    rec.shift_true = pos_ - np;  // warp(prev_frame, shift) ~ new frame
    const double ns = scene_.disp_noise_frac * std::hypot(rec.shift_true.di, rec.shift_true.dj);
    rec.shift_meas = rec.shift_true + Vec2{rng_.normal() * ns, rng_.normal() * ns};
    pos_ = np;
  }
  rec.clean = crop_bilinear(scene_.source, pos_, scene_.crop_height, scene_.crop_width);
  rec.noisy = rec.clean;
  for (double& v : rec.noisy.data) v += scene_.image_noise_std * rng_.normal();
  ++frame_;
  return rec;
}

Image make_test_source(int height, int width) {
  Image img(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double fi = static_cast<double>(i) / height;
      const double fj = static_cast<double>(j) / width;
      double v = 0.5;
      // multi-scale texture everywhere: wavelengths of 20-60 px pass the
      // flow-estimation smoothing and keep its normal equations well
      // conditioned over any crop
      v += 0.17 * std::sin(0.155 * i + 0.9 * std::sin(0.011 * j));
      v += 0.17 * std::cos(0.135 * j + 0.8 * std::sin(0.013 * i));
      v += 0.10 * std::sin(0.105 * i + 0.09 * j + 1.3);
      v += 0.16 * std::sin(0.20 * i + 0.21 * j + 0.4);
      v += 0.16 * std::sin(0.23 * i - 0.19 * j + 2.1);
      // hard-edged features so the gradient field is nontrivial
      if (fi > 0.2 && fi < 0.45 && fj > 0.15 && fj < 0.4) v += 0.18;
      if (fi > 0.55 && fi < 0.85 && fj > 0.5 && fj < 0.6) v -= 0.16;
      const double dc = std::hypot(fi - 0.7, fj - 0.25);
      if (dc < 0.12) v += 0.2;
      img.at(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

double prediction_penalty(double Lambda, double LambdaV, double M, double v_err_norm_sq) {
  if (!(LambdaV > 0.0) || !(Lambda > LambdaV))
    throw std::invalid_argument("prediction_penalty: need Lambda > LambdaV > 0");
  if (M < 0.0 || v_err_norm_sq < 0.0)
    throw std::invalid_argument("prediction_penalty: M and error must be >= 0");
  return LambdaV * (4.0 * Lambda - 3.0 * LambdaV) / (8.0 * (Lambda - LambdaV)) * M * v_err_norm_sq;
}

KnownFlowPrediction known_flow_predictors(const Image& x, const VectorField& y,
                                          const Displacement& v) {
  return {grid::warp(x, v), grid::warp(y, v)};
}

long window_base(long k, int n) { return std::max<long>(1, k + 2 - n); }

WindowPrediction unknown_flow_step_predictors(const FlowWindow& w) {
  const long io = window_base(w.k, w.n);
  const long expected = w.k + 2 - io;
  if (static_cast<long>(w.u.size()) != expected)
    throw std::invalid_argument("unknown_flow_step_predictors: window size mismatch");

  WindowPrediction out;
  const Vec2 u_last = w.u.back();                       // shift of frame k+1
  const long qk = w.k - io;                             // index of frame k's entry
  const Vec2 u_k = qk >= 0 ? w.u[static_cast<std::size_t>(qk)] : Vec2{};
  out.step_shift = u_last - u_k;

  const long io_next = window_base(w.k + 1, w.n);
  out.rebased = io_next > io;
  out.rebase_shift = out.rebased ? w.u.front() : Vec2{};

  out.u_next.reserve(w.u.size() + 1 - (out.rebased ? 1 : 0));
  for (std::size_t q = out.rebased ? 1 : 0; q < w.u.size(); ++q)
    out.u_next.push_back(w.u[q] - out.rebase_shift);
  // hold the last cumulative shift: zero predicted motion into frame k+2
  out.u_next.push_back(u_last - out.rebase_shift);
  return out;
}

// --- KnownFlowProblem -------------------------------------------------------

KnownFlowProblem::KnownFlowProblem(steprules::StepConfig cfg, double alpha, int height, int width)
    : cfg_(cfg), alpha_(alpha) {
  state_.x = Image(height, width);
  state_.y = VectorField(height, width);
}

std::optional<StepOutcome> KnownFlowProblem::step(const FrameRecord& rec) {
  cur_clean_ = rec.clean;
  cur_noisy_ = rec.noisy;
  cur_disp_ = Displacement::constant(rec.shift_meas);
  cum_meas_ = cum_meas_ + rec.shift_meas;
  cum_true_ = cum_true_ + rec.shift_true;

  auto [next, tr] = solvers::popd_step(*this, cfg_, k_, state_);
  state_ = std::move(next);
  tr.k = rec.k;
  tr.objective = objective(state_.x, cur_noisy_);
  ++k_;

  StepOutcome out;
  out.x = &state_.x;
  out.frame_clean = &cur_clean_;
  out.frame_noisy = &cur_noisy_;
  out.trace = tr;
  out.cum_disp_est = cum_meas_;
  out.cum_disp_true = cum_true_;
  return out;
}

Image KnownFlowProblem::prox_primal(long, const Primal& z, double tau) const {
  return proxops::prox_quadratic_data(z, cur_noisy_, tau);
}

VectorField KnownFlowProblem::prox_dual(long, const Dual& z, double) const {
  return proxops::project_dual_ball(z, alpha_);
}

VectorField KnownFlowProblem::prox_dual_shifted(long, const Dual& z, double sigma_tilde) const {
  return proxops::prox_huber_dual(z, {alpha_, sigma_tilde, cfg_.rho_tilde});
}

VectorField KnownFlowProblem::apply_k(long, const Primal& x) const { return grid::grad(x); }

Image KnownFlowProblem::apply_k_adjoint(long, const Dual& y) const {
  Image d = grid::div(y);
  for (double& v : d.data) v = -v;
  return d;
}

Image KnownFlowProblem::predict_primal(long, const Primal& x) const {
  return grid::warp(x, cur_disp_);
}

VectorField KnownFlowProblem::predict_dual(long, const Dual& y) const {
  return grid::warp(y, cur_disp_);
}

double KnownFlowProblem::objective(const Image& x, const Image& b) const {
  const Image diff = grid::lincomb(1.0, x, -1.0, b);
  return 0.5 * grid::norm_sq(diff) + alpha_ * grid::tv_norm(grid::grad(x));
}

// --- KnownFlowFbProblem -----------------------------------------------------

KnownFlowFbProblem::KnownFlowFbProblem(double tau, double alpha, int fista_iters, int height,
                                       int width)
    : tau_(tau), alpha_(alpha), fista_iters_(fista_iters), x_(height, width) {}

std::optional<StepOutcome> KnownFlowFbProblem::step(const FrameRecord& rec) {
  cur_clean_ = rec.clean;
  cur_noisy_ = rec.noisy;
  cur_disp_ = Displacement::constant(rec.shift_meas);
  cum_meas_ = cum_meas_ + rec.shift_meas;
  cum_true_ = cum_true_ + rec.shift_true;

  const auto t0 = std::chrono::steady_clock::now();
  x_ = solvers::pofb_step(*this, k_, x_, tau_);
  const auto t1 = std::chrono::steady_clock::now();
  ++k_;

  solvers::IterationTrace tr;
  tr.k = rec.k;
  tr.step_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  tr.pred_residual_sq = grid::norm_sq(grid::lincomb(1.0, x_, -1.0, last_prediction_));
  tr.objective = objective(x_, cur_noisy_);

  StepOutcome out;
  out.x = &x_;
  out.frame_clean = &cur_clean_;
  out.frame_noisy = &cur_noisy_;
  out.trace = tr;
  out.cum_disp_est = cum_meas_;
  out.cum_disp_true = cum_true_;
  return out;
}

Image KnownFlowFbProblem::grad_smooth(long, const Primal& z) const {
  return grid::lincomb(1.0, z, -1.0, cur_noisy_);
}

Image KnownFlowFbProblem::prox_nonsmooth(long, const Primal& z, double tau) const {
  return proxops::fista_tv_prox(z, alpha_ * tau, fista_iters_);
}

Image KnownFlowFbProblem::predict(long, const Primal& x) {
  last_prediction_ = grid::warp(x, cur_disp_);
  return last_prediction_;
}

double KnownFlowFbProblem::objective(const Image& x, const Image& b) const {
  const Image diff = grid::lincomb(1.0, x, -1.0, b);
  return 0.5 * grid::norm_sq(diff) + alpha_ * grid::tv_norm(grid::grad(x));
}

// --- UnknownFlowProblem -----------------------------------------------------

UnknownFlowProblem::Primal lincomb(double a, const UnknownFlowProblem::Primal& p, double b,
                                   const UnknownFlowProblem::Primal& q) {
  if (p.u.size() != q.u.size()) throw std::invalid_argument("flow primal: window size mismatch");
  UnknownFlowProblem::Primal out;
  out.x = grid::lincomb(a, p.x, b, q.x);
  out.u.resize(p.u.size());
  for (std::size_t t = 0; t < p.u.size(); ++t) out.u[t] = a * p.u[t] + b * q.u[t];
  return out;
}

double norm_sq(const UnknownFlowProblem::Primal& p) {
  double s = grid::norm_sq(p.x);
  for (const Vec2& v : p.u) s += v.di * v.di + v.dj * v.dj;
  return s;
}

UnknownFlowProblem::UnknownFlowProblem(steprules::StepConfig cfg, double alpha,
                                       proxops::FlowEnergyParams flow, int height, int width)
    : cfg_(cfg), alpha_(alpha), flow_(flow) {
  flow_.validate();
  state_.x.x = Image(height, width);
  state_.y = VectorField(height, width);
}

std::optional<StepOutcome> UnknownFlowProblem::step(const FrameRecord& rec) {
  cum_true_prev_ = cum_true_cur_;
  cum_true_cur_ = cum_true_cur_ + rec.shift_true;
  noisy_.push_back(rec.noisy);
  clean_.push_back(rec.clean);
  if (noisy_.size() >= 2)
    terms_.push_back(
        proxops::build_flow_pair_term(noisy_[noisy_.size() - 2], noisy_.back(), flow_));
  ++records_seen_;
  if (records_seen_ <= warmup_records()) {
    if (records_seen_ == warmup_records()) state_.x.u = {Vec2{}};  // shift of frame 1, zero init
    return std::nullopt;
  }

  FlowWindow w{k_, flow_.window_frames, state_.x.u};
  auto pred = unknown_flow_step_predictors(w);
  pending_shift_ = pred.step_shift;
  pending_window_ = std::move(pred.u_next);
  if (pred.rebased) {
    base_offset_ = base_offset_ + pred.rebase_shift;
    noisy_.pop_front();
    clean_.pop_front();
    terms_.erase(terms_.begin());
    ++first_buffered_;
  }
  if (terms_.size() != pending_window_.size())
    throw std::logic_error("UnknownFlowProblem: window/terms desynchronized");

  auto [next, tr] = solvers::popd_step(*this, cfg_, k_, state_);
  state_ = std::move(next);
  tr.k = k_ + 1;  // emitted frame index
  tr.objective = objective(state_.x, noisy_[noisy_.size() - 2]);
  ++k_;

  StepOutcome out;
  out.x = &state_.x.x;
  out.frame_clean = &clean_[clean_.size() - 2];
  out.frame_noisy = &noisy_[noisy_.size() - 2];
  out.trace = tr;
  out.cum_disp_est = absolute_displacement();
  out.cum_disp_true = cum_true_prev_;
  return out;
}

UnknownFlowProblem::Primal UnknownFlowProblem::prox_primal(long, const Primal& z, double tau) const {
  Primal out;
  out.x = proxops::prox_quadratic_data(z.x, noisy_[noisy_.size() - 2], tau);
  out.u = proxops::prox_flow_energy(z.u, std::span<const proxops::FlowPairTerm>(terms_), flow_, tau);
  return out;
}

VectorField UnknownFlowProblem::prox_dual(long, const Dual& z, double) const {
  return proxops::project_dual_ball(z, alpha_);
}

VectorField UnknownFlowProblem::prox_dual_shifted(long, const Dual& z, double sigma_tilde) const {
  return proxops::prox_huber_dual(z, {alpha_, sigma_tilde, cfg_.rho_tilde});
}

VectorField UnknownFlowProblem::apply_k(long, const Primal& p) const { return grid::grad(p.x); }

UnknownFlowProblem::Primal UnknownFlowProblem::apply_k_adjoint(long, const Dual& y) const {
  Primal out;
  out.x = grid::div(y);
  for (double& v : out.x.data) v = -v;
  out.u.assign(pending_window_.size(), Vec2{});
  return out;
}

UnknownFlowProblem::Primal UnknownFlowProblem::predict_primal(long, const Primal& p) {
  Primal out;
  out.x = grid::warp(p.x, Displacement::constant(pending_shift_));
  out.u = pending_window_;
  return out;
}

VectorField UnknownFlowProblem::predict_dual(long, const Dual& y) const {
  return grid::warp(y, Displacement::constant(pending_shift_));
}

double UnknownFlowProblem::objective(const Primal& p, const Image& b) const {
  const Image diff = grid::lincomb(1.0, p.x, -1.0, b);
  return 0.5 * grid::norm_sq(diff) + alpha_ * grid::tv_norm(grid::grad(p.x)) +
         proxops::flow_energy(p.u, std::span<const proxops::FlowPairTerm>(terms_), flow_);
}

Vec2 UnknownFlowProblem::window_relative_displacement() const {
  const long io = window_base(k_, flow_.window_frames);
  const long q = k_ - io;
  Vec2 rel;
  if (q >= 0 && q < static_cast<long>(state_.x.u.size())) rel = state_.x.u[static_cast<std::size_t>(q)];
  return rel;
}

Vec2 UnknownFlowProblem::absolute_displacement() const {
  return base_offset_ + window_relative_displacement();
}

}  // namespace popt::flow
