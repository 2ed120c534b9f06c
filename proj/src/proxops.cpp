#include "popt/proxops.hpp"

#include <cmath>
#include <stdexcept>

namespace popt::proxops {

void HuberDualParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("HuberDualParams: alpha must be > 0");
  if (!(sigma_tilde > 0.0)) throw std::invalid_argument("HuberDualParams: sigma_tilde must be > 0");
  if (rho_tilde < 0.0) throw std::invalid_argument("HuberDualParams: rho_tilde must be >= 0");
}

void FlowEnergyParams::validate() const {
  if (theta < 0.0 || lambda1 < 0.0) throw std::invalid_argument("FlowEnergyParams: weights must be >= 0");
  if (theta == 0.0 && lambda1 == 0.0)
    throw std::invalid_argument("FlowEnergyParams: theta and lambda1 cannot both be zero");
  if (!(T > 0.0)) throw std::invalid_argument("FlowEnergyParams: T must be > 0");
  if (window_frames < 1) throw std::invalid_argument("FlowEnergyParams: window must hold >= 1 frame");
  if (!(kernel_std > 0.0) || kernel_window < 1 || kernel_window % 2 == 0)
    throw std::invalid_argument("FlowEnergyParams: bad smoothing kernel");
}

Image prox_quadratic_data(const Image& z, const Image& b, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("prox_quadratic_data: tau must be > 0");
  if (!z.same_shape(b)) throw std::invalid_argument("prox_quadratic_data: shape mismatch");
  Image out(z.height, z.width);
  const double inv = 1.0 / (1.0 + tau);
  for (std::size_t t = 0; t < z.data.size(); ++t) out.data[t] = (z.data[t] + tau * b.data[t]) * inv;
  return out;
}

VectorField project_dual_ball(VectorField y, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("project_dual_ball: alpha must be >= 0");
  const std::size_t p = y.plane();
  for (std::size_t t = 0; t < p; ++t) {
    const double a = y.data[t], b = y.data[p + t];
    const double n = std::sqrt(a * a + b * b);
    if (n > alpha) {
      double s = alpha / n;
      double a2 = a * s, b2 = b * s;
      // keep the scaled norm at or below alpha in float arithmetic, so the
      // projection is idempotent bit for bit
      while (std::sqrt(a2 * a2 + b2 * b2) > alpha) {
        s = std::nextafter(s, 0.0);
        a2 = a * s;
        b2 = b * s;
      }
      y.data[t] = a2;
      y.data[p + t] = b2;
    }
  }
  return y;
}

VectorField prox_huber_dual(const VectorField& z, const HuberDualParams& p) {
  p.validate();
  const double s = 1.0 / (1.0 + p.sigma_tilde * p.rho_tilde);
  VectorField scaled(z.height, z.width);
  for (std::size_t t = 0; t < z.data.size(); ++t) scaled.data[t] = s * z.data[t];
  return project_dual_ball(std::move(scaled), p.alpha);
}

Image fista_tv_prox(const Image& z, double alpha_tau, int iters) {
  if (iters < 1) throw std::invalid_argument("fista_tv_prox: iters must be >= 1");
  if (alpha_tau == 0.0) return z;
  const double step = 1.0 / 8.0;  // 1/|D|^2 with cell width 1

  VectorField y(z.height, z.width), y_prev(z.height, z.width), w(z.height, z.width);
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    Image inner = grid::div(w);
    for (std::size_t q = 0; q < inner.data.size(); ++q) inner.data[q] += z.data[q];
    VectorField g = grid::grad(inner);
    VectorField cand = grid::lincomb(1.0, w, step, g);
    VectorField y_new = project_dual_ball(std::move(cand), alpha_tau);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    w = grid::lincomb(1.0 + (t - 1.0) / t_new, y_new, -(t - 1.0) / t_new, y_prev);
    y_prev = std::move(y_new);
    t = t_new;
  }
  Image out = grid::div(y_prev);
  for (std::size_t q = 0; q < out.data.size(); ++q) out.data[q] += z.data[q];
  return out;
}

FlowPairTerm build_flow_pair_term(const Image& b_j, const Image& b_j1, const FlowEnergyParams& p) {
  p.validate();
  if (!b_j.same_shape(b_j1)) throw std::invalid_argument("build_flow_pair_term: shape mismatch");
  Image diff(b_j.height, b_j.width);
  for (std::size_t t = 0; t < diff.data.size(); ++t)
    diff.data[t] = (b_j1.data[t] - b_j.data[t]) / p.T;
  const Image g = grid::gaussian_convolve(diff, p.kernel_std, p.kernel_window);
  const Image c = grid::gaussian_convolve(b_j, p.kernel_std, p.kernel_window);

  // Centered differences for the smoothed-frame gradient. A one-sided stencil
  // correlates with the same frame's noise inside g (half-pixel offset of the
  // smoothed autocovariance) and biases the displacement estimate by a fixed
  // amount per frame; the symmetric stencil cancels that correlation.
  //
  // The brightness-constancy sums skip a border band: content flowing in at
  // the frame edge has no counterpart in the previous frame, and the smoothing
  // spreads that mismatch inward by the kernel radius.
  const int h = c.height, w = c.width;
  const int margin = std::min({p.kernel_window / 2 + 4, (h - 1) / 2, (w - 1) / 2});
  FlowPairTerm term;
  term.pixels = b_j.size();
  for (int i = margin; i < h - margin; ++i) {
    for (int j = margin; j < w - margin; ++j) {
      const double gi = 0.5 * (c.at(i + 1, j) - c.at(i - 1, j));
      const double gj = 0.5 * (c.at(i, j + 1) - c.at(i, j - 1));
      const double gv = g.at(i, j);
      term.a11 += gi * gi;
      term.a12 += gi * gj;
      term.a22 += gj * gj;
      term.r1 += gv * gi;
      term.r2 += gv * gj;
      term.g_sq += gv * gv;
    }
  }
  return term;
}

namespace {

struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;  // [[a,b],[c,d]]
};

inline Mat2 operator+(Mat2 x, Mat2 y) { return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d}; }
inline Mat2 operator-(Mat2 x, Mat2 y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }
inline Vec2 mul(const Mat2& m, Vec2 v) { return {m.a * v.di + m.b * v.dj, m.c * v.di + m.d * v.dj}; }

inline Mat2 inverse(const Mat2& m) {
  const double det = m.a * m.d - m.b * m.c;
  if (det == 0.0) throw std::runtime_error("prox_flow_energy: singular block");
  const double s = 1.0 / det;
  return {m.d * s, -m.b * s, -m.c * s, m.a * s};
}

inline Mat2 mul(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

// Per-term scaled quadratic: E_t(d) = 0.5 d'Qd + r'd + const.
inline void term_quadratic(const FlowPairTerm& t, const FlowEnergyParams& p, double inv_n,
                           Mat2& Q, Vec2& r) {
  const double lam = p.lambda1 * static_cast<double>(t.pixels);
  Q = {inv_n * (p.theta * t.a11 + lam), inv_n * p.theta * t.a12, inv_n * p.theta * t.a12,
       inv_n * (p.theta * t.a22 + lam)};
  r = {inv_n * p.theta * t.r1, inv_n * p.theta * t.r2};
}

}  // namespace

double flow_energy(std::span<const Vec2> state, std::span<const FlowPairTerm> terms,
                   const FlowEnergyParams& p) {
  if (terms.size() != state.size()) throw std::invalid_argument("flow_energy: size mismatch");
  const double inv_n = 1.0 / static_cast<double>(terms.size());
  double e = 0.0;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const Vec2 prev = t == 0 ? Vec2{} : state[t - 1];
    const Vec2 d = state[t] - prev;
    Mat2 Q;
    Vec2 r;
    term_quadratic(terms[t], p, inv_n, Q, r);
    const Vec2 qd = mul(Q, d);
    e += 0.5 * (d.di * qd.di + d.dj * qd.dj) + r.di * d.di + r.dj * d.dj +
         0.5 * inv_n * p.theta * terms[t].g_sq;
  }
  return e;
}

std::vector<Vec2> prox_flow_energy(std::span<const Vec2> state, std::span<const FlowPairTerm> terms,
                                   const FlowEnergyParams& p, double tau) {
  p.validate();
  if (!(tau > 0.0)) throw std::invalid_argument("prox_flow_energy: tau must be > 0");
  if (terms.size() != state.size() || state.empty())
    throw std::invalid_argument("prox_flow_energy: need one pair term per window entry");

  const std::size_t m = state.size();
  const double inv_n = 1.0 / static_cast<double>(m);

  // Objective in u: sum_t tau*E_t(u_t - u_{t-1}) + 0.5|u - state|^2, u_{-1} = 0.
  // Stationarity gives a block-tridiagonal system: for each q,
  //   (I + tau*Q_q + tau*Q_{q+1}) u_q - tau*Q_q u_{q-1} - tau*Q_{q+1} u_{q+1}
  //     = state_q - tau*r_q + tau*r_{q+1}.
  std::vector<Mat2> Q(m);
  std::vector<Vec2> r(m);
  for (std::size_t t = 0; t < m; ++t) term_quadratic(terms[t], p, inv_n, Q[t], r[t]);

  std::vector<Mat2> diag(m);
  std::vector<Vec2> rhs(m);
  for (std::size_t q = 0; q < m; ++q) {
    diag[q] = Mat2{1.0 + tau * Q[q].a, tau * Q[q].b, tau * Q[q].c, 1.0 + tau * Q[q].d};
    rhs[q] = state[q] - tau * r[q];
    if (q + 1 < m) {
      diag[q] = diag[q] + Mat2{tau * Q[q + 1].a, tau * Q[q + 1].b, tau * Q[q + 1].c, tau * Q[q + 1].d};
      rhs[q] = rhs[q] + tau * r[q + 1];
    }
  }

  // Block Thomas elimination; the off-diagonal block between q-1 and q is
  // -tau*Q_q (symmetric).
  std::vector<Mat2> off(m), dstar(m);
  std::vector<Vec2> acc(m);
  dstar[0] = diag[0];
  acc[0] = rhs[0];
  for (std::size_t q = 1; q < m; ++q) {
    off[q] = Mat2{-tau * Q[q].a, -tau * Q[q].b, -tau * Q[q].c, -tau * Q[q].d};
    const Mat2 w = mul(off[q], inverse(dstar[q - 1]));
    dstar[q] = diag[q] - mul(w, off[q]);
    acc[q] = rhs[q] - mul(w, acc[q - 1]);
  }
  std::vector<Vec2> u(m);
  u[m - 1] = mul(inverse(dstar[m - 1]), acc[m - 1]);
  for (std::size_t q = m - 1; q-- > 0;)
    u[q] = mul(inverse(dstar[q]), acc[q] - mul(off[q + 1], u[q + 1]));
  return u;
}

std::vector<Vec2> prox_flow_energy(std::span<const Vec2> state, std::span<const Image> frames,
                                   const FlowEnergyParams& p, double tau) {
  if (frames.size() != state.size() + 1)
    throw std::invalid_argument("prox_flow_energy: need window length + 1 frames");
  std::vector<FlowPairTerm> terms;
  terms.reserve(state.size());
  for (std::size_t t = 0; t + 1 < frames.size(); ++t)
    terms.push_back(build_flow_pair_term(frames[t], frames[t + 1], p));
  return prox_flow_energy(state, terms, p, tau);
}

}  // namespace popt::proxops
