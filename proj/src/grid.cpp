#include "popt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace popt::grid {

namespace {

constexpr std::size_t kParallelCutoff = 1 << 14;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline double bilinear_at(const Image& img, double si, double sj) {
  const int h = img.height, w = img.width;
  si = std::min(std::max(si, 0.0), static_cast<double>(h - 1));
  sj = std::min(std::max(sj, 0.0), static_cast<double>(w - 1));
  const int i0 = static_cast<int>(si);
  const int j0 = static_cast<int>(sj);
  const int i1 = std::min(i0 + 1, h - 1);
  const int j1 = std::min(j0 + 1, w - 1);
  const double fi = si - i0;
  const double fj = sj - j0;
  const double top = (1.0 - fj) * img.at(i0, j0) + fj * img.at(i0, j1);
  const double bot = (1.0 - fj) * img.at(i1, j0) + fj * img.at(i1, j1);
  return (1.0 - fi) * top + fi * bot;
}

inline void source_coords(const Displacement& d, int i, int j, double& si, double& sj) {
  if (d.kind == Displacement::Kind::Constant) {
    si = i - d.shift.di;
    sj = j - d.shift.dj;
  } else {
    si = d.targets.at(0, i, j);
    sj = d.targets.at(1, i, j);
  }
}

std::vector<double> gaussian_kernel(double std_dev, int window) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("gaussian_convolve: window must be odd and >= 1");
  if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian_convolve: std must be > 0");
  const int r = window / 2;
  std::vector<double> k(window);
  double sum = 0.0;
  for (int t = -r; t <= r; ++t) {
    k[t + r] = std::exp(-0.5 * (t * t) / (std_dev * std_dev));
    sum += k[t + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

// One separable pass along rows (axis=0) or columns (axis=1), Neumann border.
void convolve_pass(const Image& in, Image& out, const std::vector<double>& k, int axis) {
  const int h = in.height, w = in.width, r = static_cast<int>(k.size()) / 2;
#ifdef _OPENMP
#pragma omp parallel for if (in.size() >= kParallelCutoff)
#endif
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) {
        const int si = axis == 0 ? clampi(i + t, 0, h - 1) : i;
        const int sj = axis == 1 ? clampi(j + t, 0, w - 1) : j;
        acc += k[t + r] * in.at(si, sj);
      }
      out.at(i, j) = acc;
    }
  }
}

}  // namespace

VectorField grad(const Image& img) {
  const int h = img.height, w = img.width;
  VectorField g(h, w);
#ifdef _OPENMP
#pragma omp parallel for if (img.size() >= kParallelCutoff)
#endif
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      g.at(0, i, j) = i + 1 < h ? img.at(i + 1, j) - img.at(i, j) : 0.0;
      g.at(1, i, j) = j + 1 < w ? img.at(i, j + 1) - img.at(i, j) : 0.0;
    }
  }
  return g;
}

Image div(const VectorField& f) {
  const int h = f.height, w = f.width;
  Image d(h, w);
#ifdef _OPENMP
#pragma omp parallel for if (f.plane() >= kParallelCutoff)
#endif
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      if (i == 0)
        acc += f.at(0, 0, j);
      else if (i == h - 1)
        acc += -f.at(0, i - 1, j);
      else
        acc += f.at(0, i, j) - f.at(0, i - 1, j);
      if (j == 0)
        acc += f.at(1, i, 0);
      else if (j == w - 1)
        acc += -f.at(1, i, j - 1);
      else
        acc += f.at(1, i, j) - f.at(1, i, j - 1);
      d.at(i, j) = acc;
    }
  }
  return d;
}

double operator_norm_sq(int height, int width, int iterations) {
  if (iterations < 1) throw std::invalid_argument("operator_norm_sq: iterations must be >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("operator_norm_sq: bad grid");
  if (height == 1 && width == 1) return 0.0;

  Image v(height, width);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j)
      v.at(i, j) = (((i + j) & 1) ? 1.0 : -1.0) + 0.25 * std::sin(0.9 * i + 0.7 * j + 0.3);

  double rayleigh = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double n = std::sqrt(norm_sq(v));
    if (n == 0.0) return 0.0;
    for (double& x : v.data) x /= n;
    Image av = div(grad(v));
    for (double& x : av.data) x = -x;  // D*D v = -div(grad v)
    rayleigh = dot(v, av);
    v = std::move(av);
  }
  return rayleigh;
}

double sample_clamped(const Image& img, double i, double j) { return bilinear_at(img, i, j); }

Image warp(const Image& img, const Displacement& disp) {
  const int h = img.height, w = img.width;
  Image out(h, w);
#ifdef _OPENMP
#pragma omp parallel for if (img.size() >= kParallelCutoff)
#endif
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double si, sj;
      source_coords(disp, i, j, si, sj);
      out.at(i, j) = bilinear_at(img, si, sj);
    }
  }
  return out;
}

VectorField warp(const VectorField& f, const Displacement& disp) {
  const int h = f.height, w = f.width;
  VectorField out(h, w);
  for (int c = 0; c < 2; ++c) {
    Image plane(h, w);
    std::copy_n(f.data.begin() + c * f.plane(), f.plane(), plane.data.begin());
    Image wp = warp(plane, disp);
    std::copy_n(wp.data.begin(), f.plane(), out.data.begin() + c * f.plane());
  }
  return out;
}

Image gaussian_convolve(const Image& img, double std_dev, int window) {
  if (window >= 2 * std::min(img.height, img.width) + 1)
    throw std::invalid_argument("gaussian_convolve: window too large for image");
  const auto k = gaussian_kernel(std_dev, window);
  Image tmp(img.height, img.width), out(img.height, img.width);
  convolve_pass(img, tmp, k, 0);
  convolve_pass(tmp, out, k, 1);
  return out;
}

double dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.data.size(); ++t) s += a.data[t] * b.data[t];
  return s;
}

double dot(const VectorField& a, const VectorField& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.data.size(); ++t) s += a.data[t] * b.data[t];
  return s;
}

double norm_sq(const Image& a) { return dot(a, a); }
double norm_sq(const VectorField& a) { return dot(a, a); }

Image lincomb(double a, const Image& x, double b, const Image& y) {
  Image out(x.height, x.width);
#ifdef _OPENMP
#pragma omp parallel for if (x.size() >= kParallelCutoff)
#endif
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(x.data.size()); ++t)
    out.data[t] = a * x.data[t] + b * y.data[t];
  return out;
}

VectorField lincomb(double a, const VectorField& x, double b, const VectorField& y) {
  VectorField out(x.height, x.width);
#ifdef _OPENMP
#pragma omp parallel for if (x.data.size() >= kParallelCutoff)
#endif
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(x.data.size()); ++t)
    out.data[t] = a * x.data[t] + b * y.data[t];
  return out;
}

double tv_norm(const VectorField& f) {
  double s = 0.0;
  const std::size_t p = f.plane();
  for (std::size_t t = 0; t < p; ++t) s += std::hypot(f.data[t], f.data[p + t]);
  return s;
}

namespace serial {

VectorField grad(const Image& img) {
  const int h = img.height, w = img.width;
  VectorField g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      g.at(0, i, j) = i + 1 < h ? img.at(i + 1, j) - img.at(i, j) : 0.0;
      g.at(1, i, j) = j + 1 < w ? img.at(i, j + 1) - img.at(i, j) : 0.0;
    }
  return g;
}

Image div(const VectorField& f) {
  const int h = f.height, w = f.width;
  Image d(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      if (i == 0)
        acc += f.at(0, 0, j);
      else if (i == h - 1)
        acc += -f.at(0, i - 1, j);
      else
        acc += f.at(0, i, j) - f.at(0, i - 1, j);
      if (j == 0)
        acc += f.at(1, i, 0);
      else if (j == w - 1)
        acc += -f.at(1, i, j - 1);
      else
        acc += f.at(1, i, j) - f.at(1, i, j - 1);
      d.at(i, j) = acc;
    }
  return d;
}

Image warp(const Image& img, const Displacement& disp) {
  const int h = img.height, w = img.width;
  Image out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double si, sj;
      source_coords(disp, i, j, si, sj);
      out.at(i, j) = bilinear_at(img, si, sj);
    }
  return out;
}

Image gaussian_convolve(const Image& img, double std_dev, int window) {
  if (window >= 2 * std::min(img.height, img.width) + 1)
    throw std::invalid_argument("gaussian_convolve: window too large for image");
  const auto k = gaussian_kernel(std_dev, window);
  const int h = img.height, w = img.width, r = window / 2;
  Image tmp(h, w), out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * img.at(clampi(i + t, 0, h - 1), j);
      tmp.at(i, j) = acc;
    }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp.at(i, clampi(j + t, 0, w - 1));
      out.at(i, j) = acc;
    }
  return out;
}

}  // namespace serial

}  // namespace popt::grid
