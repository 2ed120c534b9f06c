#pragma once

#include <cstddef>
#include <vector>

// Dense image/field containers and the discrete differential calculus used by
// the online solvers: forward-difference gradient D, its negative adjoint div,
// bilinear warping by displacement fields, and separable Gaussian convolution.
//
// Conventions:
//  - Image is a row-major H x W grid of doubles.
//  - VectorField stores two planes: component 0 is the row-direction (i)
//    difference, component 1 the column-direction (j) difference.
//  - A constant displacement u acts as v(xi) = xi - u, so warp(img, u)
//    samples img at (i - u.di, j - u.dj); positive u moves content by +u.
//  - Samples outside the grid use clamped (replicate) extension.

namespace popt::grid {

struct Vec2 {
  double di = 0.0;  // row component
  double dj = 0.0;  // column component
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.di + b.di, a.dj + b.dj}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.di - b.di, a.dj - b.dj}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.di, s * a.dj}; }

struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // size height*width, row-major

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * width + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * width + j]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

struct VectorField {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // two planes of height*width

  VectorField() = default;
  VectorField(int h, int w)
      : height(h), width(w), data(2 * static_cast<std::size_t>(h) * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int i, int j) {
    return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(i) * width + j];
  }
  double at(int c, int i, int j) const {
    return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(i) * width + j];
  }
  bool same_shape(const VectorField& o) const { return height == o.height && width == o.width; }
};

// v^k: either a constant per-frame shift or a full field of absolute target
// coordinates (row, col) per pixel.
struct Displacement {
  enum class Kind { Constant, Field };
  Kind kind = Kind::Constant;
  Vec2 shift;
  VectorField targets;  // Field: plane 0 = target row, plane 1 = target col

  static Displacement constant(Vec2 u) {
    Displacement d;
    d.kind = Kind::Constant;
    d.shift = u;
    return d;
  }
  static Displacement field(VectorField t) {
    Displacement d;
    d.kind = Kind::Field;
    d.targets = std::move(t);
    return d;
  }
};

// Forward differences, zero in the last row/column; cell width 1.
VectorField grad(const Image& img);

// Negative adjoint of grad: <grad x, y> + <x, div y> = 0.
Image div(const VectorField& field);

// Power-iteration estimate of the largest eigenvalue of D*D. Monotone
// nondecreasing in `iterations`; bounded by 8 for any grid. 1x1 grids give 0.
double operator_norm_sq(int height, int width, int iterations);

// Bilinear sample at real coordinates (i, j), clamped to the grid.
double sample_clamped(const Image& img, double i, double j);

// output(xi) = img(v(xi)) with bilinear interpolation and clamped extension.
Image warp(const Image& img, const Displacement& disp);
VectorField warp(const VectorField& field, const Displacement& disp);  // per channel

// Separable convolution with a normalized truncated Gaussian, Neumann
// boundary. `window` must be odd and < 2*min(height,width)+1.
Image gaussian_convolve(const Image& img, double std_dev, int window);

// --- elementwise helpers shared by the solvers ---------------------------

double dot(const Image& a, const Image& b);
double dot(const VectorField& a, const VectorField& b);
double norm_sq(const Image& a);
double norm_sq(const VectorField& a);

// a*x + b*y
Image lincomb(double a, const Image& x, double b, const Image& y);
VectorField lincomb(double a, const VectorField& x, double b, const VectorField& y);

// Sum of pointwise Euclidean norms of a field; alpha * tv_norm(grad x) is the
// isotropic total variation term of the frame objective.
double tv_norm(const VectorField& f);

// Serial reference kernels. The public entry points above may parallelize
// per-pixel loops; these stay single-threaded and are kept for equivalence
// tests and benchmarking.
namespace serial {
VectorField grad(const Image& img);
Image div(const VectorField& field);
Image warp(const Image& img, const Displacement& disp);
Image gaussian_convolve(const Image& img, double std_dev, int window);
}  // namespace serial

}  // namespace popt::grid
