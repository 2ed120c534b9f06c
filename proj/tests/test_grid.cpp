#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "popt/grid.hpp"

using namespace popt::grid;

namespace {

std::mt19937_64 rng(12345);

Image random_image(int h, int w) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Image img(h, w);
  for (double& v : img.data) v = ud(rng);
  return img;
}

VectorField random_field(int h, int w) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  VectorField f(h, w);
  for (double& v : f.data) v = ud(rng);
  return f;
}

// Explicit matrix of the forward-difference operator, rows ordered as
// [component-0 plane; component-1 plane].
Eigen::MatrixXd dense_grad_matrix(int h, int w) {
  const int n = h * w;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2 * n, n);
  auto id = [&](int i, int j) { return i * w + j; };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (i + 1 < h) {
        D(id(i, j), id(i + 1, j)) = 1.0;
        D(id(i, j), id(i, j)) = -1.0;
      }
      if (j + 1 < w) {
        D(n + id(i, j), id(i, j + 1)) = 1.0;
        D(n + id(i, j), id(i, j)) = -1.0;
      }
    }
  return D;
}

}  // namespace

TEST_CASE("grad of a constant image is zero") {
  const Image img(7, 5, 0.37);
  const VectorField g = grad(img);
  for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("grad on the 2x2 hand example") {
  Image img(2, 2);
  img.at(0, 0) = 0;
  img.at(0, 1) = 1;
  img.at(1, 0) = 0;
  img.at(1, 1) = 1;
  const VectorField g = grad(img);
  CHECK(g.at(0, 0, 0) == 0.0);  // row difference at (0,0)
  CHECK(g.at(0, 1, 0) == 0.0);  // last row
  CHECK(g.at(1, 0, 0) == 1.0);  // column difference, first column
  CHECK(g.at(1, 1, 0) == 1.0);
  CHECK(g.at(1, 0, 1) == 0.0);  // last column
  CHECK(g.at(1, 1, 1) == 0.0);
}

TEST_CASE("adjoint identity <grad x, y> + <x, div y> = 0") {
  for (int t = 0; t < 100; ++t) {
    const Image x = random_image(17, 13);
    const VectorField y = random_field(17, 13);
    const double lhs = dot(grad(x), y) + dot(x, div(y));
    const double scale = std::sqrt(norm_sq(x)) * std::sqrt(norm_sq(y)) + 1.0;
    CHECK(std::abs(lhs) <= 1e-10 * scale);
  }
  const Image x = random_image(32, 24);
  const VectorField y = random_field(32, 24);
  CHECK(std::abs(dot(grad(x), y) + dot(x, div(y))) <=
        1e-10 * (std::sqrt(norm_sq(x)) * std::sqrt(norm_sq(y)) + 1.0));
}

TEST_CASE("div of a zero field is zero") {
  const Image d = div(VectorField(6, 9));
  for (double v : d.data) CHECK(v == 0.0);
}

TEST_CASE("div(grad) is the 5-point Neumann Laplacian on interior pixels") {
  const Image x = random_image(4, 4);
  const Image lap = div(grad(x));
  for (int i = 1; i < 3; ++i)
    for (int j = 1; j < 3; ++j) {
      const double expect =
          x.at(i + 1, j) + x.at(i - 1, j) + x.at(i, j + 1) + x.at(i, j - 1) - 4.0 * x.at(i, j);
      CHECK(lap.at(i, j) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("linearity of grad, div, warp, convolve") {
  const Image a = random_image(9, 11), b = random_image(9, 11);
  const double s = 1.7, t = -0.6;
  const Image combo = lincomb(s, a, t, b);

  const VectorField g = grad(combo);
  const VectorField ge = lincomb(s, grad(a), t, grad(b));
  for (std::size_t q = 0; q < g.data.size(); ++q)
    CHECK(g.data[q] == doctest::Approx(ge.data[q]).epsilon(1e-13));

  const Displacement d = Displacement::constant({0.6, -1.3});
  const Image w = warp(combo, d);
  const Image we = lincomb(s, warp(a, d), t, warp(b, d));
  for (std::size_t q = 0; q < w.data.size(); ++q)
    CHECK(w.data[q] == doctest::Approx(we.data[q]).epsilon(1e-12));

  const Image c = gaussian_convolve(combo, 2.0, 7);
  const Image ce = lincomb(s, gaussian_convolve(a, 2.0, 7), t, gaussian_convolve(b, 2.0, 7));
  for (std::size_t q = 0; q < c.data.size(); ++q)
    CHECK(c.data[q] == doctest::Approx(ce.data[q]).epsilon(1e-12));
}

TEST_CASE("gradient norm bound |grad x|^2 <= 8 |x|^2") {
  for (int t = 0; t < 20; ++t) {
    const Image x = random_image(13, 8);
    CHECK(norm_sq(grad(x)) <= 8.0 * norm_sq(x) + 1e-12);
  }
}

TEST_CASE("operator norm: 64x64 estimate within the analytic bracket") {
  const double v = operator_norm_sq(64, 64, 200);
  CHECK(v >= 7.5);
  CHECK(v <= 8.0);
}

TEST_CASE("operator norm: degenerate 1x1 grid") { CHECK(operator_norm_sq(1, 1, 10) == 0.0); }

TEST_CASE("operator norm: matches a dense eigensolve on 8x8") {
  const Eigen::MatrixXd D = dense_grad_matrix(8, 8);
  const Eigen::MatrixXd DtD = D.transpose() * D;
  const double exact = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(DtD).eigenvalues().maxCoeff();
  const double est = operator_norm_sq(8, 8, 3000);
  CHECK(est == doctest::Approx(exact).epsilon(1e-6));
}

TEST_CASE("operator norm: monotone nondecreasing in iterations") {
  double prev = 0.0;
  for (int it : {1, 2, 5, 10, 25, 60}) {
    const double v = operator_norm_sq(20, 14, it);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("warp with zero shift is the identity, bit-exact") {
  const Image x = random_image(12, 10);
  const Image w = warp(x, Displacement::constant({0.0, 0.0}));
  CHECK(w.data == x.data);
}

TEST_CASE("warp by an integer shift translates and replicates the boundary") {
  const Image x = random_image(6, 7);
  const Image w = warp(x, Displacement::constant({1.0, 0.0}));
  for (int i = 1; i < 6; ++i)
    for (int j = 0; j < 7; ++j) CHECK(w.at(i, j) == x.at(i - 1, j));
  for (int j = 0; j < 7; ++j) CHECK(w.at(0, j) == x.at(0, j));  // clamped row
}

TEST_CASE("half-pixel warp of a linear ramp is exact away from the border") {
  Image x(5, 9);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 9; ++j) x.at(i, j) = 0.2 + 0.1 * j;
  const Image w = warp(x, Displacement::constant({0.0, 0.5}));
  for (int i = 0; i < 5; ++i)
    for (int j = 1; j < 9; ++j)
      CHECK(w.at(i, j) == doctest::Approx(0.2 + 0.1 * (j - 0.5)).epsilon(1e-13));
}

TEST_CASE("field-variant warp matches the equivalent constant shift") {
  const Image x = random_image(8, 8);
  const Vec2 u{0.75, -0.4};
  VectorField targets(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      targets.at(0, i, j) = i - u.di;
      targets.at(1, i, j) = j - u.dj;
    }
  const Image a = warp(x, Displacement::constant(u));
  const Image b = warp(x, Displacement::field(targets));
  CHECK(a.data == b.data);
}

TEST_CASE("warp of a vector field applies per channel") {
  const VectorField f = random_field(9, 6);
  const Displacement d = Displacement::constant({1.0, 2.0});
  const VectorField w = warp(f, d);
  for (int c = 0; c < 2; ++c) {
    Image plane(9, 6);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 6; ++j) plane.at(i, j) = f.at(c, i, j);
    const Image wp = warp(plane, d);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 6; ++j) CHECK(w.at(c, i, j) == wp.at(i, j));
  }
}

TEST_CASE("integer-shift warp is 1-Lipschitz on the clamp-free region") {
  // Restricted to outputs whose source lies inside the grid, every source
  // pixel is read at most once, so the difference norm cannot grow.
  const int h = 14, w = 11;
  const int si = 2, sj = -3;
  for (int t = 0; t < 20; ++t) {
    const Image x = random_image(h, w), xb = random_image(h, w);
    const Displacement d = Displacement::constant({double(si), double(sj)});
    const Image wx = warp(x, d), wxb = warp(xb, d);
    double lhs = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const int pi = i - si, pj = j - sj;
        if (pi < 0 || pi >= h || pj < 0 || pj >= w) continue;
        const double dd = wx.at(i, j) - wxb.at(i, j);
        lhs += dd * dd;
      }
    CHECK(lhs <= norm_sq(lincomb(1.0, x, -1.0, xb)) + 1e-12);
  }
}

TEST_CASE("gaussian convolve preserves constants") {
  const Image x(10, 12, 0.83);
  const Image c = gaussian_convolve(x, 3.0, 11);
  for (double v : c.data) CHECK(v == doctest::Approx(0.83).epsilon(1e-13));
}

TEST_CASE("gaussian convolve of a centered delta reproduces the kernel") {
  Image x(21, 21);
  x.at(10, 10) = 1.0;
  const Image c = gaussian_convolve(x, 3.0, 11);
  // normalized separable kernel: center weight squared at the peak
  double sum = 0.0;
  std::vector<double> k(11);
  for (int t = -5; t <= 5; ++t) {
    k[t + 5] = std::exp(-0.5 * t * t / 9.0);
    sum += k[t + 5];
  }
  for (double& v : k) v /= sum;
  CHECK(c.at(10, 10) == doctest::Approx(k[5] * k[5]).epsilon(1e-12));
  double ksum = 0.0;
  for (double a : k)
    for (double b : k) ksum += a * b;
  CHECK(ksum == doctest::Approx(1.0).epsilon(1e-12));
  // response mass equals input mass when the support stays interior
  double mass = 0.0;
  for (double v : c.data) mass += v;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian convolve maps symmetric input to symmetric output") {
  Image x(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) x.at(i, j) = std::exp(-0.1 * ((i - 4) * (i - 4) + (j - 4) * (j - 4)));
  const Image c = gaussian_convolve(x, 1.5, 7);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK(c.at(i, j) == doctest::Approx(c.at(8 - i, 8 - j)).epsilon(1e-12));
}

TEST_CASE("gaussian convolve rejects oversized windows and bad parameters") {
  const Image x(5, 5, 0.0);
  CHECK_THROWS(gaussian_convolve(x, 3.0, 11));  // 11 >= 2*5+1
  CHECK_THROWS(gaussian_convolve(x, 3.0, 4));   // even window
  CHECK_THROWS(gaussian_convolve(x, 0.0, 3));   // bad std
}

TEST_CASE("parallel kernels match the serial references bitwise") {
  const Image x = random_image(70, 90);
  const VectorField f = random_field(70, 90);
  const Displacement d = Displacement::constant({1.3, -0.7});

  CHECK(grad(x).data == serial::grad(x).data);
  CHECK(div(f).data == serial::div(f).data);
  CHECK(warp(x, d).data == serial::warp(x, d).data);
  CHECK(gaussian_convolve(x, 3.0, 11).data == serial::gaussian_convolve(x, 3.0, 11).data);
}
