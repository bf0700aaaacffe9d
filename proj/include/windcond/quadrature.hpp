#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "windcond/errors.hpp"

namespace windcond {

struct QuadratureOptions {
  double abs_tol = 1e-9;
  int max_segments = 4000;
};

namespace detail {

// Gauss 7 / Kronrod 15 pair on [-1, 1]. Nodes are the positive half; the rule
// is symmetric. Gauss points are the odd-indexed Kronrod points.
struct Gk15 {
  static constexpr std::array<double, 8> nodes = {
      0.991455371120812639206854697526329,
      0.949107912342758524526189684047851,
      0.864864423359769072789712788640926,
      0.741531185599394439863864773280788,
      0.586087235467691130294144838258730,
      0.405845151377397166906606412076961,
      0.207784955007898467600689403773245,
      0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> kronrod_weights = {
      0.022935322010529224963732008058970,
      0.063092092629978553290700663189204,
      0.104790010322250183839876322541518,
      0.140653259715525918745189590510238,
      0.169004726639267902826583426598550,
      0.190350578064785409913256402421014,
      0.204432940075298892414161999234649,
      0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> gauss_weights = {
      0.129484966168869693270611432679082,
      0.279705391489276667901467771423780,
      0.381830050505118944950369775488975,
      0.417959183673469387755102040816327};
};

template <typename F>
inline void gk15_apply(const F& f, double a, double b, double& integral, double& error) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double kronrod = 0.0;
  double gauss = 0.0;
  for (std::size_t i = 0; i < Gk15::nodes.size(); ++i) {
    const double offset = half * Gk15::nodes[i];
    double fsum;
    if (i + 1 == Gk15::nodes.size()) {
      fsum = f(center);
    } else {
      fsum = f(center - offset) + f(center + offset);
    }
    kronrod += Gk15::kronrod_weights[i] * fsum;
    if (i % 2 == 1) {
      gauss += Gk15::gauss_weights[i / 2] * fsum;
    }
  }
  integral = kronrod * half;
  error = std::fabs((kronrod - gauss) * half);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to an absolute
/// tolerance. Throws QuadratureError when the segment budget is exhausted.
template <typename F>
inline double integrate(const F& f, double a, double b,
                        const QuadratureOptions& opts = {}) {
  struct Segment {
    double a, b, integral, error;
  };
  Segment first{};
  first.a = a;
  first.b = b;
  detail::gk15_apply(f, a, b, first.integral, first.error);
  std::vector<Segment> segments{first};
  double total_error = first.error;
  while (total_error > opts.abs_tol) {
    if (static_cast<int>(segments.size()) >= opts.max_segments) {
      throw QuadratureError("adaptive quadrature did not reach tolerance " +
                            std::to_string(opts.abs_tol));
    }
    auto worst = std::max_element(
        segments.begin(), segments.end(),
        [](const Segment& x, const Segment& y) { return x.error < y.error; });
    const Segment seg = *worst;
    const double mid = 0.5 * (seg.a + seg.b);
    if (mid <= seg.a || mid >= seg.b) {
      throw QuadratureError("quadrature interval collapsed below machine resolution");
    }
    Segment left{}, right{};
    left.a = seg.a;
    left.b = mid;
    right.a = mid;
    right.b = seg.b;
    detail::gk15_apply(f, left.a, left.b, left.integral, left.error);
    detail::gk15_apply(f, right.a, right.b, right.integral, right.error);
    total_error += left.error + right.error - seg.error;
    *worst = left;
    segments.push_back(right);
  }
  double total = 0.0;
  for (const Segment& s : segments) total += s.integral;
  return total;
}

}  // namespace windcond
