#pragma once

#include <cmath>
#include <utility>

namespace misspec {

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  int iterations = 0;
  double bracket_width = 0.0;
};

/// Golden-section search for a minimum of a unimodal `f` on [lo, hi].
/// Stops when the bracket is narrower than `tol`.
template <class F>
ScalarMinimum golden_section(F&& f, double lo, double hi, double tol, int max_iter = 500) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int it = 0;
  while (b - a > tol && it < max_iter) {
    // ties move the upper end so plateaus resolve toward their left edge
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++it;
  }
  ScalarMinimum out;
  out.x = fc <= fd ? c : d;
  out.value = fc <= fd ? fc : fd;
  out.iterations = it;
  out.bracket_width = b - a;
  return out;
}

}  // namespace misspec
