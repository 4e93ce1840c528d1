#pragma once

#include <cmath>
#include <cstddef>

namespace lire {

struct LineMinimum {
  double x = 0.0;
  double value = 0.0;
  std::size_t iterations = 0;
};

// Golden-section search for a unimodal f on [lo, hi]. Stops once the bracket
// is narrower than tol; the returned point is the best of the final bracket
// interior and both original endpoints.
template <class F>
LineMinimum golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-10,
                                    std::size_t max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double a0 = lo, b0 = hi;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  std::size_t it = 0;
  while (b - a > tol && it < max_iter) {
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
  LineMinimum best{fc <= fd ? c : d, fc <= fd ? fc : fd, it};
  for (double x : {a0, b0}) {
    const double v = f(x);
    if (v < best.value) best = {x, v, it};
  }
  return best;
}

}  // namespace lire
