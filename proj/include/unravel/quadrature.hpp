#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace unravel {

// Gauss-Legendre nodes/weights on [-1,1], generated once per order by Newton
// iteration on the Legendre recurrence.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussRule& gauss_legendre(int order);

// Integrates f over [a,b] with one Gauss panel, splitting recursively until the
// whole-panel and split-panel estimates agree within tol.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol = 1e-11);

// Same, but splits first at the given sorted-or-not interior breakpoints so
// each panel sees a smooth integrand.
double integrate_with_breakpoints(const std::function<double(double)>& f,
                                  double a, double b,
                                  std::span<const double> breakpoints,
                                  double tol = 1e-11);

// Bisection for a root of f on [lo,hi]; assumes f(lo) and f(hi) bracket zero.
double bisect_root(const std::function<double(double)>& f, double lo,
                   double hi, double x_tol = 1e-13, int max_iter = 200);

// Golden-section maximizer on [lo,hi] for a unimodal f.
std::pair<double, double> golden_max(const std::function<double(double)>& f,
                                     double lo, double hi,
                                     double x_tol = 1e-10);

}  // namespace unravel
