#include "unravel/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace unravel {

namespace {

GaussRule make_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

double gauss_panel(const std::function<double(double)>& f, double a, double b,
                   const GaussRule& rule) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return half * sum;
}

double adaptive(const std::function<double(double)>& f, double a, double b,
                double whole, double tol, const GaussRule& rule, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gauss_panel(f, a, mid, rule);
  const double right = gauss_panel(f, mid, b, rule);
  const double split = left + right;
  if (std::abs(split - whole) <= tol || depth >= 48 || b - a < 1e-15) {
    return split;
  }
  return adaptive(f, a, mid, left, 0.5 * tol, rule, depth + 1) +
         adaptive(f, mid, b, right, 0.5 * tol, rule, depth + 1);
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  static std::map<int, GaussRule> cache;
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, make_rule(order)).first;
  }
  return it->second;
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol) {
  if (!(b > a)) return 0.0;
  const GaussRule& rule = gauss_legendre(15);
  return adaptive(f, a, b, gauss_panel(f, a, b, rule), tol, rule, 0);
}

double integrate_with_breakpoints(const std::function<double(double)>& f,
                                  double a, double b,
                                  std::span<const double> breakpoints,
                                  double tol) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts;
  cuts.push_back(a);
  for (double c : breakpoints) {
    if (c > a + 1e-15 && c < b - 1e-15) cuts.push_back(c);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double u, double v) { return v - u < 1e-15; }),
             cuts.end());
  double sum = 0.0;
  const double per_panel = tol / static_cast<double>(cuts.size());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    sum += integrate_adaptive(f, cuts[i], cuts[i + 1], per_panel);
  }
  return sum;
}

double bisect_root(const std::function<double(double)>& f, double lo,
                   double hi, double x_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    throw std::invalid_argument("bisect_root: endpoints do not bracket a root");
  }
  for (int i = 0; i < max_iter && hi - lo > x_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> golden_max(const std::function<double(double)>& f,
                                     double lo, double hi, double x_tol) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > x_tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace unravel
