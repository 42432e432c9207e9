#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace unravel {

// One power-law CDF piece on [lo,hi]: the CDF rises by
//   mass * ((x-origin)^p - (lo-origin)^p) / ((hi-origin)^p - (lo-origin)^p).
// origin == lo in the common case, giving the plain mass*((x-lo)/(hi-lo))^p
// form; a detached origin (origin < lo) is what keeps the family closed under
// cutting a piece at an interior point.
struct PowerPiece {
  double lo;
  double hi;
  double mass;
  double exponent;
  double origin;

  PowerPiece(double lo_, double hi_, double mass_, double exponent_ = 1.0)
      : lo(lo_), hi(hi_), mass(mass_), exponent(exponent_), origin(lo_) {}
  static PowerPiece with_origin(double lo, double hi, double mass,
                                double exponent, double origin);

  double width() const { return hi - lo; }
  bool is_uniform() const { return exponent == 1.0; }
};

struct Removal {
  double lo;
  double hi;
  double fraction;  // fraction of the mass currently on [lo,hi], in [0,1]
};

// A distribution on a sub-interval of [0,1] given as ordered, disjoint
// power-law CDF pieces. Immutable after construction.
class PiecewisePowerDist {
 public:
  PiecewisePowerDist() = default;
  explicit PiecewisePowerDist(std::vector<PowerPiece> pieces);

  static PiecewisePowerDist uniform();
  // CDF x^p on [0,1].
  static PiecewisePowerDist single_power(double exponent);

  const std::vector<PowerPiece>& pieces() const { return pieces_; }
  double total_mass() const { return total_; }
  double support_lo() const { return pieces_.front().lo; }
  double support_hi() const { return pieces_.back().hi; }
  // Cumulative mass strictly before piece i.
  double mass_before(std::size_t i) const { return cum_[i]; }

  double cdf(double x) const;
  double quantile(double m) const;
  // \int_l^u t^k dD(t); closed form where the exponent/k pair admits it,
  // adaptive quadrature otherwise.
  double partial_moment(double l, double u, double k) const;
  double mean() const;

  PiecewisePowerDist restrict_renormalize(std::span<const Removal> removed) const;
  PiecewisePowerDist normalized() const;
  PiecewisePowerDist scaled(double factor) const;

  // True when the CDF has no flat gap strictly inside the support and the
  // support is exactly [0,1].
  bool covers_unit_interval(double tol = 1e-12) const;

  // Mixture sum(weight_i * d_i). Overlapping regions must be uniform pieces;
  // throws ValidationError otherwise.
  static PiecewisePowerDist mixture(
      std::span<const std::pair<double, const PiecewisePowerDist*>> parts);

 private:
  std::vector<PowerPiece> pieces_;
  std::vector<double> cum_;  // size pieces_.size()+1
  double total_ = 0.0;
};

enum class SegmentKind { power, flat, jump };

// y(x) = y_lo + (y_hi-y_lo) * (w(x)-w(x_lo)) / (w(x_hi)-w(x_lo)) with
// w(x) = (x-origin)^exponent for power segments; flat segments hold y
// constant; jump segments are vertical (x_lo == x_hi).
struct CurveSegment {
  double x_lo;
  double x_hi;
  double y_lo;
  double y_hi;
  double exponent;
  double origin;
  SegmentKind kind;
};

enum class ConvexityLabel { convex, concave, linear };

struct ConvexityInterval {
  double x_lo;
  double x_hi;
  ConvexityLabel label;
};

// A nondecreasing piecewise power mapping. Immutable after construction.
// Evaluation is right-continuous at jump points.
class MonotoneCurve {
 public:
  MonotoneCurve() = default;
  explicit MonotoneCurve(std::vector<CurveSegment> segments);

  static MonotoneCurve identity();
  static MonotoneCurve linear(double x0, double y0, double x1, double y1);
  // y = x^e on [0,1].
  static MonotoneCurve power(double exponent);
  // Piecewise-linear through the given (x,y) points (nondecreasing y).
  static MonotoneCurve from_points(std::span<const std::pair<double, double>> pts);
  // Mass fraction -> value. Gaps in the support become jump segments.
  static MonotoneCurve quantile_curve(const PiecewisePowerDist& d);
  // Value -> mass fraction on the full [0,1] domain; gaps become flats.
  static MonotoneCurve cdf_curve(const PiecewisePowerDist& d);

  const std::vector<CurveSegment>& segments() const { return segments_; }
  double x_min() const { return segments_.front().x_lo; }
  double x_max() const { return segments_.back().x_hi; }
  double y_min() const { return segments_.front().y_lo; }
  double y_max() const { return segments_.back().y_hi; }

  double eval(double x) const;
  // Flat segments invert to their midpoint; a y inside a jump gap inverts to
  // the jump abscissa.
  double inverse(double y) const;
  // this(inner(x)). Exact when either side of each overlap is affine;
  // otherwise refined to max_err on probe points.
  MonotoneCurve compose(const MonotoneCurve& inner, double max_err = 1e-10) const;

  double integral(double l, double u) const;  // \int_l^u y(x) dx
  double right_derivative(double x) const;
  double left_derivative(double x) const;

  // Exhaustive partition of the domain into convex / concave / linear
  // intervals. Adjacent intervals merge only when the label matches and the
  // derivative is continuous across the junction, so two linear intervals
  // meeting at a kink stay separate.
  std::vector<ConvexityInterval> convexity_segments() const;

  MonotoneCurve sub_curve(double x0, double x1) const;
  MonotoneCurve affine_x(double scale, double shift) const;  // x -> scale*x+shift
  MonotoneCurve affine_y(double scale, double shift) const;

  // Max |this(x) - other(x)| over a sample grid plus both breakpoint sets.
  double sup_distance(const MonotoneCurve& other, int grid = 1024) const;
  bool is_identity(double tol = 1e-12) const;

  std::vector<double> breakpoints() const;

 private:
  const CurveSegment& segment_at(double x) const;
  std::vector<CurveSegment> segments_;
};

// Points used by the equilibrium sweep: a = (expected) ability, q = quality.
struct CurvePoint {
  double a;
  double q;
};

enum class CurveQueryMode { eval, inverse, compose };

// Thin dispatcher mirroring the one-op-per-mode surface; the methods above
// are the native interface.
double curve_query(const MonotoneCurve& c, CurveQueryMode mode, double arg);
MonotoneCurve curve_query(const MonotoneCurve& c, CurveQueryMode mode,
                          const MonotoneCurve& arg);

}  // namespace unravel
