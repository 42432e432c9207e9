#include "unravel/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unravel/errors.hpp"
#include "unravel/quadrature.hpp"

namespace unravel {

namespace {

constexpr double kEps = 1e-12;
constexpr double kDropMass = 1e-15;
constexpr double kInf = std::numeric_limits<double>::infinity();

double pw(double base, double e) { return std::pow(std::max(base, 0.0), e); }

double binom(int k, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r = r * (k - i) / (i + 1);
  return r;
}

bool nearly_integer(double k) { return std::abs(k - std::round(k)) < 1e-12; }

}  // namespace

PowerPiece PowerPiece::with_origin(double lo, double hi, double mass,
                                   double exponent, double origin) {
  PowerPiece p(lo, hi, mass, exponent);
  p.origin = origin;
  return p;
}

PiecewisePowerDist::PiecewisePowerDist(std::vector<PowerPiece> pieces) {
  for (const PowerPiece& p : pieces) {
    if (!(std::isfinite(p.lo) && std::isfinite(p.hi) && std::isfinite(p.mass) &&
          std::isfinite(p.exponent))) {
      throw ValidationError("piece with non-finite field");
    }
    if (p.mass < -kEps) throw ValidationError("piece with negative mass");
    if (!(p.hi > p.lo)) throw ValidationError("piece with lo >= hi");
    if (!(p.exponent > 0.0)) throw ValidationError("piece exponent must be > 0");
    if (p.origin > p.lo + kEps) throw ValidationError("piece origin above lo");
    if (p.mass > kDropMass) pieces_.push_back(p);
  }
  if (pieces_.empty()) throw ValidationError("distribution with no mass");
  std::sort(pieces_.begin(), pieces_.end(),
            [](const PowerPiece& a, const PowerPiece& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    if (pieces_[i + 1].lo < pieces_[i].hi - kEps) {
      throw ValidationError("overlapping pieces");
    }
  }
  cum_.resize(pieces_.size() + 1, 0.0);
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    cum_[i + 1] = cum_[i] + pieces_[i].mass;
  }
  total_ = cum_.back();
}

PiecewisePowerDist PiecewisePowerDist::uniform() {
  return PiecewisePowerDist({PowerPiece(0.0, 1.0, 1.0)});
}

PiecewisePowerDist PiecewisePowerDist::single_power(double exponent) {
  return PiecewisePowerDist({PowerPiece(0.0, 1.0, 1.0, exponent)});
}

namespace {

// CDF rise of piece p on [p.lo, x].
double piece_rise(const PowerPiece& p, double x) {
  const double wl = pw(p.lo - p.origin, p.exponent);
  const double wh = pw(p.hi - p.origin, p.exponent);
  const double wx = std::clamp(pw(x - p.origin, p.exponent), wl, wh);
  return p.mass * (wx - wl) / (wh - wl);
}

double piece_quantile(const PowerPiece& p, double dm) {
  const double wl = pw(p.lo - p.origin, p.exponent);
  const double wh = pw(p.hi - p.origin, p.exponent);
  const double w = wl + std::clamp(dm / p.mass, 0.0, 1.0) * (wh - wl);
  return std::clamp(p.origin + pw(w, 1.0 / p.exponent), p.lo, p.hi);
}

// \int_l^u t^k dD restricted to one piece, [l,u] within [p.lo, p.hi].
double piece_moment(const PowerPiece& p, double l, double u, double k) {
  if (!(u > l)) return 0.0;
  const double wl = pw(p.lo - p.origin, p.exponent);
  const double wh = pw(p.hi - p.origin, p.exponent);
  const double c = p.mass / (wh - wl);
  const double e = p.exponent;
  if (k == 0.0) return c * (pw(u - p.origin, e) - pw(l - p.origin, e));
  if (nearly_integer(k) && k >= 0 && k <= 20) {
    const int ki = static_cast<int>(std::round(k));
    double sum = 0.0;
    for (int j = 0; j <= ki; ++j) {
      const double opow = (ki - j == 0) ? 1.0 : std::pow(p.origin, ki - j);
      if (opow == 0.0) continue;
      sum += binom(ki, j) * opow *
             (pw(u - p.origin, e + j) - pw(l - p.origin, e + j)) / (e + j);
    }
    return c * e * sum;
  }
  if (p.origin == 0.0 && k > -e) {
    return c * e * (pw(u, e + k) - pw(l, e + k)) / (e + k);
  }
  // Quadrature over the mass variable keeps the integrand bounded.
  const double m0 = piece_rise(p, l);
  const double m1 = piece_rise(p, u);
  return integrate_adaptive(
      [&](double m) { return std::pow(piece_quantile(p, m), k); }, m0, m1,
      1e-12);
}

}  // namespace

double PiecewisePowerDist::cdf(double x) const {
  if (x <= pieces_.front().lo) return 0.0;
  if (x >= pieces_.back().hi) return total_;
  auto it = std::upper_bound(
      pieces_.begin(), pieces_.end(), x,
      [](double v, const PowerPiece& p) { return v < p.lo; });
  const std::size_t i = static_cast<std::size_t>(it - pieces_.begin()) - 1;
  if (x >= pieces_[i].hi) return cum_[i + 1];
  return cum_[i] + piece_rise(pieces_[i], x);
}

double PiecewisePowerDist::quantile(double m) const {
  m = std::clamp(m, 0.0, total_);
  // Generalized inverse: smallest x whose CDF reaches m.
  auto it = std::lower_bound(cum_.begin() + 1, cum_.end(), m);
  const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
  if (i >= pieces_.size()) return pieces_.back().hi;
  return piece_quantile(pieces_[i], m - cum_[i]);
}

double PiecewisePowerDist::partial_moment(double l, double u, double k) const {
  if (!(u > l)) return 0.0;
  double sum = 0.0;
  for (const PowerPiece& p : pieces_) {
    const double a = std::max(l, p.lo);
    const double b = std::min(u, p.hi);
    if (b > a) sum += piece_moment(p, a, b, k);
  }
  return sum;
}

double PiecewisePowerDist::mean() const {
  return partial_moment(support_lo(), support_hi(), 1.0) / total_;
}

namespace {

// Splits p at x (inside the piece) into two pieces sharing origin/exponent.
std::pair<PowerPiece, PowerPiece> split_piece(const PowerPiece& p, double x) {
  const double left_mass = piece_rise(p, x);
  PowerPiece a = PowerPiece::with_origin(p.lo, x, left_mass, p.exponent, p.origin);
  PowerPiece b =
      PowerPiece::with_origin(x, p.hi, p.mass - left_mass, p.exponent, p.origin);
  return {a, b};
}

void merge_adjacent(std::vector<PowerPiece>& ps) {
  std::vector<PowerPiece> out;
  for (const PowerPiece& p : ps) {
    if (!out.empty()) {
      PowerPiece& q = out.back();
      if (p.lo - q.hi <= kEps && p.exponent == q.exponent &&
          p.origin == q.origin) {
        const double wa = pw(q.lo - q.origin, q.exponent);
        const double wb = pw(q.hi - q.origin, q.exponent);
        const double wc = pw(p.hi - p.origin, p.exponent);
        // Merging is exact iff both sides share the same w-density.
        const double lhs = q.mass * (wc - wa);
        const double rhs = (q.mass + p.mass) * (wb - wa);
        if (std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs))) {
          q.hi = p.hi;
          q.mass += p.mass;
          continue;
        }
      }
    }
    out.push_back(p);
  }
  ps = std::move(out);
}

}  // namespace

PiecewisePowerDist PiecewisePowerDist::restrict_renormalize(
    std::span<const Removal> removed) const {
  std::vector<PowerPiece> ps = pieces_;
  for (const Removal& r : removed) {
    if (r.fraction < -kEps || r.fraction > 1.0 + 1e-9) {
      throw ValidationError("removal fraction outside [0,1]");
    }
    if (!(r.hi >= r.lo)) throw ValidationError("removal interval reversed");
    const double frac = std::clamp(r.fraction, 0.0, 1.0);
    std::vector<PowerPiece> next;
    for (const PowerPiece& p : ps) {
      if (r.hi <= p.lo + kEps || r.lo >= p.hi - kEps) {
        next.push_back(p);
        continue;
      }
      PowerPiece mid = p;
      if (r.lo > p.lo + kEps) {
        auto [a, b] = split_piece(mid, r.lo);
        next.push_back(a);
        mid = b;
      }
      if (r.hi < mid.hi - kEps) {
        auto [a, b] = split_piece(mid, r.hi);
        a.mass *= (1.0 - frac);
        if (a.mass > kDropMass) next.push_back(a);
        next.push_back(b);
      } else {
        mid.mass *= (1.0 - frac);
        if (mid.mass > kDropMass) next.push_back(mid);
      }
    }
    ps = std::move(next);
  }
  merge_adjacent(ps);
  double total = 0.0;
  for (const PowerPiece& p : ps) total += p.mass;
  if (total <= kDropMass) {
    throw ValidationError("restrict_renormalize removed all mass");
  }
  for (PowerPiece& p : ps) p.mass /= total;
  return PiecewisePowerDist(std::move(ps));
}

PiecewisePowerDist PiecewisePowerDist::normalized() const {
  return scaled(1.0 / total_);
}

PiecewisePowerDist PiecewisePowerDist::scaled(double factor) const {
  std::vector<PowerPiece> ps = pieces_;
  for (PowerPiece& p : ps) p.mass *= factor;
  return PiecewisePowerDist(std::move(ps));
}

bool PiecewisePowerDist::covers_unit_interval(double tol) const {
  if (support_lo() > tol || support_hi() < 1.0 - tol) return false;
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    if (pieces_[i + 1].lo - pieces_[i].hi > tol) return false;
  }
  return true;
}

PiecewisePowerDist PiecewisePowerDist::mixture(
    std::span<const std::pair<double, const PiecewisePowerDist*>> parts) {
  std::vector<double> cuts;
  for (const auto& [w, d] : parts) {
    (void)w;
    for (const PowerPiece& p : d->pieces()) {
      cuts.push_back(p.lo);
      cuts.push_back(p.hi);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return b - a < kEps; }),
             cuts.end());
  std::vector<PowerPiece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    std::vector<std::pair<double, const PowerPiece*>> covering;
    for (const auto& [w, d] : parts) {
      for (const PowerPiece& p : d->pieces()) {
        if (p.lo <= lo + kEps && p.hi >= hi - kEps) covering.push_back({w, &p});
      }
    }
    if (covering.empty()) continue;
    if (covering.size() == 1) {
      const auto& [w, p] = covering.front();
      const double sub_mass = w * (piece_rise(*p, hi) - piece_rise(*p, lo));
      if (sub_mass > kDropMass) {
        out.push_back(PowerPiece::with_origin(lo, hi, sub_mass, p->exponent,
                                              p->origin));
      }
      continue;
    }
    double mass = 0.0;
    for (const auto& [w, p] : covering) {
      if (!p->is_uniform()) {
        throw ValidationError(
            "mixture: overlapping non-uniform pieces are not representable");
      }
      mass += w * (piece_rise(*p, hi) - piece_rise(*p, lo));
    }
    if (mass > kDropMass) out.push_back(PowerPiece(lo, hi, mass));
  }
  merge_adjacent(out);
  return PiecewisePowerDist(std::move(out));
}

// ---------------------------------------------------------------------------
// MonotoneCurve

namespace {

double seg_w(const CurveSegment& s, double x) { return pw(x - s.origin, s.exponent); }

double seg_eval(const CurveSegment& s, double x) {
  switch (s.kind) {
    case SegmentKind::flat:
      return s.y_lo;
    case SegmentKind::jump:
      return x >= s.x_lo ? s.y_hi : s.y_lo;
    case SegmentKind::power: {
      const double wl = seg_w(s, s.x_lo);
      const double wh = seg_w(s, s.x_hi);
      const double wx = std::clamp(seg_w(s, x), wl, wh);
      return s.y_lo + (s.y_hi - s.y_lo) * (wx - wl) / (wh - wl);
    }
  }
  return s.y_lo;
}

double seg_inverse(const CurveSegment& s, double y) {
  switch (s.kind) {
    case SegmentKind::flat:
      return 0.5 * (s.x_lo + s.x_hi);
    case SegmentKind::jump:
      return s.x_lo;
    case SegmentKind::power: {
      const double wl = seg_w(s, s.x_lo);
      const double wh = seg_w(s, s.x_hi);
      const double t = std::clamp((y - s.y_lo) / (s.y_hi - s.y_lo), 0.0, 1.0);
      const double w = wl + t * (wh - wl);
      return std::clamp(s.origin + pw(w, 1.0 / s.exponent), s.x_lo, s.x_hi);
    }
  }
  return s.x_lo;
}

double seg_deriv(const CurveSegment& s, double x) {
  switch (s.kind) {
    case SegmentKind::flat:
      return 0.0;
    case SegmentKind::jump:
      return kInf;
    case SegmentKind::power: {
      const double wl = seg_w(s, s.x_lo);
      const double wh = seg_w(s, s.x_hi);
      const double b = (s.y_hi - s.y_lo) / (wh - wl);
      const double base = x - s.origin;
      if (base <= 0.0) {
        if (s.exponent < 1.0) return kInf;
        if (s.exponent > 1.0) return 0.0;
        return b;
      }
      return b * s.exponent * std::pow(base, s.exponent - 1.0);
    }
  }
  return 0.0;
}

double seg_integral(const CurveSegment& s, double l, double u) {
  if (!(u > l)) return 0.0;
  switch (s.kind) {
    case SegmentKind::flat:
      return s.y_lo * (u - l);
    case SegmentKind::jump:
      return 0.0;
    case SegmentKind::power: {
      const double wl = seg_w(s, s.x_lo);
      const double wh = seg_w(s, s.x_hi);
      const double b = (s.y_hi - s.y_lo) / (wh - wl);
      const double a = s.y_lo - b * wl;
      const double e1 = s.exponent + 1.0;
      return a * (u - l) +
             b * (pw(u - s.origin, e1) - pw(l - s.origin, e1)) / e1;
    }
  }
  return 0.0;
}

}  // namespace

MonotoneCurve::MonotoneCurve(std::vector<CurveSegment> segments) {
  for (CurveSegment& s : segments) {
    if (!(std::isfinite(s.x_lo) && std::isfinite(s.x_hi) &&
          std::isfinite(s.y_lo) && std::isfinite(s.y_hi))) {
      throw ValidationError("curve segment with non-finite field");
    }
    if (s.x_hi < s.x_lo) throw ValidationError("curve segment with x_hi < x_lo");
    if (s.y_hi < s.y_lo - 1e-12) {
      throw ValidationError("curve segment decreasing in y");
    }
    if (s.kind == SegmentKind::power) {
      if (s.x_hi - s.x_lo <= 0.0) {
        s.kind = (s.y_hi - s.y_lo > 0.0) ? SegmentKind::jump : SegmentKind::flat;
      } else if (s.y_hi - s.y_lo <= 0.0) {
        s.kind = SegmentKind::flat;
        s.y_hi = s.y_lo;
      } else {
        if (!(s.exponent > 0.0)) {
          throw ValidationError("curve segment exponent must be > 0");
        }
        if (s.origin > s.x_lo + kEps) {
          throw ValidationError("curve segment origin above x_lo");
        }
      }
    }
    const bool degenerate = s.x_hi - s.x_lo <= 0.0 && s.y_hi - s.y_lo <= 0.0;
    if (!degenerate) segments_.push_back(s);
  }
  if (segments_.empty()) throw ValidationError("curve with no segments");
  for (std::size_t i = 0; i + 1 < segments_.size(); ++i) {
    if (std::abs(segments_[i + 1].x_lo - segments_[i].x_hi) > 1e-9) {
      throw ValidationError("curve segments do not chain in x");
    }
    if (std::abs(segments_[i + 1].y_lo - segments_[i].y_hi) > 1e-9) {
      throw ValidationError("curve segments do not chain in y (missing jump tag)");
    }
  }
}

MonotoneCurve MonotoneCurve::identity() { return linear(0.0, 0.0, 1.0, 1.0); }

MonotoneCurve MonotoneCurve::linear(double x0, double y0, double x1, double y1) {
  return MonotoneCurve({CurveSegment{x0, x1, y0, y1, 1.0, x0, SegmentKind::power}});
}

MonotoneCurve MonotoneCurve::power(double exponent) {
  return MonotoneCurve(
      {CurveSegment{0.0, 1.0, 0.0, 1.0, exponent, 0.0, SegmentKind::power}});
}

MonotoneCurve MonotoneCurve::from_points(
    std::span<const std::pair<double, double>> pts) {
  if (pts.size() < 2) throw ValidationError("from_points needs >= 2 points");
  std::vector<CurveSegment> segs;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [x0, y0] = pts[i];
    const auto [x1, y1] = pts[i + 1];
    SegmentKind kind = SegmentKind::power;
    if (x1 - x0 <= 0.0) kind = SegmentKind::jump;
    else if (y1 - y0 <= 0.0) kind = SegmentKind::flat;
    segs.push_back(CurveSegment{x0, x1, y0, y1, 1.0, x0, kind});
  }
  return MonotoneCurve(std::move(segs));
}

MonotoneCurve MonotoneCurve::quantile_curve(const PiecewisePowerDist& d) {
  std::vector<CurveSegment> segs;
  const double total = d.total_mass();
  const auto& ps = d.pieces();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const PowerPiece& p = ps[i];
    const double m0 = d.mass_before(i) / total;
    const double m1 = (d.mass_before(i) + p.mass) / total;
    const double wl = pw(p.lo - p.origin, p.exponent);
    const double wh = pw(p.hi - p.origin, p.exponent);
    // Within the piece the value is a power of (m - m*) with m* below m0.
    const double mstar = m0 - wl * (p.mass / total) / (wh - wl);
    if (i > 0 && p.lo - ps[i - 1].hi > kEps) {
      segs.push_back(CurveSegment{m0, m0, ps[i - 1].hi, p.lo, 1.0, m0,
                                  SegmentKind::jump});
    }
    segs.push_back(CurveSegment{m0, m1, p.lo, p.hi, 1.0 / p.exponent, mstar,
                                SegmentKind::power});
  }
  return MonotoneCurve(std::move(segs));
}

MonotoneCurve MonotoneCurve::cdf_curve(const PiecewisePowerDist& d) {
  if (d.support_lo() < -1e-9 || d.support_hi() > 1.0 + 1e-9) {
    throw ValidationError("cdf_curve expects support within [0,1]");
  }
  std::vector<CurveSegment> segs;
  const double total = d.total_mass();
  const auto& ps = d.pieces();
  if (ps.front().lo > kEps) {
    segs.push_back(
        CurveSegment{0.0, ps.front().lo, 0.0, 0.0, 1.0, 0.0, SegmentKind::flat});
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const PowerPiece& p = ps[i];
    const double m0 = d.mass_before(i) / total;
    const double m1 = (d.mass_before(i) + p.mass) / total;
    if (i > 0 && p.lo - ps[i - 1].hi > kEps) {
      segs.push_back(CurveSegment{ps[i - 1].hi, p.lo, m0, m0, 1.0,
                                  ps[i - 1].hi, SegmentKind::flat});
    }
    segs.push_back(CurveSegment{p.lo, p.hi, m0, m1, p.exponent, p.origin,
                                SegmentKind::power});
  }
  if (ps.back().hi < 1.0 - kEps) {
    segs.push_back(CurveSegment{ps.back().hi, 1.0, 1.0, 1.0, 1.0, ps.back().hi,
                                SegmentKind::flat});
  }
  return MonotoneCurve(std::move(segs));
}

const CurveSegment& MonotoneCurve::segment_at(double x) const {
  // Last segment whose x_lo <= x, so jumps evaluate right-continuously.
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), x,
      [](double v, const CurveSegment& s) { return v < s.x_lo; });
  if (it == segments_.begin()) return segments_.front();
  return *(it - 1);
}

double MonotoneCurve::eval(double x) const {
  if (x < x_min() - 1e-9 || x > x_max() + 1e-9) {
    throw ValidationError("curve eval outside domain");
  }
  x = std::clamp(x, x_min(), x_max());
  return seg_eval(segment_at(x), x);
}

double MonotoneCurve::inverse(double y) const {
  if (y < y_min() - 1e-9 || y > y_max() + 1e-9) {
    throw ValidationError("curve inverse outside range");
  }
  y = std::clamp(y, y_min(), y_max());
  // Leftmost and rightmost preimages; midpoint when they span a flat stretch.
  double lo_x = x_max(), hi_x = x_min();
  for (const CurveSegment& s : segments_) {
    if (s.y_hi >= y - 1e-15) {
      lo_x = seg_inverse(s, y);
      break;
    }
  }
  for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
    if (it->y_lo <= y + 1e-15) {
      hi_x = it->kind == SegmentKind::flat ? it->x_hi : seg_inverse(*it, y);
      break;
    }
  }
  if (hi_x - lo_x > 1e-13) return 0.5 * (lo_x + hi_x);
  return lo_x;
}

double MonotoneCurve::integral(double l, double u) const {
  if (!(u > l)) return 0.0;
  double sum = 0.0;
  for (const CurveSegment& s : segments_) {
    const double a = std::max(l, s.x_lo);
    const double b = std::min(u, s.x_hi);
    if (b > a) sum += seg_integral(s, a, b);
  }
  return sum;
}

double MonotoneCurve::right_derivative(double x) const {
  x = std::clamp(x, x_min(), x_max());
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), x,
      [](double v, const CurveSegment& s) { return v < s.x_lo; });
  // Prefer the segment starting exactly at x.
  if (it != segments_.end() && it->x_lo == x) return seg_deriv(*it, x);
  const CurveSegment& s = *(it - 1);
  return seg_deriv(s, x);
}

double MonotoneCurve::left_derivative(double x) const {
  x = std::clamp(x, x_min(), x_max());
  for (std::size_t i = segments_.size(); i-- > 0;) {
    const CurveSegment& s = segments_[i];
    if (s.x_lo < x - 1e-15 || i == 0) {
      return seg_deriv(s, std::min(x, s.x_hi));
    }
  }
  return seg_deriv(segments_.front(), x);
}

std::vector<ConvexityInterval> MonotoneCurve::convexity_segments() const {
  std::vector<ConvexityInterval> out;
  auto label_of = [](const CurveSegment& s) {
    if (s.kind != SegmentKind::power) return ConvexityLabel::linear;
    if (s.exponent > 1.0 + 1e-12) return ConvexityLabel::convex;
    if (s.exponent < 1.0 - 1e-12) return ConvexityLabel::concave;
    return ConvexityLabel::linear;
  };
  const CurveSegment* prev = nullptr;
  for (const CurveSegment& s : segments_) {
    if (s.x_hi - s.x_lo <= 0.0) {
      prev = &s;
      continue;
    }
    const ConvexityLabel lab = label_of(s);
    if (!out.empty() && out.back().label == lab && prev != nullptr &&
        prev->kind != SegmentKind::jump) {
      const double dl = seg_deriv(*prev, s.x_lo);
      const double dr = seg_deriv(s, s.x_lo);
      const bool smooth =
          std::isfinite(dl) && std::isfinite(dr) &&
          std::abs(dl - dr) <= 1e-9 * std::max(1.0, std::abs(dl));
      if (smooth) {
        out.back().x_hi = s.x_hi;
        prev = &s;
        continue;
      }
    }
    out.push_back(ConvexityInterval{s.x_lo, s.x_hi, lab});
    prev = &s;
  }
  return out;
}

MonotoneCurve MonotoneCurve::sub_curve(double x0, double x1) const {
  if (!(x1 > x0)) throw ValidationError("sub_curve needs x1 > x0");
  std::vector<CurveSegment> segs;
  for (const CurveSegment& s : segments_) {
    if (s.kind == SegmentKind::jump) {
      if (s.x_lo > x0 + 1e-15 && s.x_lo < x1 - 1e-15) segs.push_back(s);
      continue;
    }
    const double a = std::max(x0, s.x_lo);
    const double b = std::min(x1, s.x_hi);
    if (!(b > a)) continue;
    CurveSegment t = s;
    t.x_lo = a;
    t.x_hi = b;
    t.y_lo = seg_eval(s, a);
    t.y_hi = seg_eval(s, b);
    segs.push_back(t);
  }
  return MonotoneCurve(std::move(segs));
}

MonotoneCurve MonotoneCurve::affine_x(double scale, double shift) const {
  if (!(scale > 0.0)) throw ValidationError("affine_x needs positive scale");
  std::vector<CurveSegment> segs = segments_;
  for (CurveSegment& s : segs) {
    s.x_lo = scale * s.x_lo + shift;
    s.x_hi = scale * s.x_hi + shift;
    s.origin = scale * s.origin + shift;
  }
  return MonotoneCurve(std::move(segs));
}

MonotoneCurve MonotoneCurve::affine_y(double scale, double shift) const {
  if (!(scale > 0.0)) throw ValidationError("affine_y needs positive scale");
  std::vector<CurveSegment> segs = segments_;
  for (CurveSegment& s : segs) {
    s.y_lo = scale * s.y_lo + shift;
    s.y_hi = scale * s.y_hi + shift;
  }
  return MonotoneCurve(std::move(segs));
}

std::vector<double> MonotoneCurve::breakpoints() const {
  std::vector<double> xs;
  for (const CurveSegment& s : segments_) xs.push_back(s.x_lo);
  xs.push_back(x_max());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

double MonotoneCurve::sup_distance(const MonotoneCurve& other, int grid) const {
  const double lo = std::max(x_min(), other.x_min());
  const double hi = std::min(x_max(), other.x_max());
  if (!(hi > lo)) return 0.0;
  std::vector<double> xs;
  for (double b : breakpoints()) xs.push_back(b);
  for (double b : other.breakpoints()) xs.push_back(b);
  for (int i = 0; i <= grid; ++i) xs.push_back(lo + (hi - lo) * i / grid);
  double worst = 0.0;
  for (double x : xs) {
    if (x < lo || x > hi) continue;
    worst = std::max(worst, std::abs(eval(x) - other.eval(x)));
  }
  return worst;
}

bool MonotoneCurve::is_identity(double tol) const {
  if (std::abs(x_min()) > tol || std::abs(x_max() - 1.0) > tol) return false;
  return sup_distance(identity(), 64) <= tol;
}

namespace {

void emit_power_fit(std::vector<CurveSegment>& out, const MonotoneCurve& outer,
                    const MonotoneCurve& inner, double u, double v,
                    double max_err, int depth) {
  const double y0 = outer.eval(inner.eval(u));
  const double y1 = outer.eval(inner.eval(v));
  if (y1 - y0 <= 1e-14) {
    out.push_back(CurveSegment{u, v, y0, y1, 1.0, u, SegmentKind::power});
    return;
  }
  const double xm = 0.5 * (u + v);
  const double ym = outer.eval(inner.eval(xm));
  const double r = (ym - y0) / (y1 - y0);
  bool ok = r > 1e-9 && r < 1.0 - 1e-9;
  double e = 1.0;
  if (ok) {
    e = std::log(r) / std::log(0.5);
    CurveSegment cand{u, v, y0, y1, e, u, SegmentKind::power};
    for (double t : {0.25, 0.75}) {
      const double x = u + t * (v - u);
      if (std::abs(seg_eval(cand, x) - outer.eval(inner.eval(x))) > max_err) {
        ok = false;
        break;
      }
    }
    if (ok) {
      out.push_back(cand);
      return;
    }
  }
  if (depth >= 40 || v - u < 1e-13) {
    out.push_back(CurveSegment{u, v, y0, y1, 1.0, u, SegmentKind::power});
    return;
  }
  emit_power_fit(out, outer, inner, u, xm, max_err, depth + 1);
  emit_power_fit(out, outer, inner, xm, v, max_err, depth + 1);
}

}  // namespace

MonotoneCurve MonotoneCurve::compose(const MonotoneCurve& inner,
                                     double max_err) const {
  std::vector<double> cuts = inner.breakpoints();
  for (double b : breakpoints()) {
    if (b >= inner.y_min() - 1e-15 && b <= inner.y_max() + 1e-15) {
      cuts.push_back(inner.inverse(b));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return b - a < 1e-14; }),
             cuts.end());
  std::vector<CurveSegment> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double u = cuts[i], v = cuts[i + 1];
    const CurveSegment& si = inner.segment_at(0.5 * (u + v));
    if (si.kind == SegmentKind::flat) {
      const double y = eval(si.y_lo);
      out.push_back(CurveSegment{u, v, y, y, 1.0, u, SegmentKind::flat});
      continue;
    }
    const double yu = inner.eval(u), yv = inner.eval(v);
    const CurveSegment& so = segment_at(0.5 * (yu + yv));
    if (so.kind == SegmentKind::flat) {
      out.push_back(
          CurveSegment{u, v, so.y_lo, so.y_lo, 1.0, u, SegmentKind::flat});
      continue;
    }
    if (so.exponent == 1.0 && so.kind == SegmentKind::power) {
      // Affine outer: the inner power shape carries through unchanged.
      CurveSegment t = si;
      t.x_lo = u;
      t.x_hi = v;
      t.y_lo = seg_eval(so, yu);
      t.y_hi = seg_eval(so, yv);
      if (si.kind == SegmentKind::power) {
        t.y_lo = seg_eval(so, seg_eval(si, u));
        t.y_hi = seg_eval(so, seg_eval(si, v));
      }
      out.push_back(t);
      continue;
    }
    if (si.kind == SegmentKind::power && si.exponent == 1.0) {
      // Affine inner: outer power shape with a remapped origin.
      const double slope = (si.y_hi - si.y_lo) / (si.x_hi - si.x_lo);
      const double origin_x = u + (so.origin - yu) / slope;
      out.push_back(CurveSegment{u, v, eval(yu), eval(yv), so.exponent,
                                 origin_x, SegmentKind::power});
      continue;
    }
    emit_power_fit(out, *this, inner, u, v, max_err, 0);
  }
  // Jumps of the inner curve, and outer jumps crossed by them, surface as
  // y-discontinuities between adjacent cells.
  std::vector<CurveSegment> withjumps;
  for (const CurveSegment& s : out) {
    if (!withjumps.empty() &&
        s.y_lo - withjumps.back().y_hi > 1e-12) {
      withjumps.push_back(CurveSegment{s.x_lo, s.x_lo, withjumps.back().y_hi,
                                       s.y_lo, 1.0, s.x_lo, SegmentKind::jump});
    }
    withjumps.push_back(s);
  }
  return MonotoneCurve(std::move(withjumps));
}

double curve_query(const MonotoneCurve& c, CurveQueryMode mode, double arg) {
  switch (mode) {
    case CurveQueryMode::eval:
      return c.eval(arg);
    case CurveQueryMode::inverse:
      return c.inverse(arg);
    case CurveQueryMode::compose:
      throw ValidationError("compose mode needs a curve argument");
  }
  return 0.0;
}

MonotoneCurve curve_query(const MonotoneCurve& c, CurveQueryMode mode,
                          const MonotoneCurve& arg) {
  if (mode != CurveQueryMode::compose) {
    throw ValidationError("eval/inverse modes need a point argument");
  }
  return c.compose(arg);
}

}  // namespace unravel
