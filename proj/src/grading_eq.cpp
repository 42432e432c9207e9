#include "unravel/grading_eq.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "unravel/errors.hpp"
#include "unravel/quadrature.hpp"

namespace unravel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double chord_slope(CurvePoint p0, CurvePoint p1) {
  return (p1.q - p0.q) / (p1.a - p0.a);
}

// Candidate pooled segment found by the sweep.
struct Candidate {
  double slope;
  double t;  // origin abscissa (== sweep origin for rotation-only candidates)
  double x;  // far endpoint abscissa on q_t
};

bool chord_on_curve(const MonotoneCurve& q_t, CurvePoint p0, CurvePoint p1,
                    double tol) {
  for (double f : {0.25, 0.5, 0.75}) {
    const double a = p0.a + f * (p1.a - p0.a);
    const double chord_q = p0.q + f * (p1.q - p0.q);
    if (std::abs(q_t.eval(a) - chord_q) > tol) return false;
  }
  return true;
}

std::vector<double> sweep_grid(const MonotoneCurve& q_t, double lo, double hi,
                               int n) {
  std::vector<double> xs;
  for (int i = 1; i <= n; ++i) {
    xs.push_back(lo + (hi - lo) * static_cast<double>(i) / n);
  }
  for (double b : q_t.breakpoints()) {
    if (b > lo + 1e-12 && b < hi - 1e-12) xs.push_back(b);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end(),
                       [](double a, double b) { return b - a < 1e-13; }),
           xs.end());
  return xs;
}

// Transversal roots of residual(x) plus collinear-stretch candidates, for
// chords from a fixed origin.
std::vector<Candidate> scan_chord_roots(const MonotoneCurve& q_t,
                                        CurvePoint origin, double slope_cap,
                                        const GradingSolveParams& params) {
  auto residual = [&](double x) {
    return mass_balance_residual(q_t, origin, CurvePoint{x, q_t.eval(x)});
  };
  const std::vector<double> xs =
      sweep_grid(q_t, origin.a, q_t.x_max(), params.grid);
  if (xs.empty()) return {};
  std::vector<double> rs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) rs[i] = residual(xs[i]);

  std::vector<Candidate> out;
  auto push = [&](double x) {
    const CurvePoint far{x, q_t.eval(x)};
    if (far.a - origin.a < 1e-12 || far.q - origin.q < 1e-12) return;
    const double s = chord_slope(origin, far);
    if (s <= slope_cap) out.push_back(Candidate{s, origin.a, x});
  };

  const double ztol = 1e-12;
  std::size_t i = 0;
  while (i < xs.size()) {
    if (std::abs(rs[i]) <= ztol) {
      std::size_t j = i;
      while (j + 1 < xs.size() && std::abs(rs[j + 1]) <= ztol) ++j;
      // A legitimate zero stretch is a collinear run; its far end is the
      // "maximum coordinates" point on that ray.
      const CurvePoint far{xs[j], q_t.eval(xs[j])};
      if (far.a - origin.a > 1e-12 &&
          chord_on_curve(q_t, origin, far, params.on_ray_tol)) {
        push(xs[j]);
      } else if (j == i) {
        push(xs[i]);  // isolated grid zero: treat as a root
      }
      i = j + 1;
      continue;
    }
    if (i + 1 < xs.size() && std::abs(rs[i + 1]) > ztol &&
        (rs[i] > 0) != (rs[i + 1] > 0)) {
      const double root = bisect_root(residual, xs[i], xs[i + 1],
                                      params.bisect_tol * 1e-2,
                                      params.max_bisect_iter);
      push(root);
    }
    ++i;
  }
  return out;
}

// Tangency origin on the convex run [t0,e] for the ray through (x, q_t(x)),
// or nullopt when no tangent from the run reaches x.
std::optional<double> tangency_origin(const MonotoneCurve& q_t, double t0,
                                      double e, double x) {
  auto psi = [&](double t) {
    const double d =
        t < e ? q_t.right_derivative(t) : q_t.left_derivative(e);
    return q_t.eval(t) + d * (x - t) - q_t.eval(x);
  };
  const double lo = psi(t0);
  if (lo > 1e-13) return std::nullopt;  // only reachable below d(t0)
  if (lo >= -1e-13) return t0;
  const double hi = psi(e);
  if (hi < -1e-13) return std::nullopt;  // even the steepest tangent falls short
  return bisect_root(psi, t0, e, 1e-14, 200);
}

// Case 2 candidates: pooled segments tangent to q_t at a sliding origin in
// (t0, e], balanced at a far intersection beyond e.
std::vector<Candidate> scan_tangent_roots(const MonotoneCurve& q_t, double t0,
                                          double e,
                                          const GradingSolveParams& params) {
  if (e >= q_t.x_max() - 1e-12) return {};
  auto value = [&](double x) -> std::optional<std::pair<double, double>> {
    auto t = tangency_origin(q_t, t0, e, x);
    if (!t) return std::nullopt;
    const CurvePoint o{*t, q_t.eval(*t)};
    const CurvePoint far{x, q_t.eval(x)};
    if (far.a - o.a < 1e-12 || far.q - o.q < 1e-12) return std::nullopt;
    return std::make_pair(
        mass_balance_residual(q_t, o, far), *t);
  };
  const std::vector<double> xs = sweep_grid(q_t, e, q_t.x_max(), params.grid);
  std::vector<Candidate> out;
  auto push = [&](double x, double t) {
    const CurvePoint o{t, q_t.eval(t)};
    const CurvePoint far{x, q_t.eval(x)};
    const double s = chord_slope(o, far);
    const double cap = (q_t.y_max() - o.q) / (q_t.x_max() - o.a);
    if (s <= cap + params.slope_tie_tol) out.push_back(Candidate{s, t, x});
  };
  std::optional<std::pair<double, double>> prev;
  double prev_x = 0.0;
  for (double x : xs) {
    auto cur = value(x);
    if (cur && std::abs(cur->first) <= 1e-12) {
      push(x, cur->second);
    } else if (prev && cur && (prev->first > 0) != (cur->first > 0)) {
      const double root = bisect_root(
          [&](double xx) {
            auto v = value(xx);
            return v ? v->first : prev->first;
          },
          prev_x, x, params.bisect_tol * 1e-2, params.max_bisect_iter);
      auto v = value(root);
      if (v && std::abs(v->first) <= 1e-8) push(root, v->second);
    }
    prev = cur;
    prev_x = x;
  }
  return out;
}

std::optional<Candidate> pick_best(std::vector<Candidate> cands,
                                   double tie_tol) {
  if (cands.empty()) return std::nullopt;
  std::sort(cands.begin(), cands.end(), [&](const Candidate& a,
                                            const Candidate& b) {
    if (std::abs(a.slope - b.slope) > tie_tol) return a.slope < b.slope;
    return a.x > b.x;  // same ray: maximum coordinates
  });
  return cands.front();
}

// End of the maximal weakly-convex run of q_t starting at a0.
double convex_run_end(const MonotoneCurve& q_t, double a0) {
  const auto& segs = q_t.segments();
  std::size_t i = 0;
  while (i < segs.size() && !(segs[i].x_lo <= a0 + 1e-15 &&
                              a0 < segs[i].x_hi - 1e-15)) {
    ++i;
  }
  if (i == segs.size()) return q_t.x_max();
  double end = segs[i].x_hi;
  for (std::size_t j = i + 1; j < segs.size(); ++j) {
    const CurveSegment& s = segs[j];
    if (s.kind != SegmentKind::power || s.exponent < 1.0 - 1e-12) break;
    const double dl = q_t.left_derivative(s.x_lo);
    const double dr = q_t.right_derivative(s.x_lo);
    if (!(dr >= dl - 1e-12)) break;
    end = s.x_hi;
  }
  return end;
}

}  // namespace

double mass_balance_residual(const MonotoneCurve& q_t, CurvePoint p0,
                             CurvePoint p1) {
  if (!(p1.a > p0.a) || !(p1.q > p0.q)) {
    throw ValidationError("mass_balance_residual: degenerate segment");
  }
  const double a_true0 = q_t.inverse(p0.q);
  const double a_true1 = q_t.inverse(p1.q);
  const double true_sum = 0.5 * (a_true1 * a_true1 - a_true0 * a_true0);
  // sum of expected abilities = int L(q) dmu over [q0,q1], rewritten over the
  // ability axis where dmu(q) = da.
  const double qt_int = q_t.integral(a_true0, a_true1);
  const double expected_sum =
      p0.a * (a_true1 - a_true0) +
      (p1.a - p0.a) / (p1.q - p0.q) *
          (qt_int - p0.q * (a_true1 - a_true0));
  return true_sum - expected_sum;
}

SweepResult sweep_segment(const MonotoneCurve& q_t, CurvePoint origin,
                          SweepCase sweep_case,
                          const GradingSolveParams& params) {
  SweepResult res;
  res.new_origin = origin;
  const double a_top = q_t.x_max();
  const double q_top = q_t.y_max();
  const double cap45 = (q_top - origin.q) / (a_top - origin.a);
  const double d0 = q_t.right_derivative(origin.a);
  const double slope_cap =
      std::min(cap45, d0) + params.slope_tie_tol;

  std::vector<Candidate> cands =
      scan_chord_roots(q_t, origin, slope_cap, params);
  double run_end = a_top;
  if (sweep_case == SweepCase::convex_start) {
    run_end = convex_run_end(q_t, origin.a);
    auto tangent = scan_tangent_roots(q_t, origin.a, run_end, params);
    cands.insert(cands.end(), tangent.begin(), tangent.end());
  }

  if (auto best = pick_best(std::move(cands), params.slope_tie_tol)) {
    if (best->t > origin.a + 1e-12) res.informative_to = best->t;
    const CurvePoint from{best->t, q_t.eval(best->t)};
    const CurvePoint far{best->x, q_t.eval(best->x)};
    res.pooled = EqSegment{false, from.a, from.q, far.a, far.q,
                           mass_balance_residual(q_t, from, far)};
    res.new_origin = far;
    res.terminal = far.a >= a_top - 1e-12;
    return res;
  }

  if (sweep_case == SweepCase::convex_start) {
    // Case 2 exhaustion: fully informative up to the end of the convex run.
    res.informative_to = run_end;
    res.new_origin = CurvePoint{run_end, q_t.eval(run_end)};
    res.terminal = run_end >= a_top - 1e-12;
    return res;
  }

  // Terminal segment to quality q_top: the highest expected ability comes
  // from balancing expected against true abilities over the rest of the
  // market.
  const double a0 = origin.a;
  const double q0 = origin.q;
  const double qt_int = q_t.integral(a0, a_top);
  const double denom = qt_int - q0 * (a_top - a0);
  if (denom <= 1e-15) {
    throw SolverError("sweep: degenerate terminal segment");
  }
  const double a_hat =
      a0 + 0.5 * (a_top - a0) * (a_top - a0) * (q_top - q0) / denom;
  if (a_hat > a_top + 1e-9 || a_hat <= a0) {
    throw SolverError(
        "sweep: no balanced segment below the 45-degree cap and terminal "
        "expected ability is infeasible");
  }
  const double slope = (q_top - q0) / (a_hat - a0);
  if (slope > d0 + 1e-9) {
    throw SolverError(
        "sweep: terminal slope exceeds the truthful mapping's right "
        "derivative (violated model assumptions)");
  }
  res.pooled = EqSegment{
      false, a0, q0, std::min(a_hat, a_top), q_top,
      mass_balance_residual(q_t, origin,
                            CurvePoint{std::min(a_hat, a_top), q_top})};
  res.new_origin = CurvePoint{a_hat, q_top};
  res.terminal = true;
  return res;
}

std::size_t EquilibriumCurve::pooled_count() const {
  std::size_t n = 0;
  for (const EqSegment& s : segments) n += s.informative ? 0 : 1;
  return n;
}

bool EquilibriumCurve::single_pooled_full_range(double tol) const {
  if (segments.size() != 1 || segments.front().informative) return false;
  return segments.front().q0 <= tol && segments.front().q1 >= 1.0 - tol;
}

EquilibriumCurve solve_grading_equilibrium(const Scenario& s,
                                           const GradingSolveParams& params) {
  if (!s.aggregate_uniform) {
    throw ValidationError(
        "grading solver requires a uniform aggregate ability distribution");
  }
  if (!s.jobs.covers_unit_interval(1e-9)) {
    throw SolverError(
        "grading solver requires gap-free job support on [0,1] "
        "(positive density)");
  }
  const MonotoneCurve q_t = truthful_mapping(s);

  EquilibriumCurve out;
  CurvePoint origin{0.0, 0.0};
  std::vector<EqSegment> raw;
  for (int guard = 0; guard < 1000; ++guard) {
    if (origin.q >= q_t.y_max() - 1e-12) break;
    const auto& seg_list = q_t.segments();
    const CurveSegment* right = nullptr;
    for (const CurveSegment& cs : seg_list) {
      if (cs.x_lo <= origin.a + 1e-15 && origin.a < cs.x_hi - 1e-15) {
        right = &cs;
      }
    }
    SweepCase sweep_case = SweepCase::concave_start;
    if (right != nullptr && right->kind == SegmentKind::power &&
        right->exponent > 1.0 + 1e-12) {
      sweep_case = SweepCase::convex_start;
    }
    if (origin.a > 1e-12 && right != nullptr &&
        std::abs(right->x_lo - origin.a) <= 1e-12) {
      const double dl = q_t.left_derivative(origin.a);
      const double dr = q_t.right_derivative(origin.a);
      if (std::isfinite(dl) && std::isfinite(dr) &&
          std::abs(dl - dr) > 1e-9) {
        out.notes.push_back(
            "sweep origin at a derivative break; using right-side convexity");
      }
    }
    SweepResult sr = sweep_segment(q_t, origin, sweep_case, params);
    if (sr.informative_to && *sr.informative_to > origin.a + 1e-12) {
      raw.push_back(EqSegment{true, origin.a, origin.q, *sr.informative_to,
                              q_t.eval(*sr.informative_to), 0.0});
    }
    if (sr.pooled) raw.push_back(*sr.pooled);
    if (!sr.note.empty()) out.notes.push_back(sr.note);
    if (sr.terminal) {
      origin = sr.new_origin;
      break;
    }
    if (sr.new_origin.a <= origin.a + 1e-13) {
      throw SolverError("sweep made no progress");
    }
    origin = sr.new_origin;
  }

  // Pooled segments that lie on Q_T are informative in disguise (e.g. the
  // uniform market); relabel, then merge adjacent informative stretches.
  for (EqSegment& seg : raw) {
    if (!seg.informative &&
        chord_on_curve(q_t, CurvePoint{seg.a0, seg.q0},
                       CurvePoint{seg.a1, seg.q1}, params.on_ray_tol)) {
      seg.informative = true;
      seg.mass_balance_residual = 0.0;
    }
  }
  std::vector<EqSegment> merged;
  for (const EqSegment& seg : raw) {
    if (!merged.empty() && merged.back().informative && seg.informative) {
      merged.back().a1 = seg.a1;
      merged.back().q1 = seg.q1;
      continue;
    }
    merged.push_back(seg);
  }
  out.segments = std::move(merged);
  out.a_hat_low = 0.0;
  out.a_hat_high = out.segments.empty() ? 0.0 : out.segments.back().a1;

  std::vector<CurveSegment> curve_segs;
  for (const EqSegment& seg : out.segments) {
    if (seg.informative) {
      const MonotoneCurve sub = q_t.sub_curve(seg.a0, seg.a1);
      curve_segs.insert(curve_segs.end(), sub.segments().begin(),
                        sub.segments().end());
    } else {
      curve_segs.push_back(CurveSegment{seg.a0, seg.a1, seg.q0, seg.q1, 1.0,
                                        seg.a0, SegmentKind::power});
    }
  }
  out.curve = MonotoneCurve(std::move(curve_segs));
  return out;
}

bool GradingVerifyReport::all_passed() const {
  for (const CheckResult& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

const CheckResult* GradingVerifyReport::find(const std::string& name) const {
  for (const CheckResult& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

double rng_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Q_eq extended linearly past a_hat_high: the convex payoff bound against
// which deviations are compared.
MonotoneCurve linear_extension(const EquilibriumCurve& c) {
  if (c.a_hat_high >= 1.0 - 1e-12) return c.curve;
  std::vector<CurveSegment> segs = c.curve.segments();
  const CurveSegment& last = segs.back();
  const double slope = (last.y_hi - last.y_lo) / (last.x_hi - last.x_lo);
  segs.push_back(CurveSegment{c.a_hat_high, 1.0, last.y_hi,
                              last.y_hi + slope * (1.0 - c.a_hat_high), 1.0,
                              c.a_hat_high, SegmentKind::power});
  return MonotoneCurve(std::move(segs));
}

// Q_eq extended flat at the top quality: what an out-of-support grade
// actually fetches.
MonotoneCurve flat_extension(const EquilibriumCurve& c) {
  if (c.a_hat_high >= 1.0 - 1e-12) return c.curve;
  std::vector<CurveSegment> segs = c.curve.segments();
  const double top = segs.back().y_hi;
  segs.push_back(CurveSegment{c.a_hat_high, 1.0, top, top, 1.0, c.a_hat_high,
                              SegmentKind::flat});
  return MonotoneCurve(std::move(segs));
}

}  // namespace

GradingVerifyReport verify_grading_equilibrium(const EquilibriumCurve& c,
                                               const Scenario& s,
                                               const GradingVerifyParams& vp) {
  GradingVerifyReport rep;
  const MonotoneCurve q_t = truthful_mapping(s);
  auto add = [&](const std::string& name, bool ok, double worst,
                 const std::string& detail = "") {
    rep.checks.push_back(CheckResult{name, ok, worst, detail});
  };

  // Property 1: invertible, monotonically increasing, continuous.
  {
    double worst = 0.0;
    bool ok = true;
    for (const CurveSegment& seg : c.curve.segments()) {
      if (seg.kind == SegmentKind::jump) {
        ok = false;
        worst = std::max(worst, seg.y_hi - seg.y_lo);
      }
      if (seg.kind == SegmentKind::flat && seg.x_hi - seg.x_lo > 1e-12) {
        ok = false;
        worst = std::max(worst, seg.x_hi - seg.x_lo);
      }
    }
    add("invertible_increasing_continuous", ok, worst);
  }

  // Property 2: convexity (nondecreasing slopes).
  {
    double worst = 0.0;
    const auto& segs = c.curve.segments();
    for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
      const double dl = c.curve.left_derivative(segs[i].x_hi);
      const double dr = c.curve.right_derivative(segs[i + 1].x_lo);
      if (std::isfinite(dl) && std::isfinite(dr)) {
        worst = std::max(worst, dl - dr);
      }
    }
    for (const CurveSegment& seg : segs) {
      if (seg.kind == SegmentKind::power && seg.exponent < 1.0 - 1e-12 &&
          seg.x_hi - seg.x_lo > 1e-12) {
        worst = std::max(worst, 1.0 - seg.exponent);
      }
    }
    add("convex", worst <= 1e-9, worst);
  }

  // Property 3: lowest expected ability equals the lowest true ability (0).
  add("a_hat_low_zero",
      std::abs(c.a_hat_low) <= vp.tol && std::abs(c.curve.x_min()) <= vp.tol &&
          std::abs(c.curve.y_min()) <= vp.tol,
      std::max(std::abs(c.a_hat_low), std::abs(c.curve.y_min())));

  // Property 4: informative segments coincide with Q_T.
  {
    double worst = 0.0;
    for (const EqSegment& seg : c.segments) {
      if (!seg.informative) continue;
      const MonotoneCurve sub = c.curve.sub_curve(seg.a0, seg.a1);
      worst = std::max(worst, sub.sup_distance(q_t.sub_curve(seg.a0, seg.a1)));
    }
    add("informative_matches_truthful", worst <= 1e-8, worst);
  }

  // Mass balance on every pooled segment.
  {
    double worst = 0.0;
    for (const EqSegment& seg : c.segments) {
      if (seg.informative) continue;
      const double r = mass_balance_residual(
          q_t, CurvePoint{seg.a0, seg.q0}, CurvePoint{seg.a1, seg.q1});
      worst = std::max(worst, std::abs(r));
    }
    add("pooled_mass_balance", worst <= 1e-8, worst);
  }

  // Property 5: pooled slope at an informative start point does not exceed
  // Q_T's right derivative there.
  {
    double worst = 0.0;
    for (const EqSegment& seg : c.segments) {
      if (seg.informative) continue;
      const double slope = (seg.q1 - seg.q0) / (seg.a1 - seg.a0);
      const double d = q_t.right_derivative(seg.a0);
      if (std::isfinite(d)) worst = std::max(worst, slope - d);
    }
    add("pooled_slope_at_informative_start", worst <= 1e-9, worst);
  }

  // Global balance: expected abilities integrate to 1/2 over the job measure.
  {
    const MonotoneCurve quant = MonotoneCurve::quantile_curve(s.jobs);
    std::vector<double> brk;
    for (std::size_t i = 0; i <= s.jobs.pieces().size(); ++i) {
      brk.push_back(s.jobs.mass_before(i) / s.jobs.total_mass());
    }
    for (const EqSegment& seg : c.segments) brk.push_back(q_t.inverse(seg.q1));
    const double v = integrate_with_breakpoints(
        [&](double m) { return c.curve.inverse(quant.eval(m)); }, 0.0, 1.0,
        brk, 1e-11);
    add("global_balance_half", std::abs(v - 0.5) <= 1e-8, std::abs(v - 0.5));
  }

  // No profitable deviation. The best-response value is the placement under
  // the linearly extended curve; real deviations are evaluated against the
  // flat-capped curve (an out-of-support grade just takes the top job).
  {
    const MonotoneCurve lin = linear_extension(c);
    const MonotoneCurve flat = flat_extension(c);
    std::mt19937_64 rng(vp.seed);
    double worst_gain = 0.0;
    double worst_revelation = 0.0;
    double worst_indiff = 0.0;
    for (std::size_t i = 0; i < s.school_types.size(); ++i) {
      const PiecewisePowerDist& f = s.school_types[i].abilities;
      const double eq_value = placement_value(lin, f);
      // Same value along a second route: informative stretches integrate the
      // curve against F_i, pooled stretches pay the segment line at the
      // school's conditional mean.
      {
        double by_parts = 0.0;
        for (const EqSegment& seg : c.segments) {
          const double a1_true = q_t.inverse(seg.q1);
          const double mass = f.cdf(a1_true) - f.cdf(seg.a0);
          if (mass <= 1e-14) continue;
          if (seg.informative) {
            std::vector<double> brk{f.cdf(seg.a0), f.cdf(a1_true)};
            by_parts += integrate_with_breakpoints(
                [&](double m) { return c.curve.eval(f.quantile(m)); },
                f.cdf(seg.a0), f.cdf(a1_true), brk, 1e-12);
          } else {
            const double mean =
                f.partial_moment(seg.a0, a1_true, 1.0) / mass;
            const double slope = (seg.q1 - seg.q0) / (seg.a1 - seg.a0);
            by_parts += mass * (seg.q0 + slope * (mean - seg.a0));
          }
        }
        worst_revelation =
            std::max(worst_revelation, std::abs(by_parts - eq_value));
      }
      for (int k = 0; k < vp.deviation_samples; ++k) {
        double m0 = rng_unit(rng);
        double m1 = rng_unit(rng);
        if (m0 > m1) std::swap(m0, m1);
        if (m1 - m0 < 1e-6) continue;
        GradingPolicy pol = GradingPolicy::full_revelation(s.school_types.size());
        std::vector<GradingPolicy::Cell> cells;
        if (m0 > 0.0) cells.push_back({0.0, m0, false});
        cells.push_back({m0, m1, true});
        if (m1 < 1.0) cells.push_back({m1, 1.0, false});
        pol.per_school[i] = cells;
        const GradedAbilities g = apply_grading_policy(s, pol);
        const double dev = placement_value(flat, g.per_school[i]);
        worst_gain = std::max(worst_gain, dev - eq_value);
      }
      // Indifference across poolings inside a pooled segment: the cell's own
      // contribution must not move.
      for (const EqSegment& seg : c.segments) {
        if (seg.informative) continue;
        const double hi_ability =
            std::min(q_t.inverse(seg.q1), c.a_hat_high);
        const double mlo = f.cdf(seg.a0);
        const double mhi = f.cdf(hi_ability);
        if (mhi - mlo < 1e-6) continue;
        for (int k = 0; k < 16; ++k) {
          double m0 = mlo + (mhi - mlo) * rng_unit(rng);
          double m1 = mlo + (mhi - mlo) * rng_unit(rng);
          if (m0 > m1) std::swap(m0, m1);
          if (m1 - m0 < 1e-7) continue;
          const double q0f = f.quantile(m0), q1f = f.quantile(m1);
          const double cell_mass = m1 - m0;
          const double cell_mean =
              f.partial_moment(q0f, q1f, 1.0) / cell_mass;
          const double pooled = cell_mass * flat.eval(cell_mean);
          std::vector<double> brk{m0, m1};
          const double revealed = integrate_with_breakpoints(
              [&](double m) { return flat.eval(f.quantile(m)); }, m0, m1, brk,
              1e-12);
          worst_indiff = std::max(worst_indiff, std::abs(pooled - revealed));
        }
      }
    }
    add("no_profitable_deviation", worst_gain <= vp.tol, worst_gain);
    add("equilibrium_equals_revelation", worst_revelation <= vp.tol,
        worst_revelation);
    add("pooled_segment_indifference", worst_indiff <= vp.tol, worst_indiff);
  }

  // When the whole market pools into one segment the lemma constraint and
  // the 45-degree slope condition must hold.
  if (c.single_pooled_full_range()) {
    double worst = 0.0;
    for (int i = 1; i <= vp.grid; ++i) {
      const double q = static_cast<double>(i) / vp.grid;
      const double lhs = s.jobs.partial_moment(0.0, q, 1.0);
      const double rhs = s.jobs.cdf(q) * q / 2.0;
      worst = std::max(worst, rhs - lhs);
    }
    add("lemma_constraint_single_segment", worst <= 1e-8, worst);
    const double d0 = q_t.right_derivative(0.0);
    add("slope45_at_zero", d0 >= 1.0 - 1e-9,
        std::max(0.0, 1.0 - d0));
  }

  return rep;
}

}  // namespace unravel
