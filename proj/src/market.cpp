#include "unravel/market.hpp"

#include <algorithm>
#include <cmath>

#include "unravel/errors.hpp"
#include "unravel/quadrature.hpp"

namespace unravel {

void WelfarePair::validate() const {
  for (const MonotoneCurve* c : {&f, &g}) {
    for (const CurveSegment& s : c->segments()) {
      if (s.y_hi < s.y_lo - 1e-12) {
        throw ValidationError("welfare factor must be nondecreasing");
      }
    }
  }
  if (g.eval(g.x_min()) < -1e-12) {
    throw ValidationError("welfare factor g must satisfy g(0) >= 0");
  }
  if (g_concave) {
    double prev = std::numeric_limits<double>::infinity();
    for (const CurveSegment& s : g.segments()) {
      if (s.kind == SegmentKind::jump) {
        throw ValidationError("concave g cannot contain jumps");
      }
      const double d_in = g.right_derivative(s.x_lo);
      const double d_out = g.left_derivative(s.x_hi);
      if (d_in > prev + 1e-9 || d_out > d_in + 1e-9) {
        throw ValidationError("g_concave set but slopes increase");
      }
      prev = d_out;
    }
  }
}

bool Scenario::single_uniform_school(double tol) const {
  if (school_types.size() != 1) return false;
  const PiecewisePowerDist& f = school_types.front().abilities;
  if (f.pieces().size() != 1) return false;
  const PowerPiece& p = f.pieces().front();
  return std::abs(p.lo) <= tol && std::abs(p.hi - 1.0) <= tol &&
         std::abs(p.exponent - 1.0) <= tol;
}

namespace {

// Atom at v becomes a uniform sliver on [v-eps, v], clipped to start at 0.
PiecewisePowerDist expand_spec(const RawDistSpec& spec, double eps) {
  std::vector<PowerPiece> ps = spec.pieces;
  for (const Atom& a : spec.atoms) {
    if (a.mass <= 0.0) throw ValidationError("atom with non-positive mass");
    const double lo = std::max(a.at - eps, 0.0);
    ps.push_back(PowerPiece(lo, lo + eps, a.mass));
  }
  if (ps.empty()) throw ValidationError("empty distribution");
  return PiecewisePowerDist(std::move(ps));
}

PiecewisePowerDist rescale_dist(const PiecewisePowerDist& d, double lo,
                                double hi) {
  const double scale = 1.0 / (hi - lo);
  std::vector<PowerPiece> ps;
  for (const PowerPiece& p : d.pieces()) {
    ps.push_back(PowerPiece::with_origin((p.lo - lo) * scale,
                                         (p.hi - lo) * scale, p.mass,
                                         p.exponent, (p.origin - lo) * scale));
  }
  PiecewisePowerDist out(std::move(ps));
  return out.normalized();
}

}  // namespace

double aggregate_uniform_deviation(std::span<const SchoolType> schools,
                                   int grid) {
  std::vector<double> xs;
  for (const SchoolType& s : schools) {
    for (const PowerPiece& p : s.abilities.pieces()) {
      xs.push_back(p.lo);
      xs.push_back(p.hi);
    }
  }
  for (int i = 0; i <= grid; ++i) xs.push_back(static_cast<double>(i) / grid);
  double worst = 0.0;
  for (double x : xs) {
    double cdf = 0.0;
    for (const SchoolType& s : schools) {
      cdf += s.mass_fraction * s.abilities.cdf(x);
    }
    worst = std::max(worst, std::abs(cdf - std::clamp(x, 0.0, 1.0)));
  }
  return worst;
}

Scenario normalize_scenario(const RawScenario& raw, double uniformity_tol) {
  if (raw.schools.empty()) throw ValidationError("scenario has no schools");
  if (!(raw.epsilon > 0.0) || raw.epsilon > 0.5) {
    throw ValidationError("epsilon must be in (0, 0.5]");
  }
  raw.welfare.validate();

  double frac_sum = 0.0;
  for (const RawSchool& s : raw.schools) {
    if (s.mass_fraction <= 0.0) {
      throw ValidationError("school mass fraction must be positive");
    }
    frac_sum += s.mass_fraction;
  }

  // Jobs: rescale the raw support to [0,1], then expand atoms so the sliver
  // width is epsilon in normalized units.
  if (raw.jobs.pieces.empty() && raw.jobs.atoms.empty()) {
    throw ValidationError("scenario has no jobs");
  }
  double q_lo = std::numeric_limits<double>::infinity();
  double q_hi = -std::numeric_limits<double>::infinity();
  for (const PowerPiece& p : raw.jobs.pieces) {
    q_lo = std::min(q_lo, p.lo);
    q_hi = std::max(q_hi, p.hi);
  }
  for (const Atom& a : raw.jobs.atoms) {
    q_lo = std::min(q_lo, a.at);
    q_hi = std::max(q_hi, a.at);
  }
  if (!(q_hi > q_lo)) throw ValidationError("degenerate job quality range");

  RawDistSpec jobs_scaled;
  const double q_scale = 1.0 / (q_hi - q_lo);
  for (const PowerPiece& p : raw.jobs.pieces) {
    jobs_scaled.pieces.push_back(PowerPiece::with_origin(
        (p.lo - q_lo) * q_scale, (p.hi - q_lo) * q_scale, p.mass, p.exponent,
        (p.origin - q_lo) * q_scale));
  }
  for (const Atom& a : raw.jobs.atoms) {
    jobs_scaled.atoms.push_back(Atom{(a.at - q_lo) * q_scale, a.mass});
  }
  PiecewisePowerDist jobs = expand_spec(jobs_scaled, raw.epsilon).normalized();

  // Abilities: shared raw range over all schools.
  double a_lo = std::numeric_limits<double>::infinity();
  double a_hi = -std::numeric_limits<double>::infinity();
  for (const RawSchool& s : raw.schools) {
    for (const PowerPiece& p : s.abilities.pieces) {
      a_lo = std::min(a_lo, p.lo);
      a_hi = std::max(a_hi, p.hi);
    }
    for (const Atom& a : s.abilities.atoms) {
      a_lo = std::min(a_lo, a.at);
      a_hi = std::max(a_hi, a.at);
    }
  }
  if (!(a_hi > a_lo)) throw ValidationError("degenerate ability range");
  const double a_scale = 1.0 / (a_hi - a_lo);

  Scenario out;
  out.jobs = jobs;
  out.welfare = raw.welfare;
  out.epsilon = raw.epsilon;
  out.raw_ranges = RawRanges{a_lo, a_hi, q_lo, q_hi};
  for (const RawSchool& s : raw.schools) {
    RawDistSpec scaled;
    for (const PowerPiece& p : s.abilities.pieces) {
      scaled.pieces.push_back(PowerPiece::with_origin(
          (p.lo - a_lo) * a_scale, (p.hi - a_lo) * a_scale, p.mass, p.exponent,
          (p.origin - a_lo) * a_scale));
    }
    for (const Atom& a : s.abilities.atoms) {
      scaled.atoms.push_back(Atom{(a.at - a_lo) * a_scale, a.mass});
    }
    out.school_types.push_back(
        SchoolType{s.mass_fraction / frac_sum,
                   expand_spec(scaled, raw.epsilon).normalized()});
  }
  out.aggregate_uniform_deviation =
      aggregate_uniform_deviation(out.school_types);
  out.aggregate_uniform = out.aggregate_uniform_deviation <= uniformity_tol;
  return out;
}

PiecewisePowerDist aggregate_abilities(const Scenario& s) {
  std::vector<std::pair<double, const PiecewisePowerDist*>> parts;
  for (const SchoolType& t : s.school_types) {
    parts.push_back({t.mass_fraction, &t.abilities});
  }
  return PiecewisePowerDist::mixture(parts);
}

MonotoneCurve truthful_mapping(const Scenario& s) {
  if (!s.aggregate_uniform) {
    throw ValidationError(
        "truthful mapping requires a uniform aggregate ability distribution");
  }
  return MonotoneCurve::quantile_curve(s.jobs);
}

GradingPolicy GradingPolicy::full_revelation(std::size_t n_schools) {
  GradingPolicy p;
  p.per_school.assign(n_schools, {Cell{0.0, 1.0, false}});
  return p;
}

GradingPolicy GradingPolicy::full_pooling(std::size_t n_schools) {
  GradingPolicy p;
  p.per_school.assign(n_schools, {Cell{0.0, 1.0, true}});
  return p;
}

void GradingPolicy::validate(std::size_t n_schools) const {
  if (per_school.size() != n_schools) {
    throw ValidationError("grading policy school count mismatch");
  }
  for (const auto& cells : per_school) {
    if (cells.empty()) throw ValidationError("grading policy with empty school");
    double pos = 0.0;
    for (const Cell& c : cells) {
      if (std::abs(c.m_lo - pos) > 1e-9 || c.m_hi <= c.m_lo) {
        throw ValidationError("grading policy cells must partition [0,1]");
      }
      pos = c.m_hi;
    }
    if (std::abs(pos - 1.0) > 1e-9) {
      throw ValidationError("grading policy cells must cover [0,1]");
    }
  }
}

namespace {

// G_i for one school: revealed cells keep the ability shape on the cell's
// quantile range, pooled cells become a centered sliver at the cell mean.
PiecewisePowerDist graded_school(const PiecewisePowerDist& f,
                                 std::span<const GradingPolicy::Cell> cells,
                                 double eps) {
  bool all_revealed = true;
  for (const auto& c : cells) all_revealed = all_revealed && !c.pooled;
  if (all_revealed) return f;

  std::vector<PowerPiece> out;
  for (const auto& c : cells) {
    const double q_lo = f.quantile(c.m_lo);
    const double q_hi = f.quantile(c.m_hi);
    const double mass = c.m_hi - c.m_lo;
    if (!c.pooled) {
      for (const PowerPiece& p : f.pieces()) {
        const double a = std::max(p.lo, q_lo);
        const double b = std::min(p.hi, q_hi);
        if (b > a + 1e-15) {
          const double wl = std::pow(std::max(a - p.origin, 0.0), p.exponent);
          const double wh = std::pow(std::max(b - p.origin, 0.0), p.exponent);
          const double wlo = std::pow(std::max(p.lo - p.origin, 0.0), p.exponent);
          const double whi = std::pow(std::max(p.hi - p.origin, 0.0), p.exponent);
          const double sub = p.mass * (wh - wl) / (whi - wlo);
          if (sub > 1e-15) {
            out.push_back(
                PowerPiece::with_origin(a, b, sub, p.exponent, p.origin));
          }
        }
      }
    } else {
      const double mean = f.partial_moment(q_lo, q_hi, 1.0) / mass;
      const double half = std::min({eps / 2.0, mean, 1.0 - mean});
      const double w = std::max(half, 1e-12);
      out.push_back(PowerPiece(mean - w, mean + w, mass));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PowerPiece& a, const PowerPiece& b) { return a.lo < b.lo; });
  // Pooled slivers may collide with each other or with revealed pieces when
  // cell means are close; nudging by merging into a mixture keeps it valid.
  std::vector<std::pair<double, const PiecewisePowerDist*>> parts;
  std::vector<PiecewisePowerDist> holder;
  holder.reserve(out.size());
  for (const PowerPiece& p : out) {
    holder.push_back(PiecewisePowerDist({p}));
  }
  for (const PiecewisePowerDist& d : holder) parts.push_back({1.0, &d});
  return PiecewisePowerDist::mixture(parts);
}

}  // namespace

GradedAbilities apply_grading_policy(const Scenario& s, const GradingPolicy& p) {
  p.validate(s.school_types.size());
  GradedAbilities out;
  std::vector<std::pair<double, const PiecewisePowerDist*>> parts;
  for (std::size_t i = 0; i < s.school_types.size(); ++i) {
    out.per_school.push_back(
        graded_school(s.school_types[i].abilities, p.per_school[i], s.epsilon));
  }
  for (std::size_t i = 0; i < s.school_types.size(); ++i) {
    parts.push_back({s.school_types[i].mass_fraction, &out.per_school[i]});
  }
  out.aggregate = PiecewisePowerDist::mixture(parts);
  return out;
}

double placement_value(const MonotoneCurve& q_map,
                       const PiecewisePowerDist& g_i) {
  if (g_i.support_lo() < q_map.x_min() - 1e-9 ||
      g_i.support_hi() > q_map.x_max() + 1e-9) {
    throw ValidationError("placement_value: school support outside map domain");
  }
  std::vector<double> brk;
  const double total = g_i.total_mass();
  for (std::size_t i = 0; i <= g_i.pieces().size(); ++i) {
    brk.push_back(g_i.mass_before(i) / total);
  }
  for (double x : q_map.breakpoints()) {
    brk.push_back(g_i.cdf(x) / total);
  }
  return integrate_with_breakpoints(
      [&](double m) { return q_map.eval(g_i.quantile(m * total)); }, 0.0, 1.0,
      brk, 1e-11);
}

}  // namespace unravel
