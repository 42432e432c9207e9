#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unravel/piecewise.hpp"

namespace unravel {

// Separable welfare factors: value of a (q, a) match is f(q) * g(a).
struct WelfarePair {
  MonotoneCurve f = MonotoneCurve::identity();
  MonotoneCurve g = MonotoneCurve::identity();
  bool g_concave = false;
  bool f_identity = true;
  bool g_identity = true;

  void validate() const;
};

struct SchoolType {
  double mass_fraction;
  PiecewisePowerDist abilities;  // normalized to total mass 1
};

struct RawRanges {
  double a_lo = 0.0, a_hi = 1.0;
  double q_lo = 0.0, q_hi = 1.0;
};

struct Scenario {
  PiecewisePowerDist jobs;  // normalized to total mass 1 on [0,1]
  std::vector<SchoolType> school_types;
  WelfarePair welfare;
  RawRanges raw_ranges;
  double epsilon = 1e-6;
  bool aggregate_uniform = false;
  double aggregate_uniform_deviation = 0.0;

  bool single_uniform_school(double tol = 1e-9) const;
};

// Point mass; expanded to a width-epsilon uniform sliver on load.
struct Atom {
  double at;
  double mass;
};

struct RawDistSpec {
  std::vector<PowerPiece> pieces;
  std::vector<Atom> atoms;
};

struct RawSchool {
  double mass_fraction;
  RawDistSpec abilities;
};

struct RawScenario {
  RawDistSpec jobs;
  std::vector<RawSchool> schools;
  WelfarePair welfare;
  double epsilon = 1e-6;
};

// Affine-rescales both axes to [0,1], normalizes masses to 1, expands atoms
// to epsilon slivers (extending left from the atom, clipped at 0), and
// computes the aggregate-uniformity flag.
Scenario normalize_scenario(const RawScenario& raw,
                            double uniformity_tol = 1e-6);

// Mixture sum(mass_i * F_i). Throws when overlapping non-uniform pieces make
// the mixture unrepresentable in the power family.
PiecewisePowerDist aggregate_abilities(const Scenario& s);

// Max |aggregate CDF(x) - x| over a grid plus all piece boundaries; computed
// from the components, so it works even when the mixture is unrepresentable.
double aggregate_uniform_deviation(std::span<const SchoolType> schools,
                                   int grid = 2048);

// Q_T: ability -> job quality under full information; the quantile of the
// job distribution when aggregate abilities are uniform.
MonotoneCurve truthful_mapping(const Scenario& s);

// Quantile-space partition of one school's students; pooled cells collapse
// to their conditional mean.
struct GradingPolicy {
  struct Cell {
    double m_lo;
    double m_hi;
    bool pooled;
  };
  std::vector<std::vector<Cell>> per_school;

  static GradingPolicy full_revelation(std::size_t n_schools);
  static GradingPolicy full_pooling(std::size_t n_schools);
  void validate(std::size_t n_schools) const;
};

struct GradedAbilities {
  std::vector<PiecewisePowerDist> per_school;  // G_i, each total mass 1
  PiecewisePowerDist aggregate;                // G
};

// Pooled cells become centered epsilon slivers at the cell's conditional mean
// (centering keeps the mean exact); revealed cells keep F_i's shape.
GradedAbilities apply_grading_policy(const Scenario& s, const GradingPolicy& p);

// Average job placement of a school: \int q_map(a) dG_i(a).
double placement_value(const MonotoneCurve& q_map, const PiecewisePowerDist& g_i);

}  // namespace unravel
