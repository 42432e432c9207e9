#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unravel/market.hpp"
#include "unravel/piecewise.hpp"

namespace unravel {

struct EqSegment {
  bool informative;
  double a0, q0;  // lower endpoint (expected ability, quality)
  double a1, q1;  // upper endpoint
  double mass_balance_residual;  // 0 for informative segments
};

// The connected strategic-grading equilibrium: Q_eq as tagged segments over
// expected abilities [0, a_hat_high].
struct EquilibriumCurve {
  std::vector<EqSegment> segments;
  double a_hat_low = 0.0;
  double a_hat_high = 1.0;
  MonotoneCurve curve;
  std::vector<std::string> notes;

  std::size_t pooled_count() const;
  // Single pooled segment spanning the whole quality range?
  bool single_pooled_full_range(double tol = 1e-9) const;
};

struct GradingSolveParams {
  int grid = 4096;
  double bisect_tol = 1e-10;
  int max_bisect_iter = 200;
  double on_ray_tol = 1e-9;
  double slope_tie_tol = 1e-9;
};

enum class SweepCase { concave_start, convex_start };

// Balance defect of pooling the students between p0 and p1 into the linear
// grade map through those points: (true ability sum) - (expected ability sum).
// True abilities are read off q_t at the segment's quality range, so p1 may
// be a curve endpoint like (a_hat_high, 1) that lies off q_t.
double mass_balance_residual(const MonotoneCurve& q_t, CurvePoint p0,
                             CurvePoint p1);

struct SweepResult {
  // Q_eq == Q_T on [origin.a, *informative_to] when set.
  std::optional<double> informative_to;
  std::optional<EqSegment> pooled;
  CurvePoint new_origin;
  bool terminal = false;
  std::string note;
};

SweepResult sweep_segment(const MonotoneCurve& q_t, CurvePoint origin,
                          SweepCase sweep_case,
                          const GradingSolveParams& params = {});

EquilibriumCurve solve_grading_equilibrium(const Scenario& s,
                                           const GradingSolveParams& params = {});

struct CheckResult {
  std::string name;
  bool passed;
  double worst;
  std::string detail;
};

struct GradingVerifyParams {
  int deviation_samples = 200;
  double tol = 1e-8;
  std::uint64_t seed = 0x1736u;
  int grid = 1000;
};

struct GradingVerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
  const CheckResult* find(const std::string& name) const;
};

GradingVerifyReport verify_grading_equilibrium(
    const EquilibriumCurve& c, const Scenario& s,
    const GradingVerifyParams& params = {});

}  // namespace unravel
