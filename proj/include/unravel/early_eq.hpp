#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unravel/grading_eq.hpp"
#include "unravel/market.hpp"
#include "unravel/piecewise.hpp"

namespace unravel {

// One executed early contract: a slice of jobs paired with one school type.
struct ContractSlice {
  double q_lo;
  double q_hi;
  double mass;        // absolute job mass
  int school;
  double school_avg;  // average true ability of the school
  double f_integral;  // \int f(q) over the slice's jobs, recorded at removal
};

struct EarlyContractOutcome {
  // (quality interval, mass) of jobs taken in stage 1, merged and ordered.
  std::vector<std::pair<std::pair<double, double>, double>> contracted_jobs;
  // Mass fraction taken from each school type (uniform cross-section).
  std::vector<double> contracted_students;
  // [a, 1-a] when the symmetric uniform-school characterization applies.
  std::optional<std::pair<double, double>> ability_interval;
  MonotoneCurve stage2_map;  // expected ability -> quality for the remnant
  double welfare_stage1 = 0.0;
  double welfare_stage2 = 0.0;

  std::vector<ContractSlice> contracts;
  PiecewisePowerDist remaining_jobs;  // normalized
  double remaining_job_mass = 1.0;
  std::vector<double> passing_roots;  // uniform solver: all verified roots

  double contracted_job_mass() const { return 1.0 - remaining_job_mass; }
};

struct EarlyParams {
  double delta = 1e-3;     // contract quantum, fraction of total mass
  int grid = 10000;        // root-scan grid for the uniform-interval solver
  double block_tol = 1e-6; // blocking-pair tolerance
  double tie_tol = 1e-9;   // school-average tie tolerance
  double verify_tol = 1e-6;
};

// Assortative matching of the remaining expected-ability distribution to the
// remaining job distribution. Both inputs normalized; the absolute masses
// must agree.
MonotoneCurve stage2_mapping(const PiecewisePowerDist& students_rem,
                             double student_mass,
                             const PiecewisePowerDist& jobs_rem,
                             double job_mass);

// Symmetric-interval equilibrium for a single uniform school with fully
// informative stage-2 grading. Scans the boundary condition
// R(a) = Q_T(a) - avgQuality(remaining) on a grid, refines roots by
// bisection, snaps sign jumps at density edges to the edge, and returns the
// smallest verified root (maximal contracting). R < 0 throughout yields the
// empty outcome.
EarlyContractOutcome solve_uniform_interval(const Scenario& s,
                                            const EarlyParams& params = {});

// Discretized cascade for general school types and grading policies:
// repeatedly contracts delta-quanta of the highest blocked job quality with
// the best-average willing school until no blocking pair remains.
EarlyContractOutcome solve_cascade(const Scenario& s, const GradingPolicy& p,
                                   const EarlyParams& params = {});

struct EarlyVerifyReport {
  std::vector<CheckResult> checks;
  double worst_block_q = 0.0;       // quality of the worst blocking pair
  double worst_block_margin = 0.0;  // its violation magnitude
  bool all_passed() const;
  const CheckResult* find(const std::string& name) const;
};

EarlyVerifyReport verify_early_equilibrium(const EarlyContractOutcome& o,
                                           const Scenario& s,
                                           const GradingPolicy& p,
                                           const EarlyParams& params = {});

// Blocking margin of quality q against the outcome's final stage-2 state:
// max over school types of min(a_hat_i - Qhat^{-1}(q), q - placement_i).
// Positive means (q, school) blocks.
double early_blocking_margin(const EarlyContractOutcome& o, const Scenario& s,
                             const GradingPolicy& p, double q);

// Stage-1 / stage-2 welfare of an outcome under the scenario's welfare pair.
std::pair<double, double> compute_early_welfare(const EarlyContractOutcome& o,
                                                const Scenario& s);

}  // namespace unravel
