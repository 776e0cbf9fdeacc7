// Deviation-ratio auditing for approval elections (unit sizes, 0/1
// utilities): the fractional relaxation lower bound, and randomized
// threshold roundings that turn its optimum into integral witnesses.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "coreaudit/lp.hpp"
#include "coreaudit/model.hpp"

namespace coreaudit {

// Optimum of the deviation relaxation.
struct FractionalSolution {
  std::vector<double> x;                    // per candidate, in [0,1]
  std::vector<double> z;                    // per voter, in [0,1]
  std::vector<std::map<int, double>> y;     // y[i][j] for j approved by i
  double objective = 0.0;                   // relaxation value
  long long lp_iterations = 0;
  // Nonnegative multipliers of the y_ij <= x_j rows (sign-flipped LP duals),
  // keyed like y.  These become the per-(voter,candidate) prices in the
  // priceability module.
  std::vector<std::map<int, double>> cap_duals;
  // Dual of the "some voter deviates" row (sum z >= 1).
  double activation_dual = 0.0;
};

// The relaxation as an explicit LP over per-voter variables:
// min R*sum x_j  s.t.  sum_{j in A_i} y_ij >= (u_i+1) z_i;  y_ij <= x_j;
// y_ij <= z_i;  sum_i z_i >= 1;  x, z, y >= 0.  (No upper bounds: any
// optimum rescales to sum z = 1, and sign-only variables keep the full dual
// mass on the cap rows, which the price extraction depends on.)
// Throws MODE_MISMATCH off approval mode.
LpProblem build_core_lp(const AuditInstance& inst);

struct ThetaP {
  std::optional<double> value;              // empty: no voter can improve
  std::optional<FractionalSolution> solution;
  long long lp_iterations = 0;
};

// Solves the relaxation.  Internally voters with identical (approval set,
// committee utility) are merged into weighted classes — a symmetric optimum
// exists, so the value is unchanged — and the solution/duals are expanded
// back to per-voter form.
ThetaP theta_p(const AuditInstance& inst, const LpOptions& options = {});

// Randomized roundings.  Both run `trials` independent trials seeded from
// `seed`, keep the best (lowest-ratio) feasible deviation found, and report
// it with theta_lower = the relaxation value and theta_upper = the witness
// ratio (absent when every trial failed).  Trials must be >= 1.
AuditReport round_log_m(const AuditInstance& inst, const FractionalSolution& frac,
                        long long trials, std::uint64_t seed, int jobs = 1);
AuditReport round_log_n(const AuditInstance& inst, const FractionalSolution& frac,
                        long long trials, std::uint64_t seed, int jobs = 1);

enum class RoundStrategy { LogM, LogN, Both };

struct CoreAuditConfig {
  long long trials = 64;
  std::uint64_t seed = 0;
  RoundStrategy strategy = RoundStrategy::Both;
  int jobs = 1;
  LpOptions lp;
};

// Relaxation plus rounding(s); theta_upper is the best ratio across the
// chosen strategies.
AuditReport audit_core_approval(const AuditInstance& inst,
                                const CoreAuditConfig& config = {});

}  // namespace coreaudit
