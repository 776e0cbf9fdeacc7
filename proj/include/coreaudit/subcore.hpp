#pragma once

#include <cstdint>

#include "coreaudit/core_approval.hpp"
#include "coreaudit/lp.hpp"
#include "coreaudit/model.hpp"

namespace coreaudit {

// Relaxation for superset-style deviations on approval instances: a group S
// moves to a committee T that keeps every member's approved committee
// candidates and adds at least one newly approved one.  The program is
//   min R * sum_j x_j
//   s.t.  x_j >= z_i            for every voter i and j approved by i in W,
//         sum_{j in A_i \ W} x_j >= z_i   for every voter i,
//         sum_i z_i >= 1,       x, z in [0,1].
// Empty when no voter approves a candidate outside the committee (then no
// superset deviation exists at any ratio).
ThetaP theta_p_subcore(const AuditInstance& inst, const LpOptions& options = {});

// Randomized roundings of the relaxation optimum into integral superset
// deviations.  Threshold scheme: one uniform threshold keeps the voters with
// high z and the committee candidates with high x outright, and buys each
// outside candidate with probability proportional to its (floor-lifted)
// weight.  Interval scheme: voters are bucketed by dyadic z-intervals and
// the heaviest bucket deviates.  Both re-validate every trial against the
// exact superset condition and keep the best ratio found.
AuditReport round_subcore_log_m(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs = 1);
AuditReport round_subcore_log_n(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs = 1);

struct SubcoreAuditConfig {
  long long trials = 64;
  std::uint64_t seed = 0;
  RoundStrategy strategy = RoundStrategy::Both;
  int jobs = 1;
  LpOptions lp;
};

// Relaxation plus rounding(s); theta_upper is the best ratio across the
// chosen strategies.
AuditReport audit_subcore(const AuditInstance& inst,
                          const SubcoreAuditConfig& config = {});

}  // namespace coreaudit
