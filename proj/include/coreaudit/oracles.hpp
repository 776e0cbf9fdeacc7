// Exhaustive ground-truth audits for small instances: exact deviation search
// for the core and sub-core, and exact fractional-deviation search over voter
// subsets.  These are the references the scalable estimators are tested
// against; they refuse instances beyond their enumeration budgets.
#pragma once

#include <optional>

#include "coreaudit/model.hpp"

namespace coreaudit {

struct OracleBudget {
  long long max_committees = 1LL << 22;     // cap on 2^m committee subsets
  long long max_voter_subsets = 1LL << 14;  // cap on 2^n voter subsets
  double time_cap_s = 0.0;                  // wall-clock cap; 0 disables
};

struct ExactAudit {
  std::optional<double> theta;              // empty: no deviation exists
  std::optional<DeviationWitness> witness;  // set exactly when theta is
  long long enumerated = 0;                 // subsets in the scanned range
};

// Minimum over nonempty committees T of R*size(T)/|satisfied(T)| where
// satisfied(T) = {i : U_i(T) >= U_i(W)+1}.  First minimizer in ascending
// bitmask order.  Throws ORACLE_BUDGET past the enumeration budget and
// MODE_MISMATCH on fractional committees.
ExactAudit exact_theta_core(const AuditInstance& inst, const OracleBudget& budget = {},
                            int jobs = 1);

// Same search with satisfied(T) = {i : A_i cap W within T and T adds a new
// approved candidate}, the superset-style deviation.
ExactAudit exact_theta_subcore(const AuditInstance& inst,
                               const OracleBudget& budget = {}, int jobs = 1);

// Minimum over nonempty voter subsets S of R*cost(S)/|S| where cost(S) is the
// least total size of a fractional committee giving every member of S at
// least U_i(W)+eta.  Works for fractional audited committees as well.
ExactAudit exact_theta_fractional_core(const AuditInstance& inst, double eta,
                                       const OracleBudget& budget = {},
                                       int jobs = 1);

}  // namespace coreaudit
