#pragma once

#include <optional>

#include "coreaudit/lp.hpp"
#include "coreaudit/model.hpp"

namespace coreaudit {

// Result of a price-equilibrium audit: the certified ratio and the explicit
// per-voter price system backing it.  An empty `theta` means the stability
// condition is vacuous for this instance (no voter can improve at all), so
// the ratio is unbounded and no price system is needed.
struct PriceAudit {
  std::optional<double> theta;
  std::optional<PriceSystem> prices;
  long long lp_iterations = 0;
};

// Equilibrium-price ratio for approval instances.  Solves the per-voter
// deviation relaxation and reads the prices off the dual multipliers of the
// y <= x cap rows; by strong duality the certified ratio equals the
// relaxation optimum exactly.  The returned system always passes
// check_prices.
PriceAudit lindahl_ratio_approval(const AuditInstance& inst,
                                  const LpOptions& options = {});

// Equilibrium-price ratio against fractional deviations that must improve a
// voter's utility by at least `eta` (> 0).  Works for any utilities, sizes,
// and committee (integral committees are a special case).  Builds the
// aggregate multiplier program directly: variables theta, lambda_i, and per
// valued pair (i, j) a price p_ij and a cap multiplier alpha_ij.
PriceAudit lindahl_fractional(const AuditInstance& inst, double eta = 1.0,
                              const LpOptions& options = {});

// Two-sided bracket on the equilibrium-price ratio against integral
// deviations with general utilities.  The lower end is the unrestricted
// knapsack-cover relaxation value; the integrality gap of the per-voter
// cover program is at most 2, so the true ratio lies in
// [lower, (2 + epsilon) * lower].  Prices come from the relaxation's cap-row
// duals, rescaled by candidate size.
struct PriceBracket {
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<PriceSystem> prices;
  long long lp_iterations = 0;
  long long cuts = 0;
};
PriceBracket lindahl_integer_general(const AuditInstance& inst,
                                     double epsilon = 0.01,
                                     const LpOptions& options = {});

// Weak price equilibrium for approval instances: every voter must find any
// single approved non-committee candidate, plus their approved committee
// members, collectively priced at theta or more.  Returns the optimal primal
// prices.  Empty when the committee already contains every approved
// candidate of every voter.
PriceAudit weak_priceability(const AuditInstance& inst,
                             const LpOptions& options = {});

// A certified ratio strictly above 1 (beyond tolerance) proves the
// corresponding stability notion.
inline bool certifies_stability(double theta) { return theta > 1.0 + 1e-6; }

}  // namespace coreaudit
