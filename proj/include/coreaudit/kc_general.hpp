// Core audit for elections with arbitrary candidate sizes and nonnegative
// integer utilities.  The fractional lower bound guesses the largest
// candidate size used by a deviation, restricts to candidates no larger,
// and strengthens the covering relaxation with knapsack-cover cuts found by
// an exact dynamic-programming separator.  Randomized rounding of the best
// relaxation recovers integral deviation witnesses.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "coreaudit/core_approval.hpp"
#include "coreaudit/lp.hpp"
#include "coreaudit/model.hpp"

namespace coreaudit {

// The instance restricted under one guess of the largest deviating
// candidate: larger candidates are deleted, very small ones are bought
// outright, and the survivors' sizes rescale into [1/m', 1].
struct ResidualInstance {
  int guess = -1;                 // index of the guessed largest candidate
  std::vector<int> kept;          // surviving candidate indices, ascending
  std::vector<int> small;         // candidates bought outright, ascending
  std::vector<double> scaled_size;  // kept sizes divided by the guess size
  std::vector<long long> adjusted_utility;  // per voter: committee utility
                                            // minus utility from `small`
  std::vector<int> forced;        // voters already improved by `small` alone
  double offset = 0.0;            // total size of the `small` candidates
};

ResidualInstance preprocess(const AuditInstance& inst, int guess);

// One knapsack-cover inequality: over candidates the voter values outside
// `subset`, utilities truncated at the residual demand must cover it.
struct KnapsackCoverCut {
  int voter = -1;
  std::vector<int> subset;                        // candidate indices, ascending
  long long demand = 0;                           // residual demand after subset
  std::vector<std::pair<int, long long>> coeffs;  // truncated utilities outside
  double violation = 0.0;
};

// Exact most-violated-cut search for one voter at the point (x, y, z); ties
// break toward smaller subsets, then lexicographically.  Returns nothing
// when every inequality holds within tolerance.
std::optional<KnapsackCoverCut> separate_kc(const AuditInstance& inst, int voter,
                                            const std::vector<double>& x,
                                            const std::map<int, double>& y,
                                            double z);

struct ThetaPGeneral {
  std::optional<double> value;  // empty when no voter can improve at all
  std::optional<FractionalSolution> solution;
  long long lp_iterations = 0;
  long long cuts = 0;
};

// Certified fractional lower bound on the deviation ratio, minimized over
// all guesses of the largest deviating candidate size.
ThetaPGeneral theta_p_general(const AuditInstance& inst, double epsilon = 0.01,
                              const LpOptions& options = {});

// The same cut-generation relaxation run once over the full candidate set
// (no size restriction) with variables that are only sign-constrained, so the
// cap-row dual multipliers carry the complete price information.  The integer
// price bracket is built from this run's duals.
ThetaPGeneral kc_relaxation_unrestricted(const AuditInstance& inst,
                                         double epsilon = 0.01,
                                         const LpOptions& options = {});

// Threshold rounding with a 1/(2m'^2) probability floor on surviving
// candidates; accepted voters are certified by truncated residual demands.
AuditReport round_general_log_m(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs = 1);

// Interval rounding: voters group by activation level, the heaviest group is
// kept, and candidates are sampled at rates scaled to that group's level.
AuditReport round_general_log_n(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs = 1);

// Minimum total cost of fractionally meeting `demand` with the given
// (utility, cost) items under all knapsack-cover inequalities.  Returns
// kLpInf when the items cannot meet the demand even integrally.
double min_purchase_kc_lp(const std::vector<std::pair<long long, double>>& items,
                          long long demand, double epsilon = 0.01,
                          const LpOptions& options = {});

struct GeneralAuditConfig {
  double epsilon = 0.01;
  long long trials = 64;
  std::uint64_t seed = 0;
  RoundStrategy strategy = RoundStrategy::Both;
  int jobs = 1;
  LpOptions lp;
};

// Lower bound plus best rounded witness for a general-utilities instance.
AuditReport audit_core_general(const AuditInstance& inst,
                               const GeneralAuditConfig& config = {});

}  // namespace coreaudit
