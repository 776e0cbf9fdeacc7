// Internal helpers shared by the randomized rounding paths: trial bookkeeping,
// exact post-trial witness assembly, and the deterministic best-of-trials
// merge.  Not part of the public API.
#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "coreaudit/model.hpp"

namespace coreaudit::detail {

// Seed tags decorrelate the two rounding schemes when both run off one
// master seed.
constexpr std::uint64_t kTagThreshold = 0x6c6f676dull;
constexpr std::uint64_t kTagInterval = 0x6c6f676eull;

// A candidate deviation assembled from one rounding trial.
struct TrialOutcome {
  bool found = false;
  double ratio = 0.0;
  std::vector<int> voters;
  std::vector<int> committee;
};

inline double committee_ratio(const AuditInstance& inst,
                              const std::vector<int>& committee,
                              std::size_t voters) {
  if (inst.election.unit_sizes())
    return deviation_ratio(inst.ratio_scale, (unsigned long long)committee.size(),
                           (unsigned long long)voters);
  double total = 0.0;
  for (int j : committee) total += inst.election.candidates[j].size;
  return deviation_ratio(inst.ratio_scale, total, voters);
}

// Marks the voters whose exact utility strictly improves under the kept set,
// then trims the kept set down to candidates some marked voter values.
// `eligible` (when non-null) restricts the marked set.
inline TrialOutcome finish_trial(const AuditInstance& inst,
                                 const std::vector<char>& kept,
                                 const std::vector<char>* eligible) {
  const Election& e = inst.election;
  TrialOutcome out;
  std::vector<char> in_union(e.num_candidates(), 0);
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    if (eligible && !(*eligible)[i]) continue;
    long long got = 0;
    for (const auto& [j, u] : e.voters[i].utilities)
      if (kept[j]) got += u;
    if (got >= inst.util_w_int[i] + 1) out.voters.push_back((int)i);
  }
  if (out.voters.empty()) return out;
  for (int i : out.voters)
    for (const auto& [j, u] : e.voters[i].utilities)
      if (kept[j]) in_union[j] = 1;
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    if (in_union[j]) out.committee.push_back((int)j);
  out.found = true;
  out.ratio = committee_ratio(inst, out.committee, out.voters.size());
  return out;
}

// Runs finish_trial both restricted to the trial's selected voters and
// unrestricted, returning the better deviation; the restricted one wins ties.
inline TrialOutcome best_completion(const AuditInstance& inst,
                                    const std::vector<char>& kept,
                                    const std::vector<char>& selected) {
  TrialOutcome restricted = finish_trial(inst, kept, &selected);
  TrialOutcome open = finish_trial(inst, kept, nullptr);
  if (!restricted.found) return open;
  if (open.found && open.ratio < restricted.ratio) return open;
  return restricted;
}

inline DeviationWitness make_witness(const AuditInstance& inst,
                                     const TrialOutcome& best,
                                     DeviationWitness::Mode mode) {
  DeviationWitness w;
  w.mode = mode;
  w.voters = best.voters;
  w.committee.fractional = false;
  w.committee.x.assign(inst.num_candidates(), 0.0);
  for (int j : best.committee) w.committee.x[j] = 1.0;
  w.ratio = best.ratio;
  return w;
}

// Runs `trial(t)` for t in [0, trials), possibly across threads, and keeps
// the lowest (ratio, trial index) outcome.  Deterministic for fixed inputs.
template <typename TrialFn>
AuditReport run_trials(const AuditInstance& inst, double theta_lower,
                       long long lp_iterations, long long trials,
                       std::uint64_t seed, int jobs, const char* method,
                       DeviationWitness::Mode mode, TrialFn trial) {
  struct Tagged {
    TrialOutcome out;
    long long index = -1;
  };
  Tagged best;
  long long successes = 0;
  auto better = [](const Tagged& a, const Tagged& b) {
    if (!b.out.found) return false;
    if (!a.out.found) return true;
    if (b.out.ratio != a.out.ratio) return b.out.ratio < a.out.ratio;
    return b.index < a.index;
  };
  int nthreads = std::max(1, jobs);
  auto serial = [&] {
    for (long long t = 0; t < trials; ++t) {
      Tagged cur{trial(t), t};
      if (cur.out.found) ++successes;
      if (better(best, cur)) best = cur;
    }
  };
  if (nthreads == 1 || trials < 4) {
    serial();
  } else {
#ifdef _OPENMP
#pragma omp parallel num_threads(nthreads)
    {
      Tagged local;
      long long local_successes = 0;
#pragma omp for schedule(static)
      for (long long t = 0; t < trials; ++t) {
        Tagged cur{trial(t), t};
        if (cur.out.found) ++local_successes;
        if (better(local, cur)) local = cur;
      }
#pragma omp critical(coreaudit_round_merge)
      {
        successes += local_successes;
        if (better(best, local)) best = local;
      }
    }
#else
    serial();
#endif
  }
  AuditReport report;
  report.method = method;
  report.seed = seed;
  report.theta_lower = theta_lower;
  report.diagnostics.trials = trials;
  report.diagnostics.successes = successes;
  report.diagnostics.lp_iterations = lp_iterations;
  if (best.out.found) {
    report.theta_upper = best.out.ratio;
    report.witness = make_witness(inst, best.out, mode);
  }
  return report;
}

}  // namespace coreaudit::detail
