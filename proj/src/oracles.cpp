#include "coreaudit/oracles.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <map>
#include <string>

#include "coreaudit/lp.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coreaudit {

namespace {

using Mask = unsigned long long;

struct Deadline {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double cap_s = 0.0;

  void check(long long counter) const {
    if (cap_s <= 0.0 || (counter & 16383) != 0) return;
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > cap_s)
      throw AuditError("ORACLE_BUDGET", "time cap exceeded during enumeration");
  }
};

void require_caps(const OracleBudget& b) {
  if (b.max_committees < 1 || b.max_voter_subsets < 1 || b.time_cap_s < 0.0)
    throw AuditError("MALFORMED", "oracle budget caps must be positive");
}

struct BestHit {
  bool found = false;
  double theta = 0.0;
  Mask mask = 0;

  void offer(double t, Mask m) {
    if (!found || t < theta || (t == theta && m < mask)) {
      found = true;
      theta = t;
      mask = m;
    }
  }
  void merge(const BestHit& o) {
    if (o.found) offer(o.theta, o.mask);
  }
};

// Voter classes for the committee scans: voters sharing an approval mask and
// a requirement collapse into one weighted row.
struct VoterClass {
  Mask amask = 0;
  long long need = 0;  // core: U_i(W)+1; ignored by the sub-core predicate
  long long weight = 0;
};

std::vector<VoterClass> build_classes(const AuditInstance& inst) {
  std::map<std::pair<Mask, long long>, long long> acc;
  for (std::size_t i = 0; i < inst.num_voters(); ++i) {
    Mask am = 0;
    for (auto& [j, u] : inst.election.voters[i].utilities)
      if (u > 0) am |= Mask(1) << j;
    acc[{am, inst.util_w_int[i] + 1}] += 1;
  }
  std::vector<VoterClass> out;
  for (auto& [key, w] : acc) out.push_back({key.first, key.second, w});
  return out;
}

enum class Notion { Core, SubCore };

struct ScanSetup {
  const AuditInstance* inst = nullptr;
  Notion notion = Notion::Core;
  bool unit = false;        // all sizes exactly 1: integer ratio path
  bool approval = false;    // 0/1 utilities: class-mask fast path
  Mask wmask = 0;           // members of the audited committee
  std::vector<VoterClass> classes;
  std::vector<double> sizes;
  Deadline deadline;
};

double mask_size(const ScanSetup& s, Mask mask) {
  double total = 0.0;
  for (Mask rest = mask; rest;) {
    int j = std::countr_zero(rest);
    total += s.sizes[j];
    rest &= rest - 1;
  }
  return total;
}

long long satisfied_weight(const ScanSetup& s, Mask mask) {
  long long sat = 0;
  if (s.notion == Notion::Core) {
    if (s.approval) {
      for (auto& c : s.classes)
        if (std::popcount(c.amask & mask) >= c.need) sat += c.weight;
    } else {
      const auto& e = s.inst->election;
      for (std::size_t i = 0; i < e.num_voters(); ++i) {
        long long got = 0;
        for (auto& [j, u] : e.voters[i].utilities)
          if (mask >> j & 1) got += u;
        if (got >= s.inst->util_w_int[i] + 1) sat += 1;
      }
    }
  } else {
    for (auto& c : s.classes) {
      Mask kept = c.amask & s.wmask;
      if ((kept & ~mask) == 0 && (c.amask & ~s.wmask & mask) != 0) sat += c.weight;
    }
  }
  return sat;
}

double ratio_for(const ScanSetup& s, Mask mask, long long sat) {
  if (s.unit)
    return deviation_ratio(s.inst->ratio_scale,
                           (unsigned long long)std::popcount(mask),
                           (unsigned long long)sat);
  return deviation_ratio(s.inst->ratio_scale, mask_size(s, mask), (std::size_t)sat);
}

// Lowest possible ratio any satisfied set could give this committee.
double floor_ratio(const ScanSetup& s, Mask mask) {
  std::size_t n = s.inst->num_voters();
  if (s.unit)
    return deviation_ratio(s.inst->ratio_scale,
                           (unsigned long long)std::popcount(mask),
                           (unsigned long long)n);
  return deviation_ratio(s.inst->ratio_scale, mask_size(s, mask), n);
}

void scan_range(const ScanSetup& s, Mask lo, Mask hi, BestHit& best) {
  long long counter = 0;
  for (Mask mask = lo; mask <= hi; ++mask) {
    s.deadline.check(++counter);
    if (best.found && floor_ratio(s, mask) > best.theta * (1.0 + 1e-12)) continue;
    long long sat = satisfied_weight(s, mask);
    if (sat <= 0) continue;
    double theta = ratio_for(s, mask, sat);
    if (!best.found || theta < best.theta) best.offer(theta, mask);
  }
}

ExactAudit committee_scan(const AuditInstance& inst, Notion notion,
                          const OracleBudget& budget, int jobs) {
  require_caps(budget);
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH",
                     "exact committee search needs an integral committee");
  int m = (int)inst.num_candidates();
  if (m > 62 || (1LL << std::min(m, 62)) > budget.max_committees)
    throw AuditError("ORACLE_BUDGET", "committee enumeration budget exceeded");

  ScanSetup s;
  s.inst = &inst;
  s.notion = notion;
  s.unit = inst.election.unit_sizes();
  s.approval = inst.election.approval_compatible();
  s.classes = build_classes(inst);
  s.sizes.resize(m);
  for (int j = 0; j < m; ++j) s.sizes[j] = inst.election.candidates[j].size;
  for (int j = 0; j < m; ++j)
    if (inst.committee.contains(j)) s.wmask |= Mask(1) << j;
  if (budget.time_cap_s > 0.0) s.deadline.cap_s = budget.time_cap_s;

  Mask total = (Mask(1) << m) - 1;
  ExactAudit out;
  out.enumerated = (long long)total;

  BestHit best;
  int workers = std::max(1, jobs);
  if (workers == 1 || total < 1024) {
    scan_range(s, 1, total, best);
  } else {
    std::vector<BestHit> locals(workers);
    std::string error_text;
    bool failed = false;
#ifdef _OPENMP
#pragma omp parallel num_threads(workers)
    {
      int t = omp_get_thread_num();
      Mask chunk = total / (Mask)workers;
      Mask lo = 1 + chunk * (Mask)t;
      Mask hi = t == workers - 1 ? total : chunk * (Mask)(t + 1);
      try {
        if (lo <= hi) scan_range(s, lo, hi, locals[t]);
      } catch (const std::exception& ex) {
#pragma omp critical
        {
          failed = true;
          error_text = ex.what();
        }
      }
    }
#else
    scan_range(s, 1, total, locals[0]);
#endif
    if (failed) throw AuditError("ORACLE_BUDGET", error_text);
    for (auto& l : locals) best.merge(l);
  }
  if (!best.found) return out;

  DeviationWitness w;
  w.mode = notion == Notion::Core ? DeviationWitness::Mode::Core
                                  : DeviationWitness::Mode::SubCore;
  w.committee.fractional = false;
  w.committee.x.assign(m, 0.0);
  for (int j = 0; j < m; ++j)
    if (best.mask >> j & 1) w.committee.x[j] = 1.0;
  // Recover the satisfied voters in index order.
  std::vector<int> voters;
  {
    const auto& e = inst.election;
    for (std::size_t i = 0; i < e.num_voters(); ++i) {
      bool in;
      if (notion == Notion::Core) {
        long long got = 0;
        for (auto& [j, u] : e.voters[i].utilities)
          if (best.mask >> j & 1) got += u;
        in = got >= inst.util_w_int[i] + 1;
      } else {
        Mask am = 0;
        for (auto& [j, u] : e.voters[i].utilities)
          if (u > 0) am |= Mask(1) << j;
        Mask kept = am & s.wmask;
        in = (kept & ~best.mask) == 0 && (am & ~s.wmask & best.mask) != 0;
      }
      if (in) voters.push_back((int)i);
    }
  }
  w.voters = std::move(voters);
  w.ratio = best.theta;
  out.theta = w.ratio;
  out.witness = std::move(w);
  return out;
}

}  // namespace

ExactAudit exact_theta_core(const AuditInstance& inst, const OracleBudget& budget,
                            int jobs) {
  return committee_scan(inst, Notion::Core, budget, jobs);
}

ExactAudit exact_theta_subcore(const AuditInstance& inst, const OracleBudget& budget,
                               int jobs) {
  return committee_scan(inst, Notion::SubCore, budget, jobs);
}

namespace {

struct FractionalScan {
  const AuditInstance* inst;
  double eta;
  Mask feasible = 0;
  std::vector<double> singleton_cost;
  std::vector<double> need;
  Deadline deadline;
};

// Least-size fractional committee giving every member of S its requirement.
// var_of maps candidate index -> LP variable (-1 when the candidate is not
// valued by anyone in S).
LpSolution subset_lp(const FractionalScan& f, Mask smask, std::vector<int>& var_of) {
  const auto& e = f.inst->election;
  int m = (int)e.num_candidates();
  LpProblem p;
  var_of.assign(m, -1);
  for (Mask rest = smask; rest;) {
    int i = std::countr_zero(rest);
    rest &= rest - 1;
    for (auto& [j, u] : e.voters[i].utilities)
      if (u > 0 && var_of[j] < 0)
        var_of[j] = p.add_var(e.candidates[j].id, e.candidates[j].size, 0.0, 1.0);
  }
  for (Mask rest = smask; rest;) {
    int i = std::countr_zero(rest);
    rest &= rest - 1;
    std::vector<std::pair<int, double>> terms;
    for (auto& [j, u] : e.voters[i].utilities)
      if (u > 0) terms.push_back({var_of[j], (double)u});
    p.add_row(e.voters[i].id, Relation::Ge, f.need[i], terms);
  }
  return solve_lp(p);
}

}  // namespace

ExactAudit exact_theta_fractional_core(const AuditInstance& inst, double eta,
                                       const OracleBudget& budget, int jobs) {
  require_caps(budget);
  if (!(eta > 0.0))
    throw AuditError("MALFORMED", "eta must be positive");
  int n = (int)inst.num_voters();
  int m = (int)inst.num_candidates();
  if (n > 62 || (1LL << std::min(n, 62)) > budget.max_voter_subsets)
    throw AuditError("ORACLE_BUDGET", "voter subset budget exceeded");

  FractionalScan f;
  f.inst = &inst;
  f.eta = eta;
  f.need.resize(n);
  f.singleton_cost.assign(n, 0.0);
  if (budget.time_cap_s > 0.0) f.deadline.cap_s = budget.time_cap_s;
  const auto& e = inst.election;
  for (int i = 0; i < n; ++i) {
    f.need[i] = inst.util_w[i] + eta;
    double max_util = 0.0;
    for (auto& [j, u] : e.voters[i].utilities) max_util += (double)u;
    if (max_util >= f.need[i] - 1e-9) f.feasible |= Mask(1) << i;
  }
  std::vector<int> var_scratch;
  for (int i = 0; i < n; ++i)
    if (f.feasible >> i & 1)
      f.singleton_cost[i] = subset_lp(f, Mask(1) << i, var_scratch).objective;

  Mask total = (Mask(1) << n) - 1;
  ExactAudit out;
  out.enumerated = (long long)total;
  if (f.feasible == 0) return out;

  struct Local {
    BestHit best;
    std::vector<double> y;
  };
  auto scan = [&](Mask lo, Mask hi, Local& local) {
    long long counter = 0;
    std::vector<int> var_of;
    for (Mask mask = lo; mask <= hi; ++mask) {
      f.deadline.check(++counter);
      if (mask & ~f.feasible) continue;
      int sat = std::popcount(mask);
      double max_single = 0.0;
      for (Mask rest = mask; rest;) {
        int i = std::countr_zero(rest);
        rest &= rest - 1;
        max_single = std::max(max_single, f.singleton_cost[i]);
      }
      if (local.best.found &&
          deviation_ratio(inst.ratio_scale, max_single, (std::size_t)sat) >
              local.best.theta * (1.0 + 1e-12))
        continue;
      auto sol = subset_lp(f, mask, var_of);
      if (sol.status != LpStatus::Optimal) continue;
      double theta = deviation_ratio(inst.ratio_scale, sol.objective, (std::size_t)sat);
      if (!local.best.found || theta < local.best.theta) {
        local.best.offer(theta, mask);
        local.y.assign(m, 0.0);
        for (int j = 0; j < m; ++j)
          if (var_of[j] >= 0) local.y[j] = sol.primal[var_of[j]];
      }
    }
  };

  int workers = std::max(1, jobs);
  Local merged;
  if (workers == 1 || total < 256) {
    scan(1, total, merged);
  } else {
    std::vector<Local> locals(workers);
    std::string error_text;
    bool failed = false;
#ifdef _OPENMP
#pragma omp parallel num_threads(workers)
    {
      int t = omp_get_thread_num();
      Mask chunk = total / (Mask)workers;
      Mask lo = 1 + chunk * (Mask)t;
      Mask hi = t == workers - 1 ? total : chunk * (Mask)(t + 1);
      try {
        if (lo <= hi) scan(lo, hi, locals[t]);
      } catch (const std::exception& ex) {
#pragma omp critical
        {
          failed = true;
          error_text = ex.what();
        }
      }
    }
#else
    scan(1, total, locals[0]);
#endif
    if (failed) throw AuditError("ORACLE_BUDGET", error_text);
    for (auto& l : locals)
      if (l.best.found &&
          (!merged.best.found || l.best.theta < merged.best.theta ||
           (l.best.theta == merged.best.theta && l.best.mask < merged.best.mask))) {
        merged.best = l.best;
        merged.y = l.y;
      }
  }
  if (!merged.best.found) return out;

  DeviationWitness w;
  w.mode = DeviationWitness::Mode::FractionalCore;
  w.eta = eta;
  w.committee.fractional = true;
  w.committee.x.assign(m, 0.0);
  for (int j = 0; j < m; ++j)
    w.committee.x[j] = merged.y[j] > 1e-12 ? std::min(1.0, merged.y[j]) : 0.0;
  for (int i = 0; i < n; ++i)
    if (merged.best.mask >> i & 1) w.voters.push_back(i);
  w.ratio = deviation_ratio(inst.ratio_scale, w.committee.total_size(e),
                            w.voters.size());
  out.theta = w.ratio;
  out.witness = std::move(w);
  return out;
}

}  // namespace coreaudit
