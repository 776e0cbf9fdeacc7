#include "coreaudit/subcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "coreaudit/detail/rounding.hpp"

namespace coreaudit {

namespace {

using detail::TrialOutcome;

void require_approval_mode(const AuditInstance& inst) {
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH", "superset audit needs an integral committee");
  if (!inst.election.approval_compatible())
    throw AuditError("MODE_MISMATCH",
                     "superset audit needs unit sizes and 0/1 utilities");
}

std::vector<char> committee_mask(const AuditInstance& inst) {
  std::vector<char> in_w(inst.num_candidates(), 0);
  for (std::size_t j = 0; j < inst.num_candidates(); ++j)
    in_w[j] = inst.committee.x[j] >= 0.5;
  return in_w;
}

bool anyone_extends(const AuditInstance& inst, const std::vector<char>& in_w) {
  for (const Voter& v : inst.election.voters)
    for (const auto& [j, u] : v.utilities)
      if (!in_w[j]) return true;
  return false;
}

// Exact superset completion of a rounded trial: a voter is satisfied by the
// kept set when it retains every approved committee member and gains at
// least one approved outsider; the kept set is then trimmed to candidates
// some satisfied voter approves.
TrialOutcome subcore_finish(const AuditInstance& inst, const std::vector<char>& in_w,
                            const std::vector<char>& kept,
                            const std::vector<char>* eligible) {
  const Election& e = inst.election;
  TrialOutcome out;
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    if (eligible && !(*eligible)[i]) continue;
    bool holds_w = true;
    bool gains = false;
    for (const auto& [j, u] : e.voters[i].utilities) {
      if (in_w[j]) {
        if (!kept[j]) {
          holds_w = false;
          break;
        }
      } else if (kept[j]) {
        gains = true;
      }
    }
    if (holds_w && gains) out.voters.push_back((int)i);
  }
  if (out.voters.empty()) return out;
  std::vector<char> in_union(e.num_candidates(), 0);
  for (int i : out.voters)
    for (const auto& [j, u] : e.voters[i].utilities)
      if (kept[j]) in_union[j] = 1;
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    if (in_union[j]) out.committee.push_back((int)j);
  out.found = true;
  out.ratio = detail::committee_ratio(inst, out.committee, out.voters.size());
  return out;
}

TrialOutcome subcore_completion(const AuditInstance& inst,
                                const std::vector<char>& in_w,
                                const std::vector<char>& kept,
                                const std::vector<char>& selected) {
  TrialOutcome restricted = subcore_finish(inst, in_w, kept, &selected);
  TrialOutcome open = subcore_finish(inst, in_w, kept, nullptr);
  if (!restricted.found) return open;
  if (open.found && open.ratio < restricted.ratio) return open;
  return restricted;
}

void check_rounding_args(const AuditInstance& inst, const FractionalSolution& frac,
                         long long trials) {
  require_approval_mode(inst);
  if (trials < 1) throw AuditError("MALFORMED", "trials must be at least 1");
  if (frac.x.size() != inst.num_candidates() || frac.z.size() != inst.num_voters())
    throw AuditError("MALFORMED", "fractional solution does not match the instance");
}

}  // namespace

ThetaP theta_p_subcore(const AuditInstance& inst, const LpOptions& options) {
  require_approval_mode(inst);
  ThetaP result;
  std::vector<char> in_w = committee_mask(inst);
  if (!anyone_extends(inst, in_w)) return result;  // no superset deviation exists

  const Election& e = inst.election;
  const double R = inst.ratio_scale;
  LpProblem p;
  p.sense = Sense::Minimize;
  std::vector<int> xv(e.num_candidates());
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    xv[j] = p.add_var("x_" + e.candidates[j].id, R, 0.0, 1.0);
  std::vector<int> zv(e.num_voters());
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    zv[i] = p.add_var("z_" + e.voters[i].id, 0.0, 0.0, 1.0);
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    for (const auto& [j, u] : e.voters[i].utilities)
      if (in_w[j])
        p.add_row("hold_" + e.voters[i].id + "_" + e.candidates[j].id, Relation::Ge,
                  0.0, {{xv[j], 1.0}, {zv[i], -1.0}});
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    std::vector<std::pair<int, double>> terms;
    for (const auto& [j, u] : e.voters[i].utilities)
      if (!in_w[j]) terms.push_back({xv[j], 1.0});
    terms.push_back({zv[i], -1.0});
    p.add_row("reach_" + e.voters[i].id, Relation::Ge, 0.0, terms);
  }
  std::vector<std::pair<int, double>> act;
  for (std::size_t i = 0; i < e.num_voters(); ++i) act.push_back({zv[i], 1.0});
  int act_row = p.add_row("activation", Relation::Ge, 1.0, act);

  LpSolution sol = solve_lp(p, options);
  if (sol.status != LpStatus::Optimal)
    throw AuditError("SOLVER_STALL", "superset relaxation did not solve cleanly");

  FractionalSolution frac;
  frac.objective = sol.objective;
  frac.lp_iterations = sol.iterations;
  frac.x.resize(e.num_candidates());
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    frac.x[j] = std::clamp(sol.primal[xv[j]], 0.0, 1.0);
  frac.z.resize(e.num_voters());
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    frac.z[i] = std::clamp(sol.primal[zv[i]], 0.0, 1.0);
  frac.y.assign(e.num_voters(), {});
  frac.cap_duals.assign(e.num_voters(), {});
  frac.activation_dual = std::max(0.0, sol.dual[act_row]);
  result.value = sol.objective;
  result.solution = std::move(frac);
  result.lp_iterations = sol.iterations;
  return result;
}

AuditReport round_subcore_log_m(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs) {
  check_rounding_args(inst, frac, trials);
  const std::size_t n = inst.num_voters();
  const std::size_t m = inst.num_candidates();
  std::vector<char> in_w = committee_mask(inst);
  double zmax = 0.0;
  for (double z : frac.z) zmax = std::max(zmax, z);
  const double floor_p = 1.0 / ((double)m * (double)m);
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagThreshold);

  auto trial = [&](long long t) -> TrialOutcome {
    if (zmax <= 0.0) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    double alpha = rng.uniform01();
    std::vector<char> selected(n, 0);
    for (std::size_t i = 0; i < n; ++i) selected[i] = frac.z[i] / zmax >= alpha;
    std::vector<char> kept(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
      if (in_w[j]) {
        kept[j] = frac.x[j] >= alpha;
      } else {
        double lifted = std::max(frac.x[j], floor_p);
        if (lifted >= alpha)
          kept[j] = 1;
        else
          kept[j] = rng.bernoulli(lifted / alpha);
      }
    }
    return subcore_completion(inst, in_w, kept, selected);
  };
  return detail::run_trials(inst, frac.objective, frac.lp_iterations, trials, seed,
                            jobs, "subcore-logm", DeviationWitness::Mode::SubCore,
                            trial);
}

AuditReport round_subcore_log_n(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs) {
  check_rounding_args(inst, frac, trials);
  const std::size_t n = inst.num_voters();
  const std::size_t m = inst.num_candidates();
  std::vector<char> in_w = committee_mask(inst);

  int omega = 0;
  while ((2ULL << omega) <= n) ++omega;  // 2^omega <= n < 2^(omega+1)
  if (omega == 0) {
    AuditReport report;
    report.method = "subcore-logn";
    report.seed = seed;
    report.theta_lower = frac.objective;
    report.diagnostics.trials = 0;
    report.diagnostics.successes = 0;
    report.diagnostics.lp_iterations = frac.lp_iterations;
    report.diagnostics.notes.push_back("DEGENERATE_INTERVALS");
    return report;
  }

  double zmax = 0.0;
  for (double z : frac.z) zmax = std::max(zmax, z);

  std::vector<int> level(n, 0);
  std::vector<double> level_weight(omega + 1, 0.0);
  if (zmax > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double z = frac.z[i] / zmax;
      if (z <= 1.0 / (double)n) continue;
      int l = omega;
      for (int cand = 1; cand < omega; ++cand) {
        if (z <= (double)(1ULL << cand) / (double)n) {
          l = cand;
          break;
        }
      }
      level[i] = l;
      level_weight[l] += z;
    }
  }
  int lstar = 1;
  for (int l = 2; l <= omega; ++l)
    if (level_weight[l] > level_weight[lstar]) lstar = l;
  const double big_l = (double)(1ULL << (lstar - 1)) / (double)n;
  const double floor_p = 1.0 / ((double)m * (double)m);
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagInterval);

  std::vector<char> selected(n, 0);
  for (std::size_t i = 0; i < n; ++i) selected[i] = level[i] == lstar;

  auto trial = [&](long long t) -> TrialOutcome {
    if (zmax <= 0.0 || level_weight[lstar] <= 0.0) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    std::vector<char> kept(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
      if (in_w[j]) {
        kept[j] = frac.x[j] >= big_l;
      } else {
        double p = std::max(frac.x[j], floor_p) / big_l;
        if (p >= 1.0)
          kept[j] = 1;
        else
          kept[j] = rng.bernoulli(p);
      }
    }
    return subcore_completion(inst, in_w, kept, selected);
  };
  return detail::run_trials(inst, frac.objective, frac.lp_iterations, trials, seed,
                            jobs, "subcore-logn", DeviationWitness::Mode::SubCore,
                            trial);
}

AuditReport audit_subcore(const AuditInstance& inst, const SubcoreAuditConfig& config) {
  require_approval_mode(inst);
  ThetaP tp = theta_p_subcore(inst, config.lp);
  AuditReport report;
  report.method = "subcore";
  report.seed = config.seed;
  report.diagnostics.lp_iterations = tp.lp_iterations;
  if (!tp.value.has_value()) return report;  // no superset deviation exists
  report.theta_lower = tp.value;

  std::vector<AuditReport> parts;
  if (config.strategy == RoundStrategy::LogM || config.strategy == RoundStrategy::Both)
    parts.push_back(round_subcore_log_m(inst, *tp.solution, config.trials,
                                        config.seed, config.jobs));
  if (config.strategy == RoundStrategy::LogN || config.strategy == RoundStrategy::Both)
    parts.push_back(round_subcore_log_n(inst, *tp.solution, config.trials,
                                        config.seed, config.jobs));
  for (const AuditReport& part : parts) {
    report.diagnostics.trials += part.diagnostics.trials;
    report.diagnostics.successes += part.diagnostics.successes;
    for (const std::string& note : part.diagnostics.notes)
      report.diagnostics.notes.push_back(note);
    if (part.theta_upper.has_value() &&
        (!report.theta_upper.has_value() || *part.theta_upper < *report.theta_upper)) {
      report.theta_upper = part.theta_upper;
      report.witness = part.witness;
    }
  }
  return report;
}

}  // namespace coreaudit
