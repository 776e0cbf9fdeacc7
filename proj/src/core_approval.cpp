#include "coreaudit/core_approval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coreaudit/detail/rounding.hpp"

namespace coreaudit {

namespace {

using detail::best_completion;
using detail::TrialOutcome;

void require_approval(const AuditInstance& inst) {
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH", "approval audit needs an integral committee");
  if (!inst.election.approval_compatible())
    throw AuditError("MODE_MISMATCH",
                     "approval audit needs unit sizes and 0/1 utilities");
}

bool someone_can_improve(const AuditInstance& inst) {
  for (std::size_t i = 0; i < inst.num_voters(); ++i) {
    long long deg = (long long)inst.election.voters[i].utilities.size();
    if (deg >= inst.util_w_int[i] + 1) return true;
  }
  return false;
}

// Voters with the same approval set and the same committee utility are
// interchangeable in the relaxation; merge them into weighted classes.
struct VoterClass {
  std::vector<int> approvals;  // candidate indices, ascending
  long long need = 1;          // u_i + 1
  std::vector<int> members;    // voter indices
};

std::vector<VoterClass> build_classes(const AuditInstance& inst) {
  std::map<std::pair<std::vector<int>, long long>, std::vector<int>> groups;
  for (std::size_t i = 0; i < inst.num_voters(); ++i) {
    std::vector<int> approvals;
    for (const auto& [j, u] : inst.election.voters[i].utilities)
      approvals.push_back(j);
    groups[{std::move(approvals), inst.util_w_int[i] + 1}].push_back((int)i);
  }
  std::vector<VoterClass> classes;
  classes.reserve(groups.size());
  for (auto& [key, members] : groups)
    classes.push_back({key.first, key.second, std::move(members)});
  return classes;
}

void check_rounding_args(const AuditInstance& inst, const FractionalSolution& frac,
                         long long trials) {
  require_approval(inst);
  if (trials < 1) throw AuditError("MALFORMED", "trials must be at least 1");
  if (frac.x.size() != inst.num_candidates() || frac.z.size() != inst.num_voters())
    throw AuditError("MALFORMED", "fractional solution does not match the instance");
}

template <typename TrialFn>
AuditReport run_trials(const AuditInstance& inst, const FractionalSolution& frac,
                       long long trials, std::uint64_t seed, int jobs,
                       const char* method, TrialFn trial) {
  return detail::run_trials(inst, frac.objective, frac.lp_iterations, trials, seed,
                            jobs, method, DeviationWitness::Mode::Core, trial);
}

}  // namespace

LpProblem build_core_lp(const AuditInstance& inst) {
  require_approval(inst);
  const Election& e = inst.election;
  const double R = inst.ratio_scale;
  LpProblem p;
  p.sense = Sense::Minimize;
  // Variables are only sign-constrained.  Keeping them free of artificial
  // [0,1] caps makes the dual multipliers land entirely on the cap rows,
  // which is what the price extraction reads; the optimum value is the same
  // either way because any solution can be rescaled so that sum z = 1.
  std::vector<int> xv(e.num_candidates());
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    xv[j] = p.add_var("x_" + e.candidates[j].id, R);
  std::vector<int> zv(e.num_voters());
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    zv[i] = p.add_var("z_" + e.voters[i].id);
  std::vector<std::map<int, int>> yv(e.num_voters());
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    for (const auto& [j, u] : e.voters[i].utilities)
      yv[i][j] = p.add_var("y_" + e.voters[i].id + "_" + e.candidates[j].id);
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    std::vector<std::pair<int, double>> terms;
    for (const auto& [j, yj] : yv[i]) terms.push_back({yj, 1.0});
    terms.push_back({zv[i], -(double)(inst.util_w_int[i] + 1)});
    p.add_row("cover_" + e.voters[i].id, Relation::Ge, 0.0, terms);
  }
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    for (const auto& [j, yj] : yv[i])
      p.add_row("capx_" + e.voters[i].id + "_" + e.candidates[j].id, Relation::Le,
                0.0, {{yj, 1.0}, {xv[j], -1.0}});
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    for (const auto& [j, yj] : yv[i])
      p.add_row("capz_" + e.voters[i].id + "_" + e.candidates[j].id, Relation::Le,
                0.0, {{yj, 1.0}, {zv[i], -1.0}});
  std::vector<std::pair<int, double>> act;
  for (std::size_t i = 0; i < e.num_voters(); ++i) act.push_back({zv[i], 1.0});
  p.add_row("activation", Relation::Ge, 1.0, act);
  return p;
}

ThetaP theta_p(const AuditInstance& inst, const LpOptions& options) {
  require_approval(inst);
  ThetaP result;
  if (!someone_can_improve(inst)) return result;

  const Election& e = inst.election;
  const double R = inst.ratio_scale;
  std::vector<VoterClass> classes = build_classes(inst);

  LpProblem p;
  p.sense = Sense::Minimize;
  std::vector<int> xv(e.num_candidates());
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    xv[j] = p.add_var("x_" + std::to_string(j), R, 0.0, 1.0);
  std::vector<int> zv(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c)
    zv[c] = p.add_var("z_" + std::to_string(c), 0.0, 0.0, 1.0);
  std::vector<std::vector<int>> yv(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    yv[c].resize(classes[c].approvals.size());
    for (std::size_t t = 0; t < classes[c].approvals.size(); ++t)
      yv[c][t] = p.add_var("y_" + std::to_string(c) + "_" + std::to_string(t), 0.0,
                           0.0, 1.0);
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<std::pair<int, double>> terms;
    for (int y : yv[c]) terms.push_back({y, 1.0});
    terms.push_back({zv[c], -(double)classes[c].need});
    p.add_row("cover_" + std::to_string(c), Relation::Ge, 0.0, terms);
  }
  std::vector<std::vector<int>> capx_row(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    capx_row[c].resize(classes[c].approvals.size());
    for (std::size_t t = 0; t < classes[c].approvals.size(); ++t)
      capx_row[c][t] = p.add_row("capx_" + std::to_string(c) + "_" + std::to_string(t),
                                 Relation::Le, 0.0,
                                 {{yv[c][t], 1.0}, {xv[classes[c].approvals[t]], -1.0}});
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    for (std::size_t t = 0; t < classes[c].approvals.size(); ++t)
      p.add_row("capz_" + std::to_string(c) + "_" + std::to_string(t), Relation::Le,
                0.0, {{yv[c][t], 1.0}, {zv[c], -1.0}});
  std::vector<std::pair<int, double>> act;
  for (std::size_t c = 0; c < classes.size(); ++c)
    act.push_back({zv[c], (double)classes[c].members.size()});
  int act_row = p.add_row("activation", Relation::Ge, 1.0, act);

  LpSolution sol = solve_lp(p, options);
  if (sol.status != LpStatus::Optimal)
    throw AuditError("SOLVER_STALL", "deviation relaxation did not solve cleanly");

  FractionalSolution frac;
  frac.objective = sol.objective;
  frac.lp_iterations = sol.iterations;
  frac.x.resize(e.num_candidates());
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    frac.x[j] = std::clamp(sol.primal[xv[j]], 0.0, 1.0);
  frac.z.assign(e.num_voters(), 0.0);
  frac.y.assign(e.num_voters(), {});
  frac.cap_duals.assign(e.num_voters(), {});
  frac.activation_dual = std::max(0.0, sol.dual[act_row]);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    double zc = std::clamp(sol.primal[zv[c]], 0.0, 1.0);
    double weight = (double)classes[c].members.size();
    for (int i : classes[c].members) {
      frac.z[i] = zc;
      for (std::size_t t = 0; t < classes[c].approvals.size(); ++t) {
        int j = classes[c].approvals[t];
        frac.y[i][j] = std::clamp(sol.primal[yv[c][t]], 0.0, 1.0);
        frac.cap_duals[i][j] = std::max(0.0, -sol.dual[capx_row[c][t]] / weight);
      }
    }
  }
  result.value = sol.objective;
  result.solution = std::move(frac);
  result.lp_iterations = sol.iterations;
  return result;
}

AuditReport round_log_m(const AuditInstance& inst, const FractionalSolution& frac,
                        long long trials, std::uint64_t seed, int jobs) {
  check_rounding_args(inst, frac, trials);
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  double zmax = 0.0;
  for (double z : frac.z) zmax = std::max(zmax, z);
  const double floor_p = 1.0 / (2.0 * (double)m * (double)m);
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagThreshold);

  auto trial = [&](long long t) -> TrialOutcome {
    if (zmax <= 0.0) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    double alpha = rng.uniform01();
    std::vector<char> selected(n, 0);
    for (std::size_t i = 0; i < n; ++i) selected[i] = frac.z[i] / zmax > alpha;
    std::vector<char> kept(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
      double boosted = 2.0 * std::max(floor_p, frac.x[j]);
      if (boosted > alpha)
        kept[j] = 1;
      else
        kept[j] = rng.bernoulli(boosted / alpha);
    }
    return best_completion(inst, kept, selected);
  };
  return run_trials(inst, frac, trials, seed, jobs, "round-logm", trial);
}

AuditReport round_log_n(const AuditInstance& inst, const FractionalSolution& frac,
                        long long trials, std::uint64_t seed, int jobs) {
  check_rounding_args(inst, frac, trials);
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();

  // omega = floor(log2 n) group intervals above the discarded bottom one.
  int omega = 0;
  while ((2ULL << omega) <= n) ++omega;  // now 2^omega <= n < 2^(omega+1)
  if (omega == 0) {
    AuditReport report;
    report.method = "round-logn";
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

  // Interval of each voter (0 = discarded), and the weight-heaviest interval.
  std::vector<int> level(n, 0);
  std::vector<double> level_weight(omega + 1, 0.0);
  if (zmax > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double z = frac.z[i] / zmax;
      if (z <= 1.0 / (double)n) continue;
      int l = omega;  // anything above 2^(omega-1)/n sits in the top interval
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
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagInterval);

  std::vector<char> selected(n, 0);
  for (std::size_t i = 0; i < n; ++i) selected[i] = level[i] == lstar;

  auto trial = [&](long long t) -> TrialOutcome {
    if (zmax <= 0.0 || level_weight[lstar] <= 0.0) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    std::vector<char> kept(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
      double p = 2.0 * frac.x[j] / big_l;
      if (p >= 1.0)
        kept[j] = 1;
      else if (p > 0.0)
        kept[j] = rng.bernoulli(p);
    }
    return best_completion(inst, kept, selected);
  };
  return run_trials(inst, frac, trials, seed, jobs, "round-logn", trial);
}

AuditReport audit_core_approval(const AuditInstance& inst,
                                const CoreAuditConfig& config) {
  require_approval(inst);
  ThetaP tp = theta_p(inst, config.lp);
  AuditReport report;
  report.method = "core-approval";
  report.seed = config.seed;
  report.diagnostics.lp_iterations = tp.lp_iterations;
  if (!tp.value.has_value()) return report;  // nobody can improve: unbounded
  report.theta_lower = tp.value;

  std::vector<AuditReport> parts;
  if (config.strategy == RoundStrategy::LogM || config.strategy == RoundStrategy::Both)
    parts.push_back(
        round_log_m(inst, *tp.solution, config.trials, config.seed, config.jobs));
  if (config.strategy == RoundStrategy::LogN || config.strategy == RoundStrategy::Both)
    parts.push_back(
        round_log_n(inst, *tp.solution, config.trials, config.seed, config.jobs));
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
