#include "coreaudit/kc_general.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coreaudit/detail/rounding.hpp"

namespace coreaudit {

namespace {

using detail::best_completion;
using detail::TrialOutcome;

constexpr double kCutTolerance = 1e-7;
constexpr long long kMaxDemand = 1000000;

void require_integral(const AuditInstance& inst) {
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH", "core audit needs an integral committee");
}

void check_demands(const AuditInstance& inst) {
  for (std::size_t i = 0; i < inst.num_voters(); ++i)
    if (inst.util_w_int[i] + 1 > kMaxDemand)
      throw AuditError("DEMAND_TOO_LARGE",
                       "a voter's improvement demand exceeds the separation cap");
}

// Voters with identical utility vectors and identical committee utility are
// interchangeable; merge them into weighted classes.
struct GeneralClass {
  std::vector<std::pair<int, long long>> utilities;
  long long demand = 1;  // committee utility + 1
  std::vector<int> members;
};

std::vector<GeneralClass> build_general_classes(const AuditInstance& inst) {
  std::map<std::pair<std::vector<std::pair<int, long long>>, long long>,
           std::vector<int>>
      groups;
  for (std::size_t i = 0; i < inst.num_voters(); ++i)
    groups[{inst.election.voters[i].utilities, inst.util_w_int[i] + 1}].push_back(
        (int)i);
  std::vector<GeneralClass> classes;
  classes.reserve(groups.size());
  for (auto& [key, members] : groups)
    classes.push_back({key.first, key.second, std::move(members)});
  return classes;
}

struct KcItemView {
  int id = -1;         // caller-side identifier (candidate index or item slot)
  long long util = 0;  // positive integer utility
  double y = 0.0;      // current fractional purchase
};

struct RawCut {
  std::vector<int> subset;  // positions into the item list, ascending
  long long demand = 0;
  double violation = 0.0;
};

// Exact separation: for every residual demand D = cap - t, a subset-sum
// dynamic program finds the subset with utility total exactly t that
// maximizes the payoff of truncated utilities, i.e. minimizes the cut's
// left-hand side.  Ties prefer smaller subsets, then lexicographic order;
// payoffs accumulate in ascending item order so comparisons are exact.
std::optional<RawCut> most_violated_cut(const std::vector<KcItemView>& items,
                                        long long cap, double z, double tol) {
  const int count = (int)items.size();
  long long sum_u = 0;
  for (const KcItemView& it : items) sum_u += it.util;
  struct Entry {
    double payoff = 0.0;
    std::vector<int> set;
  };
  auto set_less = [](const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  };
  std::optional<RawCut> best;
  for (long long demand = cap; demand >= 1; --demand) {
    long long t = cap - demand;
    if (t > sum_u) break;  // larger utility totals are unreachable too
    double total = 0.0;
    for (const KcItemView& it : items)
      total += (double)std::min(it.util, demand) * it.y;
    std::vector<std::optional<Entry>> dp(t + 1);
    dp[0] = Entry{};
    for (int pos = 0; pos < count; ++pos) {
      long long u = items[pos].util;
      if (u > t) continue;
      double w = (double)std::min(u, demand) * items[pos].y;
      for (long long s = t; s >= u; --s) {
        if (!dp[s - u]) continue;
        Entry cand;
        cand.payoff = dp[s - u]->payoff + w;
        cand.set = dp[s - u]->set;
        cand.set.push_back(pos);
        if (!dp[s] || cand.payoff > dp[s]->payoff ||
            (cand.payoff == dp[s]->payoff && set_less(cand.set, dp[s]->set)))
          dp[s] = std::move(cand);
      }
    }
    if (!dp[t]) continue;
    double violation = z * (double)demand - (total - dp[t]->payoff);
    if (violation <= tol) continue;
    if (!best || violation > best->violation ||
        (violation == best->violation && set_less(dp[t]->set, best->subset)))
      best = RawCut{dp[t]->set, demand, violation};
  }
  return best;
}

}  // namespace

ResidualInstance preprocess(const AuditInstance& inst, int guess) {
  require_integral(inst);
  const Election& e = inst.election;
  if (guess < 0 || (std::size_t)guess >= e.num_candidates())
    throw AuditError("MALFORMED", "guess candidate index out of range");
  ResidualInstance res;
  res.guess = guess;
  const double s_star = e.candidates[guess].size;
  std::vector<int> kept_all;
  for (std::size_t j = 0; j < e.num_candidates(); ++j)
    if (e.candidates[j].size <= s_star) kept_all.push_back((int)j);
  const double cutoff = s_star / (double)kept_all.size();
  std::vector<char> small_mask(e.num_candidates(), 0);
  for (int j : kept_all) {
    if (e.candidates[j].size < cutoff) {
      res.small.push_back(j);
      small_mask[j] = 1;
      res.offset += e.candidates[j].size;
    } else {
      res.kept.push_back(j);
      res.scaled_size.push_back(e.candidates[j].size / s_star);
    }
  }
  res.adjusted_utility.resize(e.num_voters());
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    long long small_u = 0;
    for (const auto& [j, u] : e.voters[i].utilities)
      if (small_mask[j]) small_u += u;
    res.adjusted_utility[i] = inst.util_w_int[i] - small_u;
    if (res.adjusted_utility[i] < 0) res.forced.push_back((int)i);
  }
  return res;
}

std::optional<KnapsackCoverCut> separate_kc(const AuditInstance& inst, int voter,
                                            const std::vector<double>& x,
                                            const std::map<int, double>& y,
                                            double z) {
  require_integral(inst);
  const Election& e = inst.election;
  if (voter < 0 || (std::size_t)voter >= e.num_voters())
    throw AuditError("MALFORMED", "voter index out of range");
  if (x.size() != e.num_candidates())
    throw AuditError("MALFORMED", "x vector does not match the candidate count");
  const long long cap = inst.util_w_int[voter] + 1;
  if (cap > kMaxDemand)
    throw AuditError("DEMAND_TOO_LARGE",
                     "the voter's improvement demand exceeds the separation cap");
  std::vector<KcItemView> items;
  for (const auto& [j, u] : e.voters[voter].utilities) {
    auto it = y.find(j);
    items.push_back({j, u, it == y.end() ? 0.0 : it->second});
  }
  std::optional<RawCut> raw = most_violated_cut(items, cap, z, kCutTolerance);
  if (!raw) return std::nullopt;
  KnapsackCoverCut cut;
  cut.voter = voter;
  cut.demand = raw->demand;
  cut.violation = raw->violation;
  std::vector<char> in_subset(items.size(), 0);
  for (int pos : raw->subset) {
    in_subset[pos] = 1;
    cut.subset.push_back(items[pos].id);
  }
  for (std::size_t pos = 0; pos < items.size(); ++pos)
    if (!in_subset[pos])
      cut.coeffs.push_back({items[pos].id, std::min(items[pos].util, cut.demand)});
  return cut;
}

namespace {

// One run of the cutting-plane relaxation over a fixed surviving-candidate
// set.  `capped_vars` keeps the classic [0,1] caps on every variable; the
// price extraction instead wants sign-constrained variables so the full dual
// mass lands on the cap rows (the optimum value is identical either way).
struct KcLpRun {
  double objective = 0.0;
  FractionalSolution frac;
  long long iterations = 0;
  long long cuts = 0;
};

KcLpRun run_kc_lp(const AuditInstance& inst,
                  const std::vector<GeneralClass>& classes,
                  const std::vector<char>& is_kept, const std::vector<int>& kept,
                  long long iter_cap, const LpOptions& options, bool capped_vars) {
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  const double R = inst.ratio_scale;
  const double hi = capped_vars ? 1.0 : kLpInf;
  KcLpRun run;

  {
    LpProblem p;
    p.sense = Sense::Minimize;
    std::vector<int> col_of(m, -1);
    std::vector<int> xv(kept.size());
    for (std::size_t t = 0; t < kept.size(); ++t) {
      xv[t] = p.add_var("x_" + std::to_string(kept[t]), R * e.candidates[kept[t]].size,
                        0.0, hi);
      col_of[kept[t]] = xv[t];
    }
    std::vector<int> zv(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c)
      zv[c] = p.add_var("z_" + std::to_string(c), 0.0, 0.0, hi);
    // y variables only for surviving candidates a class values
    std::vector<std::vector<int>> support(classes.size());
    std::vector<std::vector<long long>> support_u(classes.size());
    std::vector<std::vector<int>> yv(classes.size());
    std::vector<std::vector<int>> ypos(classes.size());  // candidate -> slot
    for (std::size_t c = 0; c < classes.size(); ++c) {
      ypos[c].assign(m, -1);
      for (const auto& [j, u] : classes[c].utilities) {
        if (!is_kept[j]) continue;
        ypos[c][j] = (int)support[c].size();
        support[c].push_back(j);
        support_u[c].push_back(u);
        yv[c].push_back(p.add_var(
            "y_" + std::to_string(c) + "_" + std::to_string(j), 0.0, 0.0, hi));
      }
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
      std::vector<std::pair<int, double>> terms;
      for (std::size_t t = 0; t < support[c].size(); ++t)
        terms.push_back(
            {yv[c][t], (double)std::min(support_u[c][t], classes[c].demand)});
      terms.push_back({zv[c], -(double)classes[c].demand});
      p.add_row("cover_" + std::to_string(c), Relation::Ge, 0.0, terms);
    }
    std::vector<std::vector<int>> capx_row(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
      capx_row[c].resize(support[c].size());
      for (std::size_t t = 0; t < support[c].size(); ++t)
        capx_row[c][t] =
            p.add_row("capx_" + std::to_string(c) + "_" + std::to_string(support[c][t]),
                      Relation::Le, 0.0,
                      {{yv[c][t], 1.0}, {col_of[support[c][t]], -1.0}});
    }
    for (std::size_t c = 0; c < classes.size(); ++c)
      for (std::size_t t = 0; t < support[c].size(); ++t)
        p.add_row("capz_" + std::to_string(c) + "_" + std::to_string(support[c][t]),
                  Relation::Le, 0.0, {{yv[c][t], 1.0}, {zv[c], -1.0}});
    std::vector<std::pair<int, double>> act;
    for (std::size_t c = 0; c < classes.size(); ++c)
      act.push_back({zv[c], (double)classes[c].members.size()});
    int act_row = p.add_row("activation", Relation::Ge, 1.0, act);

    LpSolution sol;
    for (long long it = 0;; ++it) {
      if (it >= iter_cap)
        throw AuditError("CUT_LOOP_STALL",
                         "cutting-plane loop exceeded its iteration budget");
      sol = solve_lp(p, options);
      if (sol.status != LpStatus::Optimal)
        throw AuditError("SOLVER_STALL", "deviation relaxation did not solve cleanly");
      run.iterations += sol.iterations;

      long long added = 0;
      for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<KcItemView> items;
        for (const auto& [j, u] : classes[c].utilities) {
          double yval = ypos[c][j] >= 0 ? sol.primal[yv[c][ypos[c][j]]] : 0.0;
          items.push_back({j, u, yval});
        }
        std::optional<RawCut> cut =
            most_violated_cut(items, classes[c].demand, sol.primal[zv[c]],
                              kCutTolerance);
        if (!cut) continue;
        std::vector<char> in_subset(items.size(), 0);
        for (int pos : cut->subset) in_subset[pos] = 1;
        std::vector<std::pair<int, double>> terms;
        for (std::size_t pos = 0; pos < items.size(); ++pos) {
          if (in_subset[pos]) continue;
          int j = items[pos].id;
          if (ypos[c][j] < 0) continue;  // deleted candidates buy nothing
          terms.push_back({yv[c][ypos[c][j]],
                           (double)std::min(items[pos].util, cut->demand)});
        }
        terms.push_back({zv[c], -(double)cut->demand});
        p.add_row("kc_" + std::to_string(c) + "_" + std::to_string(it) + "_" +
                      std::to_string(added),
                  Relation::Ge, 0.0, terms);
        ++added;
      }
      if (added == 0) break;
      run.cuts += added;
    }

    run.objective = sol.objective;
    FractionalSolution frac;
    frac.objective = sol.objective;
    frac.x.assign(m, 0.0);
    for (std::size_t t = 0; t < kept.size(); ++t)
      frac.x[kept[t]] = std::clamp(sol.primal[xv[t]], 0.0, 1.0);
    frac.z.assign(n, 0.0);
    frac.y.assign(n, {});
    frac.cap_duals.assign(n, {});
    frac.activation_dual = std::max(0.0, sol.dual[act_row]);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      double zc = std::clamp(sol.primal[zv[c]], 0.0, 1.0);
      double weight = (double)classes[c].members.size();
      for (int i : classes[c].members) {
        frac.z[i] = zc;
        for (std::size_t t = 0; t < support[c].size(); ++t) {
          int j = support[c][t];
          frac.y[i][j] = std::clamp(sol.primal[yv[c][t]], 0.0, 1.0);
          frac.cap_duals[i][j] = std::max(0.0, -sol.dual[capx_row[c][t]] / weight);
        }
      }
    }
    run.frac = std::move(frac);
  }
  return run;
}

// Distinct candidate sizes in decreasing order: the candidate guesses for the
// largest size a deviation uses.
std::vector<double> size_guesses(const Election& e) {
  std::vector<double> guesses;
  for (const Candidate& c : e.candidates) guesses.push_back(c.size);
  std::sort(guesses.begin(), guesses.end(), std::greater<double>());
  guesses.erase(std::unique(guesses.begin(), guesses.end()), guesses.end());
  return guesses;
}

bool any_class_reaches_demand(const std::vector<GeneralClass>& classes,
                              const std::vector<char>& is_kept) {
  for (const GeneralClass& c : classes) {
    long long reachable = 0;
    for (const auto& [j, u] : c.utilities)
      if (is_kept[j]) reachable += u;
    if (reachable >= c.demand) return true;
  }
  return false;
}

long long cut_iteration_cap(const AuditInstance& inst, double epsilon) {
  return std::max(1LL, (long long)(10.0 * (double)inst.num_voters() *
                                   (double)inst.num_candidates() * (0.01 / epsilon)));
}

}  // namespace

ThetaPGeneral theta_p_general(const AuditInstance& inst, double epsilon,
                              const LpOptions& options) {
  require_integral(inst);
  check_demands(inst);
  if (epsilon <= 0.0) throw AuditError("MALFORMED", "epsilon must be positive");
  const Election& e = inst.election;
  const std::size_t m = e.num_candidates();
  ThetaPGeneral result;

  std::vector<GeneralClass> classes = build_general_classes(inst);
  const long long iter_cap = cut_iteration_cap(inst, epsilon);

  std::optional<double> best_value;
  FractionalSolution best_frac;

  for (double s_star : size_guesses(e)) {
    std::vector<char> is_kept(m, 0);
    std::vector<int> kept;
    for (std::size_t j = 0; j < m; ++j)
      if (e.candidates[j].size <= s_star) {
        is_kept[j] = 1;
        kept.push_back((int)j);
      }
    if (!any_class_reaches_demand(classes, is_kept)) continue;

    KcLpRun run =
        run_kc_lp(inst, classes, is_kept, kept, iter_cap, options, true);
    result.lp_iterations += run.iterations;
    result.cuts += run.cuts;
    if (best_value.has_value() && run.objective >= *best_value) continue;
    best_value = run.objective;
    best_frac = std::move(run.frac);
  }

  if (!best_value.has_value()) return result;  // nobody can improve: unbounded
  best_frac.lp_iterations = result.lp_iterations;
  result.value = best_value;
  result.solution = std::move(best_frac);
  return result;
}

ThetaPGeneral kc_relaxation_unrestricted(const AuditInstance& inst, double epsilon,
                                         const LpOptions& options) {
  require_integral(inst);
  check_demands(inst);
  if (epsilon <= 0.0) throw AuditError("MALFORMED", "epsilon must be positive");
  const std::size_t m = inst.num_candidates();
  ThetaPGeneral result;

  std::vector<GeneralClass> classes = build_general_classes(inst);
  std::vector<char> is_kept(m, 1);
  std::vector<int> kept(m);
  for (std::size_t j = 0; j < m; ++j) kept[j] = (int)j;
  if (!any_class_reaches_demand(classes, is_kept)) return result;

  KcLpRun run = run_kc_lp(inst, classes, is_kept, kept,
                          cut_iteration_cap(inst, epsilon), options, false);
  result.lp_iterations = run.iterations;
  result.cuts = run.cuts;
  run.frac.lp_iterations = run.iterations;
  result.value = run.objective;
  result.solution = std::move(run.frac);
  return result;
}

namespace {

void check_general_rounding_args(const AuditInstance& inst,
                                 const FractionalSolution& frac, long long trials) {
  require_integral(inst);
  if (trials < 1) throw AuditError("MALFORMED", "trials must be at least 1");
  if (frac.x.size() != inst.num_candidates() || frac.z.size() != inst.num_voters())
    throw AuditError("MALFORMED", "fractional solution does not match the instance");
}

// The rounding schemes re-derive the size guess as the largest candidate the
// fractional solution actually uses, then work on that residual instance.
struct RoundSetup {
  bool have = false;
  ResidualInstance res;
  std::vector<char> is_kept, is_small, is_forced;
};

RoundSetup prepare_rounding(const AuditInstance& inst,
                            const FractionalSolution& frac) {
  const Election& e = inst.election;
  RoundSetup su;
  int jstar = -1;
  double best = -1.0;
  for (std::size_t j = 0; j < e.num_candidates(); ++j) {
    if (frac.x[j] <= 1e-9) continue;
    if (jstar == -1 || e.candidates[j].size > best) {
      jstar = (int)j;
      best = e.candidates[j].size;
    }
  }
  if (jstar == -1) return su;
  su.have = true;
  su.res = preprocess(inst, jstar);
  su.is_kept.assign(e.num_candidates(), 0);
  su.is_small.assign(e.num_candidates(), 0);
  su.is_forced.assign(e.num_voters(), 0);
  for (int j : su.res.kept) su.is_kept[j] = 1;
  for (int j : su.res.small) su.is_small[j] = 1;
  for (int i : su.res.forced) su.is_forced[i] = 1;
  return su;
}

}  // namespace

AuditReport round_general_log_m(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs) {
  check_general_rounding_args(inst, frac, trials);
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  RoundSetup su = prepare_rounding(inst, frac);
  double zmax = 0.0;
  if (su.have)
    for (std::size_t i = 0; i < n; ++i)
      if (!su.is_forced[i]) zmax = std::max(zmax, frac.z[i]);
  const std::size_t m_res = su.have ? su.res.kept.size() : 0;
  const double floor_p = m_res > 0 ? 1.0 / (2.0 * (double)m_res * (double)m_res) : 0.0;
  std::vector<double> boosted(m, 0.0);
  if (su.have)
    for (int j : su.res.kept) boosted[j] = 2.0 * std::max(floor_p, frac.x[j]);
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagThreshold);

  auto trial = [&](long long t) -> TrialOutcome {
    if (!su.have) return {};
    if (zmax <= 0.0 && su.res.forced.empty()) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    double alpha = rng.uniform01();
    std::vector<char> selected(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      selected[i] = su.is_forced[i] || (zmax > 0.0 && frac.z[i] / zmax > alpha);
    std::vector<char> kept_mask(m, 0);
    for (int j : su.res.small) kept_mask[j] = 1;
    for (int j : su.res.kept)
      kept_mask[j] = boosted[j] > alpha ? 1 : rng.bernoulli(boosted[j] / alpha);
    // Certify selected voters by residual demands truncated at the demand
    // itself; candidates kept deterministically count in full first.
    std::vector<char> accepted(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected[i]) continue;
      if (su.is_forced[i]) {
        accepted[i] = 1;
        continue;
      }
      long long uhat = su.res.adjusted_utility[i] + 1;
      for (const auto& [j, u] : e.voters[i].utilities)
        if (su.is_kept[j] && boosted[j] >= alpha) uhat -= u;
      if (uhat <= 0) {
        accepted[i] = 1;
        continue;
      }
      long long got = 0;
      for (const auto& [j, u] : e.voters[i].utilities)
        if (su.is_kept[j] && boosted[j] < alpha && kept_mask[j])
          got += std::min(u, uhat);
      accepted[i] = got >= uhat;
    }
    return best_completion(inst, kept_mask, accepted);
  };
  return detail::run_trials(inst, frac.objective, frac.lp_iterations, trials, seed,
                            jobs, "round-general-logm", DeviationWitness::Mode::Core,
                            trial);
}

AuditReport round_general_log_n(const AuditInstance& inst,
                                const FractionalSolution& frac, long long trials,
                                std::uint64_t seed, int jobs) {
  check_general_rounding_args(inst, frac, trials);
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  RoundSetup su = prepare_rounding(inst, frac);
  const std::size_t n_eff = n - (su.have ? su.res.forced.size() : 0);

  // omega = floor(log2 n_eff) group intervals above the discarded bottom one.
  int omega = 0;
  while ((2ULL << omega) <= n_eff) ++omega;
  if (omega == 0) {
    AuditReport report;
    report.method = "round-general-logn";
    report.seed = seed;
    report.theta_lower = frac.objective;
    report.diagnostics.trials = 0;
    report.diagnostics.successes = 0;
    report.diagnostics.lp_iterations = frac.lp_iterations;
    report.diagnostics.notes.push_back("DEGENERATE_INTERVALS");
    return report;
  }

  double zmax = 0.0;
  if (su.have)
    for (std::size_t i = 0; i < n; ++i)
      if (!su.is_forced[i]) zmax = std::max(zmax, frac.z[i]);

  std::vector<int> level(n, 0);
  std::vector<double> level_weight(omega + 1, 0.0);
  if (su.have && zmax > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (su.is_forced[i]) continue;
      double z = frac.z[i] / zmax;
      if (z <= 1.0 / (double)n_eff) continue;
      int l = omega;  // anything above 2^(omega-1)/n_eff sits in the top interval
      for (int cand = 1; cand < omega; ++cand) {
        if (z <= (double)(1ULL << cand) / (double)n_eff) {
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
  const double big_l = (double)(1ULL << (lstar - 1)) / (double)n_eff;
  const std::uint64_t mix = splitmix64(seed ^ detail::kTagInterval);

  std::vector<char> selected(n, 0);
  std::vector<char> deterministic(m, 0);  // kept candidates bought outright
  if (su.have) {
    for (std::size_t i = 0; i < n; ++i)
      selected[i] = su.is_forced[i] || level[i] == lstar;
    for (int j : su.res.kept)
      if (frac.x[j] >= big_l / 2.0) deterministic[j] = 1;
  }

  auto trial = [&](long long t) -> TrialOutcome {
    if (!su.have) return {};
    if (level_weight[lstar] <= 0.0 && su.res.forced.empty()) return {};
    Rng rng(trial_seed(mix, (std::uint64_t)t));
    std::vector<char> kept_mask(m, 0);
    for (int j : su.res.small) kept_mask[j] = 1;
    for (int j : su.res.kept) {
      double p = 2.0 * frac.x[j] / big_l;
      if (p >= 1.0)
        kept_mask[j] = 1;
      else if (p > 0.0)
        kept_mask[j] = rng.bernoulli(p);
    }
    std::vector<char> accepted(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected[i]) continue;
      if (su.is_forced[i]) {
        accepted[i] = 1;
        continue;
      }
      long long uhat = su.res.adjusted_utility[i] + 1;
      for (const auto& [j, u] : e.voters[i].utilities)
        if (deterministic[j]) uhat -= u;
      if (uhat <= 0) {
        accepted[i] = 1;
        continue;
      }
      long long got = 0;
      for (const auto& [j, u] : e.voters[i].utilities)
        if (su.is_kept[j] && !deterministic[j] && kept_mask[j])
          got += std::min(u, uhat);
      accepted[i] = got >= uhat;
    }
    return best_completion(inst, kept_mask, accepted);
  };
  return detail::run_trials(inst, frac.objective, frac.lp_iterations, trials, seed,
                            jobs, "round-general-logn", DeviationWitness::Mode::Core,
                            trial);
}

double min_purchase_kc_lp(const std::vector<std::pair<long long, double>>& items,
                          long long demand, double epsilon,
                          const LpOptions& options) {
  if (epsilon <= 0.0) throw AuditError("MALFORMED", "epsilon must be positive");
  if (demand <= 0) return 0.0;
  if (demand > kMaxDemand)
    throw AuditError("DEMAND_TOO_LARGE", "demand exceeds the separation cap");
  long long sum_u = 0;
  for (const auto& [u, cost] : items) {
    if (u <= 0) throw AuditError("MALFORMED", "item utilities must be positive");
    if (cost < 0.0) throw AuditError("MALFORMED", "item costs must be nonnegative");
    sum_u += u;
  }
  if (sum_u < demand) return kLpInf;

  LpProblem p;
  p.sense = Sense::Minimize;
  std::vector<int> xv(items.size());
  for (std::size_t t = 0; t < items.size(); ++t)
    xv[t] = p.add_var("x_" + std::to_string(t), items[t].second, 0.0, 1.0);
  std::vector<std::pair<int, double>> base;
  for (std::size_t t = 0; t < items.size(); ++t)
    base.push_back({xv[t], (double)std::min(items[t].first, demand)});
  p.add_row("cover", Relation::Ge, (double)demand, base);

  const long long iter_cap =
      std::max(1LL, (long long)(10.0 * (double)items.size() * (0.01 / epsilon)));
  for (long long it = 0;; ++it) {
    if (it >= iter_cap)
      throw AuditError("CUT_LOOP_STALL",
                       "cutting-plane loop exceeded its iteration budget");
    LpSolution sol = solve_lp(p, options);
    if (sol.status != LpStatus::Optimal)
      throw AuditError("SOLVER_STALL", "purchase relaxation did not solve cleanly");
    std::vector<KcItemView> view;
    for (std::size_t t = 0; t < items.size(); ++t)
      view.push_back({(int)t, items[t].first, sol.primal[xv[t]]});
    std::optional<RawCut> cut = most_violated_cut(view, demand, 1.0, kCutTolerance);
    if (!cut) return sol.objective;
    std::vector<char> in_subset(items.size(), 0);
    for (int pos : cut->subset) in_subset[pos] = 1;
    std::vector<std::pair<int, double>> terms;
    for (std::size_t t = 0; t < items.size(); ++t)
      if (!in_subset[t])
        terms.push_back({xv[t], (double)std::min(items[t].first, cut->demand)});
    p.add_row("kc_" + std::to_string(it), Relation::Ge, (double)cut->demand, terms);
  }
}

AuditReport audit_core_general(const AuditInstance& inst,
                               const GeneralAuditConfig& config) {
  require_integral(inst);
  ThetaPGeneral tp = theta_p_general(inst, config.epsilon, config.lp);
  AuditReport report;
  report.method = "core-general";
  report.seed = config.seed;
  report.diagnostics.lp_iterations = tp.lp_iterations;
  report.diagnostics.cuts = tp.cuts;
  if (!tp.value.has_value()) return report;  // nobody can improve: unbounded
  report.theta_lower = tp.value;

  std::vector<AuditReport> parts;
  if (config.strategy == RoundStrategy::LogM || config.strategy == RoundStrategy::Both)
    parts.push_back(round_general_log_m(inst, *tp.solution, config.trials,
                                        config.seed, config.jobs));
  if (config.strategy == RoundStrategy::LogN || config.strategy == RoundStrategy::Both)
    parts.push_back(round_general_log_n(inst, *tp.solution, config.trials,
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
