#include "coreaudit/prices.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coreaudit/core_approval.hpp"
#include "coreaudit/kc_general.hpp"
#include "coreaudit/report.hpp"

namespace coreaudit {

namespace {

constexpr double kRatioTol = 1e-6;
constexpr double kBudgetTol = 1e-8;

void require_approval_instance(const AuditInstance& inst, const char* what) {
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH",
                     std::string(what) + " needs an integral committee");
  if (!inst.election.approval_compatible())
    throw AuditError("MODE_MISMATCH",
                     std::string(what) + " needs unit sizes and 0/1 utilities");
}

double price_at(const PriceSystem& ps, int voter, int cand) {
  const auto& row = ps.prices[voter];
  auto it = row.find(cand);
  return it == row.end() ? 0.0 : it->second;
}

// First violated condition of a price system, as (error code, message), or
// nothing when the system checks out.  check_prices and the internal
// extraction guards share this.
std::optional<std::pair<const char*, std::string>> price_violation(
    const AuditInstance& inst, const PriceSystem& ps) {
  using V = std::optional<std::pair<const char*, std::string>>;
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  const double R = inst.ratio_scale;

  if (ps.prices.size() != n)
    return V{{"MALFORMED", "price table does not have one row per voter"}};
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, pj] : ps.prices[i]) {
      if (j < 0 || (std::size_t)j >= m)
        return V{{"MALFORMED", "price entry references an unknown candidate"}};
      if (pj < -1e-12)
        return V{{"MALFORMED", "price entry is negative"}};
    }

  // Per-candidate budget: no candidate may collect more than the population
  // share R in total prices.
  for (std::size_t j = 0; j < m; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += price_at(ps, (int)i, (int)j);
    if (total > R + kBudgetTol)
      return V{{"OVERPAID_CANDIDATE",
                "candidate " + e.candidates[j].id + " collects " +
                    std::to_string(total) + " which exceeds the per-candidate budget " +
                    std::to_string(R)}};
  }

  switch (ps.mode) {
    case PriceSystem::Mode::LindahlApproval: {
      if (!inst.integral() || !e.approval_compatible())
        return V{{"MALFORMED", "approval price system on a non-approval instance"}};
      for (std::size_t i = 0; i < n; ++i) {
        const long long need = inst.util_w_int[i] + 1;
        const auto& approvals = e.voters[i].utilities;
        if ((long long)approvals.size() < need) continue;  // cannot improve
        std::vector<double> costs;
        for (const auto& [j, u] : approvals) costs.push_back(price_at(ps, (int)i, j));
        std::sort(costs.begin(), costs.end());
        double cheapest = 0.0;
        for (long long t = 0; t < need; ++t) cheapest += costs[t];
        if (cheapest < ps.theta - kRatioTol)
          return V{{"RATIO_MISMATCH",
                    "voter " + e.voters[i].id + " buys an improving set for " +
                        std::to_string(cheapest) + " below the certified ratio " +
                        std::to_string(ps.theta)}};
      }
      break;
    }
    case PriceSystem::Mode::Weak: {
      if (!inst.integral() || !e.approval_compatible())
        return V{{"MALFORMED", "weak price system on a non-approval instance"}};
      for (std::size_t i = 0; i < n; ++i) {
        double inside = 0.0;
        for (const auto& [j, u] : e.voters[i].utilities)
          if (inst.committee.x[j] >= 0.5) inside += price_at(ps, (int)i, j);
        for (const auto& [j, u] : e.voters[i].utilities) {
          if (inst.committee.x[j] >= 0.5) continue;
          double total = inside + price_at(ps, (int)i, j);
          if (total < ps.theta - kRatioTol)
            return V{{"RATIO_MISMATCH",
                      "voter " + e.voters[i].id + " extends the committee with " +
                          e.candidates[j].id + " for " + std::to_string(total) +
                          " below the certified ratio " + std::to_string(ps.theta)}};
        }
      }
      break;
    }
    case PriceSystem::Mode::LindahlFractional: {
      if (ps.eta <= 0.0)
        return V{{"MALFORMED", "fractional price system needs a positive improvement step"}};
      if (ps.lambda.size() != n || ps.alpha.size() != n)
        return V{{"MALFORMED", "fractional price system is missing multipliers"}};
      for (std::size_t i = 0; i < n; ++i) {
        double alpha_sum = 0.0;
        for (const auto& [j, u] : e.voters[i].utilities) {
          auto it = ps.alpha[i].find(j);
          double a = it == ps.alpha[i].end() ? 0.0 : it->second;
          alpha_sum += a;
          double lhs = (double)u * ps.lambda[i] - a;
          double rhs = price_at(ps, (int)i, j) * e.candidates[j].size;
          if (lhs > rhs + kRatioTol)
            return V{{"RATIO_MISMATCH",
                      "price cap row violated for voter " + e.voters[i].id +
                          " and candidate " + e.candidates[j].id}};
        }
        double entitled = (inst.util_w[i] + ps.eta) * ps.lambda[i] - alpha_sum;
        if (entitled < ps.theta - kRatioTol)
          return V{{"RATIO_MISMATCH",
                    "voter " + e.voters[i].id + " is entitled to only " +
                        std::to_string(entitled) + " below the certified ratio " +
                        std::to_string(ps.theta)}};
      }
      break;
    }
    case PriceSystem::Mode::LindahlInteger: {
      if (!inst.integral())
        return V{{"MALFORMED", "integer price system needs an integral committee"}};
      for (std::size_t i = 0; i < n; ++i) {
        const long long demand = inst.util_w_int[i] + 1;
        std::vector<std::pair<long long, double>> items;
        for (const auto& [j, u] : e.voters[i].utilities)
          items.push_back({u, price_at(ps, (int)i, j) * e.candidates[j].size});
        double cheapest = min_purchase_kc_lp(items, demand);
        if (cheapest < ps.theta - kRatioTol)
          return V{{"RATIO_MISMATCH",
                    "voter " + e.voters[i].id + " buys an improving bundle for " +
                        std::to_string(cheapest) + " below the certified ratio " +
                        std::to_string(ps.theta)}};
      }
      break;
    }
  }
  return std::nullopt;
}

void enforce_prices(const AuditInstance& inst, const PriceSystem& ps) {
  if (auto v = price_violation(inst, ps)) throw AuditError(v->first, v->second);
}

bool approval_improvable(const AuditInstance& inst) {
  for (std::size_t i = 0; i < inst.num_voters(); ++i) {
    long long deg = (long long)inst.election.voters[i].utilities.size();
    if (deg >= inst.util_w_int[i] + 1) return true;
  }
  return false;
}

}  // namespace

bool check_prices(const AuditInstance& inst, const PriceSystem& ps,
                  std::string* why) {
  if (auto v = price_violation(inst, ps)) {
    if (why) *why = v->second;
    return false;
  }
  return true;
}

std::optional<std::pair<std::string, std::string>> price_system_violation(
    const AuditInstance& inst, const PriceSystem& ps) {
  if (auto v = price_violation(inst, ps))
    return std::make_pair(std::string(v->first), v->second);
  return std::nullopt;
}

PriceAudit lindahl_ratio_approval(const AuditInstance& inst,
                                  const LpOptions& options) {
  require_approval_instance(inst, "the approval price audit");
  PriceAudit out;
  if (!approval_improvable(inst)) return out;  // vacuous: unbounded ratio

  const Election& e = inst.election;
  LpProblem p = build_core_lp(inst);
  LpSolution sol = solve_lp(p, options);
  if (sol.status != LpStatus::Optimal)
    throw AuditError("SOLVER_STALL", "price relaxation did not solve cleanly");
  out.lp_iterations = sol.iterations;

  // Row layout of the relaxation, in construction order: one cover row per
  // voter, then one y <= x cap row per valued (voter, candidate) pair in
  // voter-major candidate-ascending order, then the y <= z rows, then the
  // activation row.  The prices are the (negated) shadow prices of the
  // y <= x block.
  PriceSystem ps;
  ps.mode = PriceSystem::Mode::LindahlApproval;
  ps.theta = sol.objective;
  ps.prices.assign(e.num_voters(), {});
  std::size_t row = e.num_voters();
  for (std::size_t i = 0; i < e.num_voters(); ++i) {
    // A voter who cannot improve at all has a vacuous affordability
    // condition; its dual row is degenerate, so pin those prices to zero
    // for a deterministic system (this can only relax the budget rows).
    bool improvable =
        (long long)e.voters[i].utilities.size() >= inst.util_w_int[i] + 1;
    for (const auto& [j, u] : e.voters[i].utilities) {
      double price = std::max(0.0, -sol.dual[row++]);
      ps.prices[i][j] = improvable ? price : 0.0;
    }
  }
  enforce_prices(inst, ps);

  out.theta = sol.objective;
  out.prices = std::move(ps);
  return out;
}

PriceAudit lindahl_fractional(const AuditInstance& inst, double eta,
                              const LpOptions& options) {
  if (eta <= 0.0)
    throw AuditError("MALFORMED", "the improvement step must be positive");
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  const double R = inst.ratio_scale;
  PriceAudit out;

  bool improvable = false;
  for (std::size_t i = 0; i < n && !improvable; ++i) {
    double total = 0.0;
    for (const auto& [j, u] : e.voters[i].utilities) total += (double)u;
    if (total >= inst.util_w[i] + eta - 1e-9) improvable = true;
  }
  if (!improvable) return out;  // nobody can gain eta even with everything

  LpProblem p;
  p.sense = Sense::Maximize;
  const int th = p.add_var("theta", 1.0);
  std::vector<int> lv(n);
  for (std::size_t i = 0; i < n; ++i) lv[i] = p.add_var("lambda_" + e.voters[i].id);
  std::vector<std::map<int, int>> av(n), pv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, u] : e.voters[i].utilities) {
      av[i][j] = p.add_var("alpha_" + e.voters[i].id + "_" + e.candidates[j].id);
      pv[i][j] = p.add_var("p_" + e.voters[i].id + "_" + e.candidates[j].id);
    }
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, u] : e.voters[i].utilities)
      p.add_row("pair_" + e.voters[i].id + "_" + e.candidates[j].id, Relation::Le,
                0.0,
                {{lv[i], (double)u}, {av[i][j], -1.0}, {pv[i][j], -e.candidates[j].size}});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> terms;
    terms.push_back({lv[i], inst.util_w[i] + eta});
    for (const auto& [j, a] : av[i]) terms.push_back({a, -1.0});
    terms.push_back({th, -1.0});
    p.add_row("entitle_" + e.voters[i].id, Relation::Ge, 0.0, terms);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::pair<int, double>> terms;
    for (std::size_t i = 0; i < n; ++i) {
      auto it = pv[i].find((int)j);
      if (it != pv[i].end()) terms.push_back({it->second, 1.0});
    }
    if (terms.empty()) continue;  // nobody values this candidate: no price mass
    p.add_row("budget_" + e.candidates[j].id, Relation::Le, R, terms);
  }

  LpSolution sol = solve_lp(p, options);
  if (sol.status != LpStatus::Optimal)
    throw AuditError("SOLVER_STALL", "price relaxation did not solve cleanly");
  out.lp_iterations = sol.iterations;

  PriceSystem ps;
  ps.mode = PriceSystem::Mode::LindahlFractional;
  ps.eta = eta;
  ps.theta = sol.primal[th];
  ps.prices.assign(n, {});
  ps.alpha.assign(n, {});
  ps.lambda.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    ps.lambda[i] = std::max(0.0, sol.primal[lv[i]]);
    for (const auto& [j, var] : pv[i]) ps.prices[i][j] = std::max(0.0, sol.primal[var]);
    for (const auto& [j, var] : av[i]) ps.alpha[i][j] = std::max(0.0, sol.primal[var]);
  }
  enforce_prices(inst, ps);

  out.theta = sol.objective;
  out.prices = std::move(ps);
  return out;
}

PriceBracket lindahl_integer_general(const AuditInstance& inst, double epsilon,
                                     const LpOptions& options) {
  if (!inst.integral())
    throw AuditError("MODE_MISMATCH",
                     "the integer price audit needs an integral committee");
  PriceBracket out;
  ThetaPGeneral tp = kc_relaxation_unrestricted(inst, epsilon, options);
  out.lp_iterations = tp.lp_iterations;
  out.cuts = tp.cuts;
  if (!tp.value.has_value()) return out;  // vacuous: unbounded ratio

  const Election& e = inst.election;
  PriceSystem ps;
  ps.mode = PriceSystem::Mode::LindahlInteger;
  ps.theta = *tp.value;
  ps.prices.assign(e.num_voters(), {});
  for (std::size_t i = 0; i < e.num_voters(); ++i)
    for (const auto& [j, d] : tp.solution->cap_duals[i])
      ps.prices[i][j] = std::max(0.0, d / e.candidates[j].size);
  enforce_prices(inst, ps);

  out.lower = *tp.value;
  out.upper = (2.0 + epsilon) * *tp.value;
  out.prices = std::move(ps);
  return out;
}

PriceAudit weak_priceability(const AuditInstance& inst, const LpOptions& options) {
  require_approval_instance(inst, "the weak price audit");
  const Election& e = inst.election;
  const std::size_t n = e.num_voters();
  const std::size_t m = e.num_candidates();
  const double R = inst.ratio_scale;
  PriceAudit out;

  bool anyone_extends = false;
  for (std::size_t i = 0; i < n && !anyone_extends; ++i)
    for (const auto& [j, u] : e.voters[i].utilities)
      if (inst.committee.x[j] < 0.5) {
        anyone_extends = true;
        break;
      }
  if (!anyone_extends) return out;  // committee saturates every approval set

  LpProblem p;
  p.sense = Sense::Maximize;
  const int th = p.add_var("theta", 1.0);
  std::vector<std::map<int, int>> pv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, u] : e.voters[i].utilities)
      pv[i][j] = p.add_var("p_" + e.voters[i].id + "_" + e.candidates[j].id);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::pair<int, double>> terms;
    for (std::size_t i = 0; i < n; ++i) {
      auto it = pv[i].find((int)j);
      if (it != pv[i].end()) terms.push_back({it->second, 1.0});
    }
    if (terms.empty()) continue;
    p.add_row("budget_" + e.candidates[j].id, Relation::Le, R, terms);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> inside;
    for (const auto& [j, var] : pv[i])
      if (inst.committee.x[j] >= 0.5) inside.push_back({var, 1.0});
    for (const auto& [j, var] : pv[i]) {
      if (inst.committee.x[j] >= 0.5) continue;
      std::vector<std::pair<int, double>> terms = inside;
      terms.push_back({var, 1.0});
      terms.push_back({th, -1.0});
      p.add_row("extend_" + e.voters[i].id + "_" + e.candidates[j].id, Relation::Ge,
                0.0, terms);
    }
  }

  LpSolution sol = solve_lp(p, options);
  if (sol.status != LpStatus::Optimal)
    throw AuditError("SOLVER_STALL", "price relaxation did not solve cleanly");
  out.lp_iterations = sol.iterations;

  PriceSystem ps;
  ps.mode = PriceSystem::Mode::Weak;
  ps.theta = sol.primal[th];
  ps.prices.assign(n, {});
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, var] : pv[i]) ps.prices[i][j] = std::max(0.0, sol.primal[var]);
  enforce_prices(inst, ps);

  out.theta = sol.objective;
  out.prices = std::move(ps);
  return out;
}

}  // namespace coreaudit
