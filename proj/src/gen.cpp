#include "coreaudit/gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace coreaudit {

namespace {

AuditInstance finish(Election e, Committee w) {
  e.rebuild_index();
  return AuditInstance::make(std::move(e), std::move(w));
}

}  // namespace

AuditInstance gen_gap(int p) {
  if (p < 1) throw AuditError("MALFORMED", "gap parameter must be at least 1");
  Election e;
  long long n = (1LL << (p + 1)) - 2;

  // Candidate order: the shared block first, then per-group blocks, then
  // dummies.  Exact searches scan bitmasks in ascending order, so this puts
  // the canonical all-voter deviation (the whole shared block) first among
  // the minimizers.
  std::vector<int> shared;
  for (long long i = 0; i < (1LL << p); ++i) {
    shared.push_back((int)e.candidates.size());
    e.candidates.push_back({"shared" + std::to_string(i), 1.0});
  }
  std::vector<std::vector<int>> group_block(p + 1);
  for (int l = 1; l <= p; ++l) {
    long long sz = (1LL << l) - 1;
    for (long long i = 0; i < sz; ++i) {
      group_block[l].push_back((int)e.candidates.size());
      e.candidates.push_back({"g" + std::to_string(l) + "_" + std::to_string(i), 1.0});
    }
  }
  std::vector<int> dummies;
  for (int i = 0; i < p; ++i) {
    dummies.push_back((int)e.candidates.size());
    e.candidates.push_back({"_dummy" + std::to_string(i), 1.0});
  }

  for (int l = 1; l <= p; ++l) {
    long long group_size = 1LL << l;
    for (long long i = 0; i < group_size; ++i) {
      Voter v;
      v.id = "v" + std::to_string(l) + "_" + std::to_string(i);
      for (int j : group_block[l]) v.utilities.push_back({j, 1});
      for (int j : shared) v.utilities.push_back({j, 1});
      std::sort(v.utilities.begin(), v.utilities.end());
      e.voters.push_back(std::move(v));
    }
  }
  e.budget = (double)n;

  Committee w;
  w.x.assign(e.candidates.size(), 0.0);
  for (int l = 1; l <= p; ++l)
    for (int j : group_block[l]) w.x[j] = 1.0;
  for (int j : dummies) w.x[j] = 1.0;
  return finish(std::move(e), std::move(w));
}

AuditInstance gen_coverage(int q, int d, const std::vector<std::vector<int>>& sets,
                           long long beta_num, long long beta_den) {
  if (q < 2 || d < 1 || sets.empty())
    throw AuditError("MALFORMED", "coverage generator needs q >= 2, d >= 1 and sets");
  if (beta_num <= 0 || beta_den <= 0 || beta_num > beta_den)
    throw AuditError("MALFORMED", "beta must be a rational in (0,1]");
  long long universe = (long long)q * d;
  for (auto& s : sets) {
    if ((long long)s.size() != d)
      throw AuditError("MALFORMED", "every set must have exactly d elements");
    for (int el : s)
      if (el < 0 || el >= universe)
        throw AuditError("MALFORMED", "set element outside the universe");
  }
  auto scaled = [&](long long value) {
    long long num = beta_num * value;
    if (num % beta_den != 0)
      throw AuditError("NON_INTEGER_GROUP",
                       "beta-scaled group size is not an integer");
    return num / beta_den;
  };
  long long backers = scaled(universe);               // beta * q * d
  long long dummy_cands = scaled((q - 1) * universe); // beta * (q-1) * q * d
  if (backers * (q - 1) != dummy_cands)
    throw AuditError("NON_INTEGER_GROUP",
                     "dummy block does not split evenly across backers");

  Election e;
  std::vector<int> mains;
  for (std::size_t t = 0; t < sets.size(); ++t) {
    mains.push_back((int)e.candidates.size());
    e.candidates.push_back({"main" + std::to_string(t), 1.0});
  }
  std::vector<int> dummies;
  for (long long i = 0; i < dummy_cands; ++i) {
    dummies.push_back((int)e.candidates.size());
    e.candidates.push_back({"_dummy" + std::to_string(i), 1.0});
  }

  // Backers: q-1 private dummies plus every main candidate.
  for (long long b = 0; b < backers; ++b) {
    Voter v;
    v.id = "backer" + std::to_string(b);
    for (long long i = 0; i < q - 1; ++i)
      v.utilities.push_back({dummies[b * (q - 1) + i], 1});
    for (int j : mains) v.utilities.push_back({j, 1});
    std::sort(v.utilities.begin(), v.utilities.end());
    e.voters.push_back(std::move(v));
  }
  // Element voters approve the mains whose sets contain them.
  for (long long el = 0; el < universe; ++el) {
    Voter v;
    v.id = "elem" + std::to_string(el);
    for (std::size_t t = 0; t < sets.size(); ++t)
      if (std::find(sets[t].begin(), sets[t].end(), (int)el) != sets[t].end())
        v.utilities.push_back({mains[t], 1});
    e.voters.push_back(std::move(v));
  }
  long long n = (long long)q * (q - 1) * d * d;
  long long have = (long long)e.voters.size();
  if (n < have)
    throw AuditError("MALFORMED", "voter count formula underflows the groups");
  for (long long i = 0; i < n - have; ++i) {
    Voter v;
    v.id = "_dummy_v" + std::to_string(i);
    e.voters.push_back(std::move(v));
  }
  e.budget = (double)((long long)(q - 1) * q * d);

  Committee w;
  w.x.assign(e.candidates.size(), 0.0);
  for (int j : dummies) w.x[j] = 1.0;
  return finish(std::move(e), std::move(w));
}

AuditInstance gen_random(const RandomGenParams& p) {
  if (p.n < 1 || p.m < 1 || !(p.k > 0.0))
    throw AuditError("MALFORMED", "random generator needs n,m >= 1 and k > 0");
  if (!(p.density > 0.0) || p.density > 1.0)
    throw AuditError("MALFORMED", "density must lie in (0,1]");
  if (p.general && (p.max_u < 1 || p.size_lo <= 0.0 || p.size_hi < p.size_lo))
    throw AuditError("MALFORMED", "general mode needs max_u >= 1 and a valid size range");
  Rng rng(splitmix64(p.seed ^ 0x67656e72ull));

  Election e;
  for (int j = 0; j < p.m; ++j) {
    double size = 1.0;
    if (p.general) {
      size = p.size_lo + (p.size_hi - p.size_lo) * rng.uniform01();
      size = std::round(size * 1000.0) / 1000.0;  // keep files tidy
      if (size <= 0.0) size = p.size_lo;
    }
    e.candidates.push_back({"c" + std::to_string(j), size});
  }
  for (int i = 0; i < p.n; ++i) {
    Voter v;
    v.id = "v" + std::to_string(i);
    v.approval_input = !p.general;
    for (int j = 0; j < p.m; ++j) {
      bool hit = rng.uniform01() < p.density;
      if (!hit) continue;
      long long u = p.general ? 1 + (long long)rng.below((std::uint64_t)p.max_u) : 1;
      v.utilities.push_back({j, u});
    }
    e.voters.push_back(std::move(v));
  }
  e.budget = p.k;

  Committee w;
  w.x.assign(e.candidates.size(), 0.0);
  double used = 0.0;
  auto fits = [&](int j) { return used + e.candidates[j].size <= p.k + 1e-9; };
  bool any_fits = false;
  for (int j = 0; j < p.m; ++j)
    if (e.candidates[j].size <= p.k + 1e-9) any_fits = true;
  if (!any_fits)
    throw AuditError("BUDGET_EXCEEDED", "no candidate fits within the budget");

  if (p.rule == RandomGenParams::Rule::Greedy) {
    std::vector<long long> score(p.m, 0);
    for (auto& v : e.voters)
      for (auto& [j, u] : v.utilities) score[j] += u;
    std::vector<char> taken(p.m, 0);
    while (true) {
      int best = -1;
      for (int j = 0; j < p.m; ++j) {
        if (taken[j] || !fits(j)) continue;
        if (best < 0 || score[j] > score[best]) best = j;
      }
      if (best < 0) break;
      taken[best] = 1;
      w.x[best] = 1.0;
      used += e.candidates[best].size;
    }
  } else {
    std::vector<int> order(p.m);
    std::iota(order.begin(), order.end(), 0);
    for (int j = p.m - 1; j > 0; --j)
      std::swap(order[j], order[rng.below((std::uint64_t)j + 1)]);
    for (int j : order) {
      if (!fits(j)) continue;
      w.x[j] = 1.0;
      used += e.candidates[j].size;
    }
  }
  return finish(std::move(e), std::move(w));
}

}  // namespace coreaudit
