// Exhaustive-search audits: frozen small examples, an independent in-test
// brute force on random instances, sub-core properties, fractional-core
// searches, and the error paths.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "coreaudit/gen.hpp"
#include "coreaudit/model.hpp"
#include "coreaudit/oracles.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace coreaudit;
using nlohmann::json;

namespace {

AuditInstance from_json_text(const std::string& text) {
  return parse_instance(json::parse(text));
}

// Two one-candidate blocs; W covers only the first voter.
AuditInstance two_blocs() {
  return from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["a"]},
      {"id": "v2", "approvals": ["b"]}
    ],
    "budget": 1,
    "committee": ["a"]
  })");
}

// Both voters want b; W spends the budget on a instead (k = 2, R = 1).
AuditInstance ignored_pair() {
  return from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["b"]},
      {"id": "v2", "approvals": ["b"]}
    ],
    "budget": 2,
    "committee": ["a"]
  })");
}

std::vector<std::string> committee_ids(const AuditInstance& inst, const Committee& t) {
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < t.x.size(); ++j)
    if (t.x[j] > 0.5) ids.push_back(inst.election.candidates[j].id);
  return ids;
}

// Independent reference search.  Ratios are ordered by exact cross
// multiplication so the argmin never depends on floating-point rounding.
struct NaiveBest {
  bool found = false;
  unsigned long long mask = 0;
  unsigned long long units = 0;   // total size of T (unit sizes only)
  unsigned long long sat = 0;     // satisfied voters
};

NaiveBest naive_core(const AuditInstance& inst) {
  const Election& e = inst.election;
  const int m = (int)e.num_candidates();
  const int n = (int)e.num_voters();
  NaiveBest best;
  for (unsigned long long mask = 1; mask < (1ULL << m); ++mask) {
    unsigned long long units = 0;
    for (int j = 0; j < m; ++j)
      if (mask >> j & 1) units += 1;  // unit sizes by construction
    unsigned long long sat = 0;
    for (int i = 0; i < n; ++i) {
      long long u = 0;
      for (const auto& [j, w] : e.voters[i].utilities)
        if (mask >> j & 1) u += w;
      if (u >= inst.util_w_int[i] + 1) ++sat;
    }
    if (sat == 0) continue;
    // R*units/sat < R*best.units/best.sat  <=>  units*best.sat < best.units*sat
    if (!best.found || units * best.sat < best.units * sat) {
      best = {true, mask, units, sat};
    }
  }
  return best;
}

NaiveBest naive_subcore(const AuditInstance& inst) {
  const Election& e = inst.election;
  const int m = (int)e.num_candidates();
  const int n = (int)e.num_voters();
  unsigned long long wmask = 0;
  for (int j = 0; j < m; ++j)
    if (inst.committee.x[j] > 0.5) wmask |= 1ULL << j;
  NaiveBest best;
  for (unsigned long long mask = 1; mask < (1ULL << m); ++mask) {
    unsigned long long units = 0;
    for (int j = 0; j < m; ++j)
      if (mask >> j & 1) units += 1;
    unsigned long long sat = 0;
    for (int i = 0; i < n; ++i) {
      unsigned long long amask = 0;
      for (const auto& [j, w] : e.voters[i].utilities) amask |= 1ULL << j;
      bool keeps = (amask & wmask & ~mask) == 0;
      bool adds = (amask & ~wmask & mask) != 0;
      if (keeps && adds) ++sat;
    }
    if (sat == 0) continue;
    if (!best.found || units * best.sat < best.units * sat) {
      best = {true, mask, units, sat};
    }
  }
  return best;
}

unsigned long long witness_mask(const AuditInstance& inst, const DeviationWitness& w) {
  unsigned long long mask = 0;
  for (std::size_t j = 0; j < w.committee.x.size(); ++j)
    if (w.committee.x[j] > 0.5) mask |= 1ULL << j;
  (void)inst;
  return mask;
}

}  // namespace

TEST_CASE("exact core: two blocs has ratio 2 via the ignored voter") {
  AuditInstance inst = two_blocs();
  ExactAudit a = exact_theta_core(inst);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, deviation_ratio(2.0, 1ull, 1ull));
  CHECK_EQ(a.enumerated, 3);
  REQUIRE(a.witness.has_value());
  CHECK_EQ(a.witness->voters, std::vector<int>{1});
  CHECK_EQ(committee_ids(inst, a.witness->committee), std::vector<std::string>{"b"});
  CHECK_EQ(a.witness->ratio, *a.theta);
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
}

TEST_CASE("exact core: jointly ignored pair halves the ratio") {
  AuditInstance inst = ignored_pair();
  ExactAudit a = exact_theta_core(inst);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, 0.5);
  REQUIRE(a.witness.has_value());
  CHECK_EQ(a.witness->voters, std::vector<int>({0, 1}));
  CHECK_EQ(committee_ids(inst, a.witness->committee), std::vector<std::string>{"b"});
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
}

TEST_CASE("exact core: layered gap instance p=2 gives exactly 2/3 on the shared block") {
  AuditInstance inst = gen_gap(2);
  ExactAudit a = exact_theta_core(inst);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, deviation_ratio(1.0, 2ull, 3ull));
  CHECK_EQ(a.enumerated, (1LL << 10) - 1);
  REQUIRE(a.witness.has_value());
  // All six voters defect to the shared block (listed first by the generator).
  CHECK_EQ(a.witness->voters, std::vector<int>({0, 1, 2, 3, 4, 5}));
  CHECK_EQ(committee_ids(inst, a.witness->committee),
           std::vector<std::string>({"shared0", "shared1", "shared2", "shared3"}));
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
}

TEST_CASE("exact core: matches an independent brute force on random approval instances") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    RandomGenParams p;
    p.n = 1 + (int)(seed % 6);
    p.m = 1 + (int)((seed / 2) % 6);
    p.k = 1.0 + (double)(seed % 3);
    p.density = 0.3 + 0.1 * (double)(seed % 5);
    p.rule = (seed % 2) ? RandomGenParams::Rule::Greedy : RandomGenParams::Rule::Random;
    p.seed = seed;
    AuditInstance inst = gen_random(p);
    CAPTURE(seed);
    NaiveBest ref = naive_core(inst);
    ExactAudit a = exact_theta_core(inst);
    CHECK_EQ(a.theta.has_value(), ref.found);
    if (!ref.found) continue;
    CHECK_EQ(*a.theta, deviation_ratio(inst.ratio_scale, ref.units, ref.sat));
    REQUIRE(a.witness.has_value());
    CHECK_EQ(witness_mask(inst, *a.witness), ref.mask);
    CHECK_EQ(a.witness->voters.size(), ref.sat);
    std::string why;
    CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
  }
}

TEST_CASE("exact core: general integer utilities agree with the brute force") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    RandomGenParams p;
    p.n = 1 + (int)(seed % 5);
    p.m = 1 + (int)(seed % 6);
    p.k = 1.0 + (double)(seed % 2);
    p.general = true;
    p.max_u = 3;
    p.density = 0.6;
    p.size_lo = p.size_hi = 1.0;  // unit sizes keep the reference math integral
    p.seed = seed;
    AuditInstance inst = gen_random(p);
    CAPTURE(seed);
    NaiveBest ref = naive_core(inst);
    ExactAudit a = exact_theta_core(inst);
    CHECK_EQ(a.theta.has_value(), ref.found);
    if (!ref.found) continue;
    CHECK_EQ(*a.theta, deviation_ratio(inst.ratio_scale, ref.units, ref.sat));
    REQUIRE(a.witness.has_value());
    CHECK_EQ(witness_mask(inst, *a.witness), ref.mask);
  }
}

TEST_CASE("exact subcore: coincides with core on the two-bloc instance") {
  AuditInstance inst = two_blocs();
  ExactAudit c = exact_theta_core(inst);
  ExactAudit s = exact_theta_subcore(inst);
  REQUIRE(s.theta.has_value());
  CHECK_EQ(*s.theta, *c.theta);
  REQUIRE(s.witness.has_value());
  CHECK_EQ(s.witness->voters, std::vector<int>{1});
  CHECK_EQ(committee_ids(inst, s.witness->committee), std::vector<std::string>{"b"});
  CHECK_EQ(s.witness->mode, DeviationWitness::Mode::SubCore);
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *s.witness, &why), why);
}

TEST_CASE("exact subcore: no deviation exists when W holds every approved candidate") {
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["a"]},
      {"id": "v2", "approvals": ["b"]}
    ],
    "budget": 2,
    "committee": ["a", "b"]
  })");
  ExactAudit s = exact_theta_subcore(inst);
  CHECK_FALSE(s.theta.has_value());
  CHECK_FALSE(s.witness.has_value());
  CHECK_EQ(s.enumerated, 3);
  // The plain core audit also finds nothing: everyone already gets everything.
  CHECK_FALSE(exact_theta_core(inst).theta.has_value());
}

TEST_CASE("exact subcore: keeping W-approved candidates can cost strictly more") {
  // v1 and v2 each hold one seat (a resp. b) and share two outside options.
  // The core deviation {x,y} drops the seats entirely (ratio 1); a sub-core
  // deviation must carry both seats to satisfy both voters (ratio 3/2).
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1},
                   {"id": "x", "size": 1}, {"id": "y", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["a", "x", "y"]},
      {"id": "v2", "approvals": ["b", "x", "y"]}
    ],
    "budget": 2,
    "committee": ["a", "b"]
  })");
  ExactAudit c = exact_theta_core(inst);
  ExactAudit s = exact_theta_subcore(inst);
  REQUIRE(c.theta.has_value());
  REQUIRE(s.theta.has_value());
  CHECK_EQ(*c.theta, 1.0);
  CHECK_EQ(committee_ids(inst, c.witness->committee), std::vector<std::string>({"x", "y"}));
  CHECK_EQ(*s.theta, 1.5);
  CHECK_EQ(committee_ids(inst, s.witness->committee),
           std::vector<std::string>({"a", "b", "x"}));
  CHECK_GT(*s.theta, *c.theta);
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *s.witness, &why), why);
}

TEST_CASE("exact subcore: never below the core value, and matches its own brute force") {
  for (std::uint64_t seed = 200; seed < 240; ++seed) {
    RandomGenParams p;
    p.n = 1 + (int)(seed % 6);
    p.m = 2 + (int)(seed % 5);
    p.k = 1.0 + (double)(seed % 3);
    p.density = 0.4 + 0.1 * (double)(seed % 4);
    p.seed = seed;
    AuditInstance inst = gen_random(p);
    CAPTURE(seed);
    NaiveBest ref = naive_subcore(inst);
    ExactAudit s = exact_theta_subcore(inst);
    CHECK_EQ(s.theta.has_value(), ref.found);
    if (ref.found) {
      CHECK_EQ(*s.theta, deviation_ratio(inst.ratio_scale, ref.units, ref.sat));
      CHECK_EQ(witness_mask(inst, *s.witness), ref.mask);
      std::string why;
      CHECK_MESSAGE(check_witness(inst, *s.witness, &why), why);
    }
    ExactAudit c = exact_theta_core(inst);
    if (c.theta.has_value() && s.theta.has_value()) CHECK_GE(*s.theta, *c.theta);
    if (!c.theta.has_value()) CHECK_FALSE(s.theta.has_value());
  }
}

TEST_CASE("exact subcore: equals core exactly when every voter approves at most two") {
  Rng rng(0xabcdef12345ull);
  int built = 0;
  for (std::uint64_t trial = 0; built < 25 && trial < 200; ++trial) {
    int m = 3 + (int)rng.below(4);
    int n = 1 + (int)rng.below(6);
    json cands = json::array();
    for (int j = 0; j < m; ++j)
      cands.push_back({{"id", "c" + std::to_string(j)}, {"size", 1}});
    json voters = json::array();
    for (int i = 0; i < n; ++i) {
      int deg = 1 + (int)rng.below(2);
      std::set<int> picks;
      while ((int)picks.size() < deg) picks.insert((int)rng.below((std::uint64_t)m));
      json appr = json::array();
      for (int j : picks) appr.push_back("c" + std::to_string(j));
      voters.push_back({{"id", "v" + std::to_string(i)}, {"approvals", appr}});
    }
    int k = 1 + (int)rng.below((std::uint64_t)m);
    std::set<int> seats;
    while ((int)seats.size() < k) seats.insert((int)rng.below((std::uint64_t)m));
    json committee = json::array();
    for (int j : seats) committee.push_back("c" + std::to_string(j));
    json inst_json = {{"candidates", cands},
                      {"voters", voters},
                      {"budget", k},
                      {"committee", committee}};
    AuditInstance inst = parse_instance(inst_json);
    ExactAudit c = exact_theta_core(inst);
    ExactAudit s = exact_theta_subcore(inst);
    CAPTURE(trial);
    CHECK_EQ(c.theta.has_value(), s.theta.has_value());
    if (c.theta.has_value()) {
      CHECK_EQ(*c.theta, *s.theta);  // exact: both sides canonicalize the ratio
      ++built;
    }
  }
  CHECK_GE(built, 25);
}

TEST_CASE("exact fractional core: ignored pair at full improvement step") {
  AuditInstance inst = ignored_pair();
  ExactAudit a = exact_theta_fractional_core(inst, 1.0);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, doctest::Approx(0.5).epsilon(1e-9));
  CHECK_EQ(a.enumerated, 3);
  REQUIRE(a.witness.has_value());
  CHECK_EQ(a.witness->mode, DeviationWitness::Mode::FractionalCore);
  CHECK_EQ(a.witness->eta, 1.0);
  CHECK_EQ(a.witness->voters, std::vector<int>({0, 1}));
  REQUIRE_EQ(a.witness->committee.x.size(), 2);
  CHECK_EQ(a.witness->committee.x[0], doctest::Approx(0.0));
  CHECK_EQ(a.witness->committee.x[1], doctest::Approx(1.0));
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
}

TEST_CASE("exact fractional core: half improvement step needs half the spend") {
  AuditInstance inst = ignored_pair();
  ExactAudit a = exact_theta_fractional_core(inst, 0.5);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, doctest::Approx(0.25).epsilon(1e-9));
  REQUIRE(a.witness.has_value());
  CHECK_EQ(a.witness->committee.x[1], doctest::Approx(0.5));
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
}

TEST_CASE("exact fractional core: works on a fractional audited committee") {
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["b"]},
      {"id": "v2", "approvals": ["b"]}
    ],
    "budget": 2,
    "committee": {"a": 0.5}
  })");
  ExactAudit a = exact_theta_fractional_core(inst, 1.0);
  REQUIRE(a.theta.has_value());
  CHECK_EQ(*a.theta, doctest::Approx(0.5).epsilon(1e-9));
  // The integral searches refuse fractional committees outright.
  CHECK_THROWS_WITH_AS(exact_theta_core(inst), doctest::Contains("MODE_MISMATCH"),
                       AuditError);
  CHECK_THROWS_WITH_AS(exact_theta_subcore(inst), doctest::Contains("MODE_MISMATCH"),
                       AuditError);
}

TEST_CASE("exact fractional core: unbounded when every voter is already topped out") {
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["a"]},
      {"id": "v2", "approvals": ["b"]}
    ],
    "budget": 2,
    "committee": ["a", "b"]
  })");
  ExactAudit a = exact_theta_fractional_core(inst, 1.0);
  CHECK_FALSE(a.theta.has_value());
  CHECK_FALSE(a.witness.has_value());
}

TEST_CASE("exact fractional core: tightening the step never lowers the ratio") {
  const double etas[] = {0.25, 0.5, 1.0, 2.0};
  for (std::uint64_t seed = 300; seed < 312; ++seed) {
    RandomGenParams p;
    p.n = 1 + (int)(seed % 4);
    p.m = 2 + (int)(seed % 4);
    p.k = 1.0 + (double)(seed % 2);
    p.density = 0.5;
    p.seed = seed;
    AuditInstance inst = gen_random(p);
    CAPTURE(seed);
    std::optional<double> prev;  // value at the next-smaller eta
    bool first = true;
    for (double eta : etas) {
      ExactAudit a = exact_theta_fractional_core(inst, eta);
      if (a.theta.has_value()) {
        if (!first) {
          // Bounded here implies bounded at the smaller eta, and weakly larger.
          REQUIRE(prev.has_value());
          CHECK_LE(*prev, *a.theta + 1e-9);
        }
        if (a.witness.has_value()) {
          std::string why;
          CHECK_MESSAGE(check_witness(inst, *a.witness, &why), why);
        }
      }
      prev = a.theta;
      first = false;
    }
  }
}

TEST_CASE("oracle budgets and argument validation") {
  AuditInstance inst = two_blocs();
  OracleBudget tiny;
  tiny.max_committees = 2;  // 2^2 committees exceed this
  CHECK_THROWS_WITH_AS(exact_theta_core(inst, tiny), doctest::Contains("ORACLE_BUDGET"),
                       AuditError);
  CHECK_THROWS_WITH_AS(exact_theta_subcore(inst, tiny),
                       doctest::Contains("ORACLE_BUDGET"), AuditError);
  OracleBudget tiny_voters;
  tiny_voters.max_voter_subsets = 2;
  CHECK_THROWS_WITH_AS(exact_theta_fractional_core(inst, 1.0, tiny_voters),
                       doctest::Contains("ORACLE_BUDGET"), AuditError);
  OracleBudget bad;
  bad.max_committees = 0;
  CHECK_THROWS_WITH_AS(exact_theta_core(inst, bad), doctest::Contains("MALFORMED"),
                       AuditError);
  CHECK_THROWS_WITH_AS(exact_theta_fractional_core(inst, 0.0),
                       doctest::Contains("MALFORMED"), AuditError);
  CHECK_THROWS_WITH_AS(exact_theta_fractional_core(inst, -1.0),
                       doctest::Contains("MALFORMED"), AuditError);
}

TEST_CASE("oracle time cap interrupts a large enumeration") {
  RandomGenParams p;
  p.n = 4;
  p.m = 22;
  p.k = 3.0;
  p.density = 0.4;
  p.seed = 7;
  AuditInstance inst = gen_random(p);
  OracleBudget b;
  b.time_cap_s = 1e-9;
  CHECK_THROWS_WITH_AS(exact_theta_core(inst, b), doctest::Contains("ORACLE_BUDGET"),
                       AuditError);
}

TEST_CASE("oracle results do not depend on the worker count") {
  AuditInstance inst = gen_gap(2);
  ExactAudit serial = exact_theta_core(inst, {}, 1);
  ExactAudit wide = exact_theta_core(inst, {}, 4);
  REQUIRE(wide.theta.has_value());
  CHECK_EQ(*serial.theta, *wide.theta);
  CHECK_EQ(serial.enumerated, wide.enumerated);
  CHECK_EQ(serial.witness->voters, wide.witness->voters);
  CHECK_EQ(witness_mask(inst, *serial.witness), witness_mask(inst, *wide.witness));

  ExactAudit sub_serial = exact_theta_subcore(inst, {}, 1);
  ExactAudit sub_wide = exact_theta_subcore(inst, {}, 4);
  CHECK_EQ(sub_serial.theta.has_value(), sub_wide.theta.has_value());
  if (sub_serial.theta.has_value()) CHECK_EQ(*sub_serial.theta, *sub_wide.theta);

  AuditInstance pair = ignored_pair();
  ExactAudit f1 = exact_theta_fractional_core(pair, 1.0, {}, 1);
  ExactAudit f2 = exact_theta_fractional_core(pair, 1.0, {}, 4);
  CHECK_EQ(*f1.theta, *f2.theta);
  CHECK_EQ(f1.witness->committee.x, f2.witness->committee.x);
}
