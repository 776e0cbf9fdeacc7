// Superset-deviation audits: the relaxation, its duality with weak
// priceability, both roundings with exact re-validation, the equality with
// the plain deviation audit on degree-2 instances, and the composed entry.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "coreaudit/core_approval.hpp"
#include "coreaudit/gen.hpp"
#include "coreaudit/model.hpp"
#include "coreaudit/oracles.hpp"
#include "coreaudit/prices.hpp"
#include "coreaudit/subcore.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace coreaudit;
using nlohmann::json;

namespace {

AuditInstance from_json_text(const std::string& text) {
  return parse_instance(json::parse(text));
}

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

// Deterministic random approval instance with every voter approving at most
// `max_deg` candidates.
AuditInstance bounded_degree_instance(std::uint64_t seed, int n, int m, int max_deg,
                                      int k) {
  std::uint64_t state = seed;
  auto next = [&]() { return state = splitmix64(state); };
  json j;
  j["candidates"] = json::array();
  for (int c = 0; c < m; ++c)
    j["candidates"].push_back({{"id", "c" + std::to_string(c)}, {"size", 1}});
  j["voters"] = json::array();
  for (int i = 0; i < n; ++i) {
    int deg = 1 + (int)(next() % (std::uint64_t)max_deg);
    std::set<int> picks;
    while ((int)picks.size() < deg) picks.insert((int)(next() % (std::uint64_t)m));
    json approvals = json::array();
    for (int c : picks) approvals.push_back("c" + std::to_string(c));
    j["voters"].push_back({{"id", "v" + std::to_string(i)}, {"approvals", approvals}});
  }
  std::set<int> members;
  while ((int)members.size() < k) members.insert((int)(next() % (std::uint64_t)m));
  json committee = json::array();
  for (int c : members) committee.push_back("c" + std::to_string(c));
  j["budget"] = k;
  j["committee"] = committee;
  return parse_instance(j);
}

}  // namespace

TEST_CASE("superset relaxation: frozen values on the small instances") {
  ThetaP e1 = theta_p_subcore(two_blocs());
  REQUIRE(e1.value.has_value());
  CHECK_EQ(*e1.value, doctest::Approx(2.0).epsilon(1e-9));

  ThetaP e2 = theta_p_subcore(ignored_pair());
  REQUIRE(e2.value.has_value());
  CHECK_EQ(*e2.value, doctest::Approx(0.5).epsilon(1e-9));
  // Both voters split the single useful candidate.
  CHECK_EQ(e2.solution->z[0], doctest::Approx(0.5).epsilon(1e-6));
  CHECK_EQ(e2.solution->z[1], doctest::Approx(0.5).epsilon(1e-6));
  CHECK_EQ(e2.solution->x[1], doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("superset relaxation: vacuous when the committee holds every approval") {
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [
      {"id": "v1", "approvals": ["a"]},
      {"id": "v2", "approvals": ["a", "b"]}
    ],
    "budget": 2,
    "committee": ["a", "b"]
  })");
  ThetaP tp = theta_p_subcore(inst);
  CHECK_FALSE(tp.value.has_value());
  CHECK_FALSE(tp.solution.has_value());
}

TEST_CASE("superset relaxation value equals the weak price optimum") {
  std::vector<AuditInstance> corpus;
  corpus.push_back(two_blocs());
  corpus.push_back(ignored_pair());
  for (std::uint64_t seed = 4000; seed < 4015; ++seed) {
    RandomGenParams params;
    params.n = 3 + (int)(seed % 4);
    params.m = 3 + (int)(seed % 3);
    params.k = 2.0;
    params.density = 0.6;
    params.seed = seed;
    corpus.push_back(gen_random(params));
  }
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    const AuditInstance& inst = corpus[t];
    ThetaP sc = theta_p_subcore(inst);
    PriceAudit wp = weak_priceability(inst);
    REQUIRE_EQ(sc.value.has_value(), wp.theta.has_value());
    if (!sc.value.has_value()) continue;
    CHECK_MESSAGE(*sc.value == doctest::Approx(*wp.theta).epsilon(1e-6),
                  "corpus entry ", t, ": superset ", *sc.value, " vs weak ",
                  *wp.theta);
  }
}

TEST_CASE("superset relaxation never sits below the plain deviation relaxation") {
  for (std::uint64_t seed = 4100; seed < 4115; ++seed) {
    RandomGenParams params;
    params.n = 3 + (int)(seed % 3);
    params.m = 4 + (int)(seed % 3);
    params.k = 2.0;
    params.density = 0.5;
    params.seed = seed;
    AuditInstance inst = gen_random(params);
    ThetaP sc = theta_p_subcore(inst);
    ThetaP tp = theta_p(inst);
    // A voter can extend the committee iff it approves something outside it,
    // which on approval instances is exactly the ability to improve.
    REQUIRE_EQ(sc.value.has_value(), tp.value.has_value());
    if (!sc.value.has_value()) continue;
    CHECK_MESSAGE(*sc.value >= *tp.value - 1e-6, "seed ", seed, ": superset ",
                  *sc.value, " below plain ", *tp.value);
  }
}

TEST_CASE("superset roundings: brackets around the exact optimum with valid witnesses") {
  for (std::uint64_t seed = 4200; seed < 4212; ++seed) {
    RandomGenParams params;
    params.n = 3 + (int)(seed % 4);
    params.m = 3 + (int)(seed % 4);
    params.k = 2.0;
    params.density = 0.6;
    params.seed = seed;
    AuditInstance inst = gen_random(params);
    ThetaP sc = theta_p_subcore(inst);
    ExactAudit exact = exact_theta_subcore(inst);
    REQUIRE_EQ(sc.value.has_value(), exact.theta.has_value());
    if (!sc.value.has_value()) continue;
    CHECK_MESSAGE(*sc.value <= *exact.theta + 1e-6, "seed ", seed);

    for (int scheme = 0; scheme < 2; ++scheme) {
      AuditReport r = scheme == 0
                          ? round_subcore_log_m(inst, *sc.solution, 48, seed + 7)
                          : round_subcore_log_n(inst, *sc.solution, 48, seed + 7);
      if (!r.theta_upper.has_value()) continue;
      CHECK_MESSAGE(*r.theta_upper >= *exact.theta - 1e-9, "seed ", seed,
                    " scheme ", scheme);
      REQUIRE(r.witness.has_value());
      std::string why;
      CHECK_MESSAGE(check_witness(inst, *r.witness, &why), "seed ", seed, " scheme ",
                    scheme, ": ", why);
      CHECK(r.witness->mode == DeviationWitness::Mode::SubCore);
    }
  }
}

TEST_CASE("degree-two instances: superset and plain deviation optima coincide") {
  int compared = 0;
  for (std::uint64_t seed = 4300; seed < 4320; ++seed) {
    AuditInstance inst = bounded_degree_instance(seed, 4 + (int)(seed % 3),
                                                 4 + (int)(seed % 3), 2, 2);
    ExactAudit plain = exact_theta_core(inst);
    ExactAudit superset = exact_theta_subcore(inst);
    REQUIRE_EQ(plain.theta.has_value(), superset.theta.has_value());
    if (!plain.theta.has_value()) continue;
    // With at most two approvals per voter the two deviation conditions are
    // voter-by-voter equivalent, so the optima agree exactly.
    CHECK_MESSAGE(*plain.theta == *superset.theta, "seed ", seed, ": plain ",
                  *plain.theta, " vs superset ", *superset.theta);
    ++compared;
  }
  CHECK_GT(compared, 5);
}

TEST_CASE("composed superset audit: shared extension candidate, frozen outcome") {
  AuditInstance inst = ignored_pair();
  SubcoreAuditConfig config;
  config.trials = 32;
  config.seed = 11;
  AuditReport r = audit_subcore(inst, config);
  CHECK_EQ(r.method, "subcore");
  REQUIRE(r.theta_lower.has_value());
  CHECK_EQ(*r.theta_lower, doctest::Approx(0.5).epsilon(1e-9));
  REQUIRE(r.theta_upper.has_value());
  CHECK_EQ(*r.theta_upper, deviation_ratio(1.0, 1ull, 2ull));
  REQUIRE(r.witness.has_value());
  CHECK_EQ(r.witness->voters, std::vector<int>{0, 1});
  CHECK_EQ(committee_ids(inst, r.witness->committee), std::vector<std::string>{"b"});
  std::string why;
  CHECK_MESSAGE(check_witness(inst, *r.witness, &why), why);

  AuditReport again = audit_subcore(inst, config);
  CHECK_EQ(r.theta_upper, again.theta_upper);
  CHECK_EQ(r.witness->voters, again.witness->voters);
  SubcoreAuditConfig parallel = config;
  parallel.jobs = 4;
  AuditReport wide = audit_subcore(inst, parallel);
  CHECK_EQ(r.theta_upper, wide.theta_upper);
  CHECK_EQ(r.witness->voters, wide.witness->voters);
  CHECK_EQ(r.witness->committee.x, wide.witness->committee.x);
}

TEST_CASE("superset interval rounding: single voter degenerates cleanly") {
  AuditInstance inst = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [{"id": "v1", "approvals": ["b"]}],
    "budget": 1,
    "committee": ["a"]
  })");
  ThetaP sc = theta_p_subcore(inst);
  REQUIRE(sc.value.has_value());
  AuditReport r = round_subcore_log_n(inst, *sc.solution, 16, 3);
  CHECK_EQ(r.method, "subcore-logn");
  CHECK_EQ(r.diagnostics.trials, 0);
  CHECK_FALSE(r.theta_upper.has_value());
  REQUIRE_EQ(r.diagnostics.notes.size(), 1);
  CHECK_EQ(r.diagnostics.notes[0], "DEGENERATE_INTERVALS");
  // The threshold scheme still succeeds there.
  AuditReport t = round_subcore_log_m(inst, *sc.solution, 16, 3);
  REQUIRE(t.theta_upper.has_value());
  CHECK_EQ(*t.theta_upper, doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("superset audit: argument validation") {
  AuditInstance inst = ignored_pair();
  ThetaP sc = theta_p_subcore(inst);
  REQUIRE(sc.solution.has_value());
  CHECK_THROWS_WITH_AS(round_subcore_log_m(inst, *sc.solution, 0, 1),
                       "MALFORMED: trials must be at least 1", AuditError);
  FractionalSolution broken = *sc.solution;
  broken.x.pop_back();
  CHECK_THROWS_WITH_AS(round_subcore_log_m(inst, broken, 4, 1),
                       "MALFORMED: fractional solution does not match the instance",
                       AuditError);

  AuditInstance general = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [{"id": "v1", "utilities": {"a": 3, "b": 1}}],
    "budget": 1,
    "committee": ["a"]
  })");
  CHECK_THROWS_WITH_AS(theta_p_subcore(general),
                       "MODE_MISMATCH: superset audit needs unit sizes and 0/1 utilities",
                       AuditError);

  AuditInstance fractional = from_json_text(R"({
    "candidates": [{"id": "a", "size": 1}, {"id": "b", "size": 1}],
    "voters": [{"id": "v1", "approvals": ["b"]}],
    "budget": 1,
    "committee": {"a": 0.5}
  })");
  CHECK_THROWS_WITH_AS(theta_p_subcore(fractional),
                       "MODE_MISMATCH: superset audit needs an integral committee",
                       AuditError);
}

TEST_CASE("weak priceability above one implies no superset deviation at ratio one") {
  int implications = 0;
  for (std::uint64_t seed = 4400; seed < 4420; ++seed) {
    RandomGenParams params;
    params.n = 3 + (int)(seed % 3);
    params.m = 3 + (int)(seed % 3);
    params.k = 2.0;
    params.density = 0.5;
    params.seed = seed;
    AuditInstance inst = gen_random(params);
    PriceAudit wp = weak_priceability(inst);
    if (!wp.theta.has_value()) continue;
    ExactAudit exact = exact_theta_subcore(inst);
    REQUIRE(exact.theta.has_value());
    // The weak optimum certifies superset stability up to its value.
    CHECK_MESSAGE(*wp.theta <= *exact.theta + 1e-6, "seed ", seed);
    if (certifies_stability(*wp.theta)) {
      CHECK_GT(*exact.theta, 1.0);
      ++implications;
    }
  }
}
