// Instance generators: the layered integrality-gap family, the coverage-based
// stress family, and seeded random corpora.
#pragma once

#include <cstdint>
#include <vector>

#include "coreaudit/model.hpp"

namespace coreaudit {

// Layered instance with p voter groups V_1..V_p (|V_l| = 2^l), per-group
// candidate blocks G_l (|G_l| = 2^l - 1, approved exactly by V_l), a shared
// block of 2^p candidates approved by everyone, and p dummy candidates
// approved by nobody.  The audited committee is all group blocks plus the
// dummies, and the budget equals the number of voters, so R = 1.  The LP
// relaxation value drops like 1/p while every integral deviation keeps ratio
// at least 1/2, which separates the two audits by about log n.
AuditInstance gen_gap(int p);

// Coverage-based stress instance.  `sets` partitions work over a universe of
// q*d elements; each set must have exactly d elements.  beta = beta_num /
// beta_den replaces an irrational constant so that the scaled group sizes
// beta*q*d (backer voters) and beta*(q-1)*q*d (dummy candidates) are whole
// numbers; otherwise NON_INTEGER_GROUP is raised.  Backer voters approve all
// main candidates plus q-1 private dummies; element voters approve the mains
// whose set covers their element; padding voters bring n to q*(q-1)*d^2.  The
// audited committee is the dummy block with budget k = (q-1)*q*d.
AuditInstance gen_coverage(int q, int d, const std::vector<std::vector<int>>& sets,
                           long long beta_num, long long beta_den);

// Seeded random instances.
struct RandomGenParams {
  int n = 1;
  int m = 1;
  double k = 1.0;
  bool general = false;      // false: approval voters with unit sizes
  double density = 0.5;      // probability a voter values a candidate at all
  long long max_u = 1;       // general mode: nonzero utilities are 1..max_u
  double size_lo = 1.0;      // general mode: candidate sizes uniform in range
  double size_hi = 1.0;
  enum class Rule { Greedy, Random } rule = Rule::Greedy;
  std::uint64_t seed = 0;
};
AuditInstance gen_random(const RandomGenParams& p);

}  // namespace coreaudit
