// Instance model for committee stability audits: elections, committees,
// deviation witnesses, price systems, reports, validation and JSON I/O.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace coreaudit {

// Machine-readable failure raised by operations (not by input validation,
// which reports violations as data instead).
struct AuditError : std::runtime_error {
  std::string code;
  AuditError(std::string code_, const std::string& what_)
      : std::runtime_error(code_ + ": " + what_), code(std::move(code_)) {}
};

struct Candidate {
  std::string id;
  double size = 1.0;
};

struct Voter {
  std::string id;
  // Sparse positive utilities, sorted by candidate index.
  std::vector<std::pair<int, long long>> utilities;
  // Whether the voter was given as an approval list (affects serialization only).
  bool approval_input = true;

  long long utility_for(int cand) const {
    for (auto& [j, u] : utilities)
      if (j == cand) return u;
    return 0;
  }
};

struct Election {
  std::vector<Candidate> candidates;
  std::vector<Voter> voters;
  double budget = 0.0;  // committee size bound k

  int candidate_index(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : it->second;
  }
  void rebuild_index();

  std::size_t num_candidates() const { return candidates.size(); }
  std::size_t num_voters() const { return voters.size(); }

  // True when the instance is expressible in approval terms: every size is
  // exactly 1 and every utility is 0 or 1.
  bool approval_compatible() const;
  // True when every candidate size is exactly 1 (unit-size committees let
  // ratios be computed over integer counts).
  bool unit_sizes() const;

 private:
  std::unordered_map<std::string, int> index_;
};

// A committee: integral subset or fractional vector over candidates.
struct Committee {
  bool fractional = false;
  std::vector<double> x;  // length m; entries in {0,1} when integral

  bool contains(int j) const { return x[j] > 0.0; }
  double total_size(const Election& e) const {
    double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * e.candidates[j].size;
    return s;
  }
  std::vector<int> members() const {
    std::vector<int> out;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] > 0.0) out.push_back((int)j);
    return out;
  }
};

struct Violation {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const {
    for (auto& v : violations)
      if (v.code == code) return true;
    return false;
  }
};

// Election + committee under audit, with cached per-voter committee utility.
struct AuditInstance {
  Election election;
  Committee committee;
  double ratio_scale = 0.0;            // R = n / k
  std::vector<double> util_w;          // U_i(W), real (fractional committees)
  std::vector<long long> util_w_int;   // U_i(W) when the committee is integral

  static AuditInstance make(Election e, Committee w);

  std::size_t num_voters() const { return election.num_voters(); }
  std::size_t num_candidates() const { return election.num_candidates(); }
  bool integral() const { return !committee.fractional; }
};

// U_i(T) for integral committee T given as candidate indices.
long long utility_of(const Election& e, int voter, const std::vector<int>& committee);
// U_i(x) for a fractional committee vector.
double utility_of(const Election& e, int voter, const std::vector<double>& x);

// Canonical deviation ratio R * size(T) / |S|.  The integer overload reduces
// the fraction first so that equal rationals map to bit-identical doubles; it
// is used whenever all candidate sizes are 1.
double deviation_ratio(double ratio_scale, double total_size, std::size_t voters);
double deviation_ratio(double ratio_scale, unsigned long long size_units,
                       unsigned long long voters);

struct DeviationWitness {
  enum class Mode { Core, SubCore, FractionalCore };
  Mode mode = Mode::Core;
  double eta = 1.0;  // only meaningful for FractionalCore
  std::vector<int> voters;  // indices into election.voters, ascending
  Committee committee;      // the deviation T
  double ratio = 0.0;
};

// Re-checks a witness against the instance from scratch.  Returns false and
// fills `why` when any invariant fails.
bool check_witness(const AuditInstance& inst, const DeviationWitness& w,
                   std::string* why = nullptr);

struct PriceSystem {
  enum class Mode { LindahlApproval, LindahlFractional, Weak, LindahlInteger };
  Mode mode = Mode::LindahlApproval;
  double eta = 1.0;
  double theta = 0.0;
  // Per voter: candidate index -> price (sorted map for deterministic output).
  std::vector<std::map<int, double>> prices;
  // Extra multipliers for the fractional mode.
  std::vector<double> lambda;
  std::vector<std::map<int, double>> alpha;
};

// Checks candidate budgets and the mode-specific affordability condition.
bool check_prices(const AuditInstance& inst, const PriceSystem& ps,
                  std::string* why = nullptr);

struct Diagnostics {
  long long lp_iterations = 0;
  long long trials = 0;
  long long successes = 0;
  long long cuts = 0;
  long long enumerated = 0;
  std::optional<double> wall_ms;  // only populated when timing was requested
  std::vector<std::string> notes;
};

struct AuditReport {
  std::optional<double> theta_lower;  // nullopt encodes "unbounded"
  std::optional<double> theta_upper;
  std::optional<DeviationWitness> witness;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::optional<PriceSystem> prices;
  Diagnostics diagnostics;
};

// ---- JSON ----

// Validates instance JSON before construction.  Codes: DUPLICATE_ID,
// BUDGET_EXCEEDED, UNKNOWN_CANDIDATE, NEGATIVE_SIZE, NON_INTEGER_UTILITY,
// NONPOSITIVE_BUDGET, MALFORMED.
ValidationReport validate_instance_json(const nlohmann::json& j);
// Re-validates constructed objects (same codes where applicable).
ValidationReport validate(const Election& e, const Committee* w = nullptr);

// Parses validated instance JSON.  Throws AuditError("MALFORMED") if
// validate_instance_json would report violations.
AuditInstance parse_instance(const nlohmann::json& j);
Election parse_election(const nlohmann::json& j);

nlohmann::ordered_json emit_instance(const Election& e, const Committee* w);
nlohmann::ordered_json emit_instance(const AuditInstance& inst);

// Report serialization lives in report.hpp (needs config echo context).

// ---- deterministic RNG ----

std::uint64_t splitmix64(std::uint64_t x);

// All randomized kernels draw through this wrapper so that results do not
// depend on the standard library's distribution implementations.
struct Rng {
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that near-zero seeds decorrelate quickly.
    next();
    next();
  }
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform01() { return (next() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform01() < p; }
  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }
  std::uint64_t state_;
};

// Per-trial seed derivation shared by every randomized strategy.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(master ^ splitmix64(0x6b79ull + trial * 0x9E3779B97F4A7C15ull));
}

}  // namespace coreaudit
