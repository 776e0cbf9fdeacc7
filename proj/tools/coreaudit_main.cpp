// Command-line front end: parse instances, dispatch audits, emit reports.
//
// Exit codes: 0 success, 2 validation/usage failure, 3 oracle budget
// exhausted.  Stdout carries only the report (or generated instance);
// diagnostics and error messages go to stderr.
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "coreaudit/gen.hpp"
#include "coreaudit/kc_general.hpp"
#include "coreaudit/model.hpp"
#include "coreaudit/oracles.hpp"
#include "coreaudit/prices.hpp"
#include "coreaudit/report.hpp"
#include "coreaudit/subcore.hpp"

namespace {

using coreaudit::AuditError;
using coreaudit::AuditInstance;
using coreaudit::AuditReport;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kToolVersion = "1.0.0";

struct AuditOpts {
  std::string instance;
  bool lp_only = false;
  bool exact = false;
  bool timing = false;
  std::string round;  // empty: not requested explicitly
  long long trials = 64;
  std::uint64_t seed = 0;
  double epsilon = 0.01;
  double eta = 1.0;
  long long budget_committees = 1LL << 22;
  long long budget_subsets = 1LL << 14;
  double budget_time = 0.0;
  std::string format = "json";
  int jobs = 0;  // 0: use CORE_AUDIT_JOBS or the available parallelism
};

struct GenOpts {
  std::string out = "-";
  int gap_p = 2;
  int cov_q = 2;
  int cov_d = 2;
  long long beta_num = 1;
  long long beta_den = 2;
  std::string cov_sets;  // JSON array of arrays; empty: consecutive groups
  coreaudit::RandomGenParams random;
  std::string random_rule = "greedy";
};

int resolve_jobs(int flag_jobs) {
  if (const char* env = std::getenv("CORE_AUDIT_JOBS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return (int)v;
  }
  if (flag_jobs >= 1) return flag_jobs;
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AuditError("MALFORMED", "cannot read file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // e.what() carries the byte offset (and line/column) of the failure.
    throw AuditError("MALFORMED", "'" + path + "': " + e.what());
  }
}

AuditInstance load_instance(const std::string& path) {
  json j = parse_json_file(path);
  coreaudit::ValidationReport report = coreaudit::validate_instance_json(j);
  if (!report.ok()) {
    std::string all;
    for (const auto& v : report.violations) {
      if (!all.empty()) all += "; ";
      all += v.code + ": " + v.detail;
    }
    throw AuditError(report.violations.front().code,
                     "'" + path + "': " + all);
  }
  return coreaudit::parse_instance(j);
}

coreaudit::RoundStrategy strategy_from(const std::string& name) {
  if (name == "logm") return coreaudit::RoundStrategy::LogM;
  if (name == "logn") return coreaudit::RoundStrategy::LogN;
  return coreaudit::RoundStrategy::Both;
}

coreaudit::OracleBudget budget_from(const AuditOpts& o) {
  coreaudit::OracleBudget b;
  b.max_committees = o.budget_committees;
  b.max_voter_subsets = o.budget_subsets;
  b.time_cap_s = o.budget_time;
  return b;
}

// Report fields echo the run configuration so a report is self-describing.
// The job count is deliberately not echoed: results are identical for every
// job count, and the echo would break byte-for-byte comparability.
ordered_json config_echo(const std::string& command, const AuditOpts& o) {
  ordered_json cfg;
  cfg["command"] = command;
  cfg["instance"] = o.instance;
  cfg["lp"] = o.lp_only;
  cfg["exact"] = o.exact;
  cfg["round"] = o.round.empty() ? "both" : o.round;
  cfg["trials"] = o.trials;
  cfg["seed"] = o.seed;
  cfg["epsilon"] = coreaudit::canonical_ratio(o.epsilon);
  cfg["eta"] = coreaudit::canonical_ratio(o.eta);
  cfg["budget_committees"] = o.budget_committees;
  cfg["budget_subsets"] = o.budget_subsets;
  cfg["budget_time_s"] = coreaudit::canonical_ratio(o.budget_time);
  cfg["format"] = o.format;
  return cfg;
}

void emit_report(const AuditReport& report, const std::string& command,
                 const AuditOpts& o) {
  if (o.format == "text") {
    std::cout << coreaudit::render_report_text(report);
    return;
  }
  ordered_json out = coreaudit::report_to_json(report);
  out["tool"] = ordered_json{{"name", "coreaudit"}, {"version", kToolVersion}};
  out["config"] = config_echo(command, o);
  std::cout << out.dump(2) << "\n";
}

AuditReport dispatch_audit(const std::string& mode, const AuditInstance& inst,
                           const AuditOpts& o, int jobs) {
  coreaudit::LpOptions lp;
  lp.jobs = jobs;
  const bool approval = inst.integral() && inst.election.approval_compatible();
  AuditReport rep;

  if (mode == "core") {
    if (o.exact) {
      coreaudit::ExactAudit ex =
          coreaudit::exact_theta_core(inst, budget_from(o), jobs);
      rep.theta_lower = ex.theta;
      rep.theta_upper = ex.theta;
      rep.witness = ex.witness;
      rep.method = "core-exact";
      rep.diagnostics.enumerated = ex.enumerated;
    } else if (o.lp_only && o.round.empty()) {
      if (approval) {
        coreaudit::ThetaP tp = coreaudit::theta_p(inst, lp);
        rep.theta_lower = tp.value;
        rep.method = "core-lp";
        rep.diagnostics.lp_iterations = tp.lp_iterations;
      } else {
        coreaudit::ThetaPGeneral tg =
            coreaudit::theta_p_general(inst, o.epsilon, lp);
        rep.theta_lower = tg.value;
        rep.method = "core-kc-lp";
        rep.diagnostics.lp_iterations = tg.lp_iterations;
        rep.diagnostics.cuts = tg.cuts;
      }
    } else if (approval) {
      coreaudit::CoreAuditConfig cfg;
      cfg.trials = o.trials;
      cfg.seed = o.seed;
      cfg.strategy = strategy_from(o.round);
      cfg.jobs = jobs;
      cfg.lp = lp;
      rep = coreaudit::audit_core_approval(inst, cfg);
    } else {
      coreaudit::GeneralAuditConfig cfg;
      cfg.epsilon = o.epsilon;
      cfg.trials = o.trials;
      cfg.seed = o.seed;
      cfg.strategy = strategy_from(o.round);
      cfg.jobs = jobs;
      cfg.lp = lp;
      rep = coreaudit::audit_core_general(inst, cfg);
    }
  } else if (mode == "subcore") {
    if (o.exact) {
      coreaudit::ExactAudit ex =
          coreaudit::exact_theta_subcore(inst, budget_from(o), jobs);
      rep.theta_lower = ex.theta;
      rep.theta_upper = ex.theta;
      rep.witness = ex.witness;
      rep.method = "subcore-exact";
      rep.diagnostics.enumerated = ex.enumerated;
    } else if (o.lp_only && o.round.empty()) {
      coreaudit::ThetaP tp = coreaudit::theta_p_subcore(inst, lp);
      rep.theta_lower = tp.value;
      rep.method = "subcore-lp";
      rep.diagnostics.lp_iterations = tp.lp_iterations;
    } else {
      coreaudit::SubcoreAuditConfig cfg;
      cfg.trials = o.trials;
      cfg.seed = o.seed;
      cfg.strategy = strategy_from(o.round);
      cfg.jobs = jobs;
      cfg.lp = lp;
      rep = coreaudit::audit_subcore(inst, cfg);
    }
  } else if (mode == "lindahl") {
    if (approval) {
      coreaudit::PriceAudit pa = coreaudit::lindahl_ratio_approval(inst, lp);
      rep.theta_lower = pa.theta;
      rep.theta_upper = pa.theta;
      rep.prices = pa.prices;
      rep.method = "lindahl-approval";
      rep.diagnostics.lp_iterations = pa.lp_iterations;
    } else {
      coreaudit::PriceBracket pb =
          coreaudit::lindahl_integer_general(inst, o.epsilon, lp);
      rep.theta_lower = pb.lower;
      rep.theta_upper = pb.upper;
      rep.prices = pb.prices;
      rep.method = "lindahl-integer";
      rep.diagnostics.lp_iterations = pb.lp_iterations;
      rep.diagnostics.cuts = pb.cuts;
    }
  } else if (mode == "weak-price") {
    coreaudit::PriceAudit pa = coreaudit::weak_priceability(inst, lp);
    rep.theta_lower = pa.theta;
    rep.theta_upper = pa.theta;
    rep.prices = pa.prices;
    rep.method = "weak-price";
    rep.diagnostics.lp_iterations = pa.lp_iterations;
  } else {  // fractional-core
    coreaudit::PriceAudit pa = coreaudit::lindahl_fractional(inst, o.eta, lp);
    rep.theta_lower = pa.theta;
    rep.prices = pa.prices;
    rep.method = "fractional-core";
    rep.diagnostics.lp_iterations = pa.lp_iterations;
    if (o.exact) {
      coreaudit::ExactAudit ex = coreaudit::exact_theta_fractional_core(
          inst, o.eta, budget_from(o), jobs);
      rep.theta_lower = ex.theta;
      rep.theta_upper = ex.theta;
      rep.witness = ex.witness;
      rep.method = "fractional-core-exact";
      rep.diagnostics.enumerated = ex.enumerated;
    }
  }
  return rep;
}

int run_audit(const std::string& mode, const AuditOpts& o) {
  AuditInstance inst = load_instance(o.instance);
  int jobs = resolve_jobs(o.jobs);
  auto t0 = std::chrono::steady_clock::now();
  AuditReport rep = dispatch_audit(mode, inst, o, jobs);
  if (o.timing) {
    auto t1 = std::chrono::steady_clock::now();
    rep.diagnostics.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  emit_report(rep, "audit " + mode, o);
  return 0;
}

void write_instance(const AuditInstance& inst, const std::string& out) {
  std::string text = coreaudit::emit_instance(inst).dump(2) + "\n";
  if (out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw AuditError("MALFORMED", "cannot write file '" + out + "'");
  f << text;
}

std::vector<std::vector<int>> coverage_sets(const GenOpts& g) {
  if (g.cov_sets.empty()) {
    // Default ground partition: q consecutive groups of d elements.
    std::vector<std::vector<int>> sets((std::size_t)g.cov_q);
    for (int t = 0; t < g.cov_q; ++t)
      for (int e = 0; e < g.cov_d; ++e) sets[(std::size_t)t].push_back(t * g.cov_d + e);
    return sets;
  }
  json j;
  try {
    j = json::parse(g.cov_sets);
  } catch (const json::parse_error& e) {
    throw AuditError("MALFORMED", std::string("--sets: ") + e.what());
  }
  if (!j.is_array()) throw AuditError("MALFORMED", "--sets must be an array of arrays");
  std::vector<std::vector<int>> sets;
  for (const auto& row : j) {
    if (!row.is_array())
      throw AuditError("MALFORMED", "--sets must be an array of arrays");
    std::vector<int> s;
    for (const auto& v : row) {
      if (!v.is_number_integer())
        throw AuditError("MALFORMED", "--sets entries must be integers");
      s.push_back(v.get<int>());
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

int run_gen(const std::string& kind, GenOpts& g) {
  AuditInstance inst;
  if (kind == "gap") {
    inst = coreaudit::gen_gap(g.gap_p);
  } else if (kind == "coverage") {
    inst = coreaudit::gen_coverage(g.cov_q, g.cov_d, coverage_sets(g), g.beta_num,
                                   g.beta_den);
  } else {
    g.random.rule = g.random_rule == "random"
                        ? coreaudit::RandomGenParams::Rule::Random
                        : coreaudit::RandomGenParams::Rule::Greedy;
    inst = coreaudit::gen_random(g.random);
  }
  write_instance(inst, g.out);
  return 0;
}

// Witness failures that contradict the claimed deviation get RATIO_MISMATCH;
// structural problems stay MALFORMED.
std::string classify_witness_failure(const std::string& why) {
  const char* semantic[] = {"ratio differs", "does not strictly improve",
                            "loses an approved", "gains no new",
                            "misses the eta"};
  for (const char* s : semantic)
    if (why.find(s) != std::string::npos) return "RATIO_MISMATCH";
  return "MALFORMED";
}

int run_verify(const std::string& artifact_path, const std::string& instance_path) {
  AuditInstance inst = load_instance(instance_path);
  json art = parse_json_file(artifact_path);
  if (!art.is_object())
    throw AuditError("MALFORMED", "artifact must be a JSON object");

  std::optional<json> witness_json, prices_json;
  if (art.contains("witness") || art.contains("prices")) {
    if (auto it = art.find("witness"); it != art.end() && !it->is_null())
      witness_json = *it;
    if (auto it = art.find("prices"); it != art.end() && !it->is_null())
      prices_json = *it;
  } else if (art.contains("voters") && art.contains("ratio")) {
    witness_json = art;
  } else if (art.contains("table")) {
    prices_json = art;
  }
  if (!witness_json && !prices_json)
    throw AuditError("MALFORMED",
                     "artifact carries neither a witness nor a price system");

  ordered_json checked = ordered_json::array();
  if (witness_json) {
    coreaudit::DeviationWitness w = coreaudit::witness_from_json(*witness_json);
    std::string why;
    if (!coreaudit::check_witness(inst, w, &why))
      throw AuditError(classify_witness_failure(why), why);
    checked.push_back("witness");
  }
  if (prices_json) {
    coreaudit::PriceSystem ps = coreaudit::prices_from_json(*prices_json);
    if (auto v = coreaudit::price_system_violation(inst, ps))
      throw AuditError(v->first, v->second);
    checked.push_back("prices");
  }
  ordered_json out;
  out["ok"] = true;
  out["checked"] = std::move(checked);
  std::cout << out.dump() << "\n";
  return 0;
}

void attach_audit_flags(CLI::App* sub, AuditOpts& o) {
  sub->add_option("instance", o.instance, "Instance file (JSON)")->required();
  sub->add_flag("--lp", o.lp_only,
                "Stop after the relaxation: certified lower bound only");
  sub->add_flag("--exact", o.exact,
                "Brute-force the exact ratio (overrides --lp/--round)");
  sub->add_option("--round", o.round, "Rounding strategy for witness search")
      ->check(CLI::IsMember({"logm", "logn", "both"}));
  sub->add_option("--trials", o.trials, "Rounding trials per strategy")
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Master seed for randomized rounding")
      ->capture_default_str();
  sub->add_option("--epsilon", o.epsilon,
                  "Approximation slack for cut-generation paths")
      ->capture_default_str();
  sub->add_option("--eta", o.eta, "Required improvement margin (fractional core)")
      ->capture_default_str();
  sub->add_option("--budget-committees", o.budget_committees,
                  "Exact-oracle cap on enumerated committees")
      ->capture_default_str();
  sub->add_option("--budget-subsets", o.budget_subsets,
                  "Exact-oracle cap on enumerated voter subsets")
      ->capture_default_str();
  sub->add_option("--budget-time", o.budget_time,
                  "Exact-oracle wall-clock cap in seconds (0 = off)")
      ->capture_default_str();
  sub->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();
  sub->add_option("--jobs", o.jobs,
                  "Worker threads (0 = available parallelism; the "
                  "CORE_AUDIT_JOBS environment variable overrides this)")
      ->capture_default_str();
  sub->add_flag("--timing", o.timing,
                "Record wall-clock time in diagnostics.wall_ms");
}

const char* kReportFieldDocs =
    "Report fields:\n"
    "  theta_lower   certified lower bound on the stability ratio, or the\n"
    "                string \"unbounded\" when no deviation exists at all\n"
    "  theta_upper   ratio of the best verified deviation found (an upper\n"
    "                bound on the true ratio), or \"unbounded\"\n"
    "  witness       deviation achieving theta_upper: mode, voter indices,\n"
    "                committee (member indices or fractional vector), ratio;\n"
    "                null when no deviation was found\n"
    "  method        audit path that produced the numbers\n"
    "  seed          master seed used by randomized rounding (null for\n"
    "                deterministic paths)\n"
    "  prices        price system certifying theta_lower where applicable:\n"
    "                mode, theta, per-voter price table (candidate index ->\n"
    "                price), plus lambda/alpha multipliers in fractional\n"
    "                mode; null otherwise\n"
    "  diagnostics   lp_iterations, trials, successes, cuts, enumerated,\n"
    "                notes, and wall_ms when --timing was given\n"
    "  tool, config  tool version and the echoed run configuration\n";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Committee stability auditor: certified bounds, deviation "
               "witnesses, and price systems for participatory-budgeting "
               "elections"};
  app.footer(kReportFieldDocs);
  app.set_version_flag("--version", std::string("coreaudit ") + kToolVersion);
  app.require_subcommand(1);

  AuditOpts audit_opts;
  CLI::App* audit = app.add_subcommand("audit", "Audit an instance file");
  audit->require_subcommand(1);
  CLI::App* a_core =
      audit->add_subcommand("core", "Stability against arbitrary deviations");
  CLI::App* a_subcore =
      audit->add_subcommand("subcore", "Stability against committee extensions");
  CLI::App* a_lindahl =
      audit->add_subcommand("lindahl", "Price-based stability certificate");
  CLI::App* a_weak =
      audit->add_subcommand("weak-price", "Single-extension price certificate");
  CLI::App* a_frac = audit->add_subcommand(
      "fractional-core", "Stability against fractional deviations");
  for (CLI::App* sub : {a_core, a_subcore, a_lindahl, a_weak, a_frac})
    attach_audit_flags(sub, audit_opts);

  GenOpts gen_opts;
  CLI::App* gen = app.add_subcommand("gen", "Generate an instance file");
  gen->require_subcommand(1);
  CLI::App* g_gap =
      gen->add_subcommand("gap", "Layered family separating the relaxation "
                                 "from the exact ratio");
  g_gap->add_option("--p", gen_opts.gap_p, "Layer parameter (>= 2)")->required();
  CLI::App* g_cov = gen->add_subcommand(
      "coverage", "Coverage-reduction family with scaled group sizes");
  g_cov->add_option("--q", gen_opts.cov_q, "Number of ground sets")->required();
  g_cov->add_option("--d", gen_opts.cov_d, "Elements per set")->required();
  g_cov->add_option("--beta-num", gen_opts.beta_num, "Scale numerator")
      ->required();
  g_cov->add_option("--beta-den", gen_opts.beta_den, "Scale denominator")
      ->required();
  g_cov->add_option("--sets", gen_opts.cov_sets,
                    "Ground sets as a JSON array of arrays (default: "
                    "consecutive groups of d elements)");
  CLI::App* g_rand = gen->add_subcommand("random", "Seeded random instance");
  g_rand->add_option("--n", gen_opts.random.n, "Voters")->capture_default_str();
  g_rand->add_option("--m", gen_opts.random.m, "Candidates")
      ->capture_default_str();
  g_rand->add_option("--k", gen_opts.random.k, "Committee budget")
      ->capture_default_str();
  g_rand->add_flag("--general", gen_opts.random.general,
                   "General utilities and sizes instead of approval");
  g_rand->add_option("--density", gen_opts.random.density,
                     "Probability a voter values a candidate")
      ->capture_default_str();
  g_rand->add_option("--max-u", gen_opts.random.max_u,
                     "Largest utility value (general mode)")
      ->capture_default_str();
  g_rand->add_option("--size-lo", gen_opts.random.size_lo,
                     "Smallest candidate size (general mode)")
      ->capture_default_str();
  g_rand->add_option("--size-hi", gen_opts.random.size_hi,
                     "Largest candidate size (general mode)")
      ->capture_default_str();
  g_rand->add_option("--rule", gen_opts.random_rule, "Committee selection rule")
      ->check(CLI::IsMember({"greedy", "random"}))
      ->capture_default_str();
  g_rand->add_option("--seed", gen_opts.random.seed, "Generator seed")
      ->capture_default_str();
  for (CLI::App* sub : {g_gap, g_cov, g_rand})
    sub->add_option("--out", gen_opts.out, "Output path (- for stdout)")
        ->capture_default_str();

  std::string verify_artifact, verify_instance;
  CLI::App* verify = app.add_subcommand(
      "verify", "Re-check a witness or price system against an instance");
  verify->add_option("artifact", verify_artifact,
                     "Witness, price system, or full report (JSON)")
      ->required();
  verify->add_option("instance", verify_instance, "Instance file (JSON)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (audit->parsed()) {
      for (CLI::App* sub : {a_core, a_subcore, a_lindahl, a_weak, a_frac})
        if (sub->parsed()) return run_audit(sub->get_name(), audit_opts);
    } else if (gen->parsed()) {
      for (CLI::App* sub : {g_gap, g_cov, g_rand})
        if (sub->parsed()) return run_gen(sub->get_name(), gen_opts);
    } else if (verify->parsed()) {
      return run_verify(verify_artifact, verify_instance);
    }
  } catch (const AuditError& e) {
    std::cerr << e.what() << "\n";
    return e.code == "ORACLE_BUDGET" ? 3 : 2;
  } catch (const json::exception& e) {
    std::cerr << "MALFORMED: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
