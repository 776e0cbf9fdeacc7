#include "coreaudit/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace coreaudit {

void Election::rebuild_index() {
  index_.clear();
  for (std::size_t j = 0; j < candidates.size(); ++j)
    index_[candidates[j].id] = (int)j;
}

bool Election::approval_compatible() const {
  if (!unit_sizes()) return false;
  for (auto& v : voters)
    for (auto& [j, u] : v.utilities)
      if (u != 0 && u != 1) return false;
  return true;
}

bool Election::unit_sizes() const {
  for (auto& c : candidates)
    if (c.size != 1.0) return false;
  return true;
}

AuditInstance AuditInstance::make(Election e, Committee w) {
  e.rebuild_index();
  AuditInstance inst;
  if (w.x.size() != e.candidates.size())
    throw AuditError("MALFORMED", "committee vector length mismatch");
  inst.ratio_scale = (double)e.voters.size() / e.budget;
  inst.util_w.resize(e.voters.size());
  inst.util_w_int.assign(e.voters.size(), 0);
  for (std::size_t i = 0; i < e.voters.size(); ++i) {
    double u = 0;
    for (auto& [j, uij] : e.voters[i].utilities) u += (double)uij * w.x[j];
    inst.util_w[i] = u;
    if (!w.fractional) inst.util_w_int[i] = (long long)std::llround(u);
  }
  inst.election = std::move(e);
  inst.committee = std::move(w);
  return inst;
}

long long utility_of(const Election& e, int voter, const std::vector<int>& committee) {
  long long total = 0;
  const Voter& v = e.voters[voter];
  for (int j : committee) total += v.utility_for(j);
  return total;
}

double utility_of(const Election& e, int voter, const std::vector<double>& x) {
  double total = 0;
  for (auto& [j, u] : e.voters[voter].utilities) total += (double)u * x[j];
  return total;
}

double deviation_ratio(double ratio_scale, double total_size, std::size_t voters) {
  return ratio_scale * total_size / (double)voters;
}

double deviation_ratio(double ratio_scale, unsigned long long size_units,
                       unsigned long long voters) {
  unsigned long long g = std::gcd(size_units, voters);
  if (g > 1) {
    size_units /= g;
    voters /= g;
  }
  return ratio_scale * (double)size_units / (double)voters;
}

namespace {

// Ratio for a witness, using the reduced-integer path when possible.
double witness_ratio(const AuditInstance& inst, const DeviationWitness& w) {
  bool unit = inst.election.unit_sizes();
  if (unit && !w.committee.fractional) {
    unsigned long long units = 0;
    for (double v : w.committee.x) units += v > 0 ? 1 : 0;
    return deviation_ratio(inst.ratio_scale, units, (unsigned long long)w.voters.size());
  }
  return deviation_ratio(inst.ratio_scale, w.committee.total_size(inst.election),
                         w.voters.size());
}

}  // namespace

bool check_witness(const AuditInstance& inst, const DeviationWitness& w, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const Election& e = inst.election;
  if (w.voters.empty()) return fail("witness has no voters");
  if (w.committee.x.size() != e.num_candidates())
    return fail("witness committee length mismatch");
  for (std::size_t t = 0; t < w.voters.size(); ++t) {
    int i = w.voters[t];
    if (i < 0 || (std::size_t)i >= e.num_voters()) return fail("voter index out of range");
    if (t > 0 && w.voters[t - 1] >= i) return fail("voter list not strictly ascending");
  }
  bool any_member = false;
  for (double v : w.committee.x) {
    if (v < 0.0 || v > 1.0) return fail("committee entry outside [0,1]");
    if (!w.committee.fractional && v != 0.0 && v != 1.0)
      return fail("integral committee entry not 0/1");
    if (v > 0.0) any_member = true;
  }
  if (!any_member) return fail("witness committee is empty");

  switch (w.mode) {
    case DeviationWitness::Mode::Core: {
      if (!inst.integral() || w.committee.fractional)
        return fail("core witness requires integral committees");
      std::vector<int> T = w.committee.members();
      for (int i : w.voters) {
        if (utility_of(e, i, T) < inst.util_w_int[i] + 1)
          return fail("voter " + e.voters[i].id + " does not strictly improve");
      }
      break;
    }
    case DeviationWitness::Mode::SubCore: {
      if (!inst.integral() || w.committee.fractional)
        return fail("sub-core witness requires integral committees");
      for (int i : w.voters) {
        bool has_new = false;
        for (auto& [j, u] : e.voters[i].utilities) {
          if (u <= 0) continue;
          bool in_w = inst.committee.contains(j);
          bool in_t = w.committee.contains(j);
          if (in_w && !in_t)
            return fail("voter " + e.voters[i].id + " loses an approved committee member");
          if (in_t && !in_w) has_new = true;
        }
        if (!has_new)
          return fail("voter " + e.voters[i].id + " gains no new approved candidate");
      }
      break;
    }
    case DeviationWitness::Mode::FractionalCore: {
      for (int i : w.voters) {
        double got = utility_of(e, i, w.committee.x);
        if (got < inst.util_w[i] + w.eta - 1e-8)
          return fail("voter " + e.voters[i].id + " misses the eta improvement");
      }
      break;
    }
  }

  double expect = witness_ratio(inst, w);
  if (std::abs(w.ratio - expect) > 1e-9 * std::max(1.0, std::abs(expect)))
    return fail("stored ratio differs from recomputation");
  return true;
}

// ---- JSON validation ----

namespace {

bool integral_number(const nlohmann::json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return true;
  if (!v.is_number_float()) return false;
  double d = v.get<double>();
  return std::isfinite(d) && d == std::rint(d);
}

}  // namespace

ValidationReport validate_instance_json(const nlohmann::json& j) {
  ValidationReport rep;
  auto add = [&](const std::string& code, const std::string& detail) {
    rep.violations.push_back({code, detail});
  };
  if (!j.is_object()) {
    add("MALFORMED", "instance root must be an object");
    return rep;
  }
  std::set<std::string> cand_ids;
  if (!j.contains("candidates") || !j["candidates"].is_array() || j["candidates"].empty()) {
    add("MALFORMED", "candidates must be a nonempty array");
  } else {
    for (auto& c : j["candidates"]) {
      if (!c.is_object() || !c.contains("id") || !c["id"].is_string() ||
          !c.contains("size") || !c["size"].is_number()) {
        add("MALFORMED", "candidate entries need string id and numeric size");
        continue;
      }
      std::string id = c["id"].get<std::string>();
      if (!cand_ids.insert(id).second) add("DUPLICATE_ID", "candidate id " + id);
      double s = c["size"].get<double>();
      if (!(s > 0.0) || !std::isfinite(s)) add("NEGATIVE_SIZE", "candidate " + id);
    }
  }
  std::set<std::string> voter_ids;
  if (!j.contains("voters") || !j["voters"].is_array() || j["voters"].empty()) {
    add("MALFORMED", "voters must be a nonempty array");
  } else {
    for (auto& v : j["voters"]) {
      if (!v.is_object() || !v.contains("id") || !v["id"].is_string()) {
        add("MALFORMED", "voter entries need a string id");
        continue;
      }
      std::string id = v["id"].get<std::string>();
      if (!voter_ids.insert(id).second) add("DUPLICATE_ID", "voter id " + id);
      bool has_app = v.contains("approvals");
      bool has_util = v.contains("utilities");
      if (has_app == has_util) {
        add("MALFORMED", "voter " + id + " needs exactly one of approvals/utilities");
        continue;
      }
      if (has_app) {
        if (!v["approvals"].is_array()) {
          add("MALFORMED", "voter " + id + " approvals must be an array");
          continue;
        }
        std::set<std::string> seen;
        for (auto& a : v["approvals"]) {
          if (!a.is_string()) {
            add("MALFORMED", "voter " + id + " approval entries must be strings");
            continue;
          }
          std::string cid = a.get<std::string>();
          if (!cand_ids.count(cid)) add("UNKNOWN_CANDIDATE", "voter " + id + " approves " + cid);
          if (!seen.insert(cid).second) add("DUPLICATE_ID", "voter " + id + " approves " + cid + " twice");
        }
      } else {
        if (!v["utilities"].is_object()) {
          add("MALFORMED", "voter " + id + " utilities must be an object");
          continue;
        }
        for (auto& [cid, uv] : v["utilities"].items()) {
          if (!cand_ids.count(cid)) add("UNKNOWN_CANDIDATE", "voter " + id + " rates " + cid);
          if (!uv.is_number() || !integral_number(uv) || uv.get<double>() < 0.0)
            add("NON_INTEGER_UTILITY", "voter " + id + " utility for " + cid);
          else if (uv.get<double>() > 1e12)
            add("MALFORMED", "voter " + id + " utility for " + cid + " too large");
        }
      }
    }
  }
  double budget = 0.0;
  if (!j.contains("budget") || !j["budget"].is_number()) {
    add("MALFORMED", "budget must be a number");
  } else {
    budget = j["budget"].get<double>();
    if (!(budget > 0.0) || !std::isfinite(budget)) add("NONPOSITIVE_BUDGET", "budget must be positive");
  }
  if (j.contains("committee")) {
    std::unordered_map<std::string, double> sizes;
    for (auto& c : j["candidates"]) {
      if (c.is_object() && c.contains("id") && c["id"].is_string() && c.contains("size") &&
          c["size"].is_number())
        sizes[c["id"].get<std::string>()] = c["size"].get<double>();
    }
    double total = 0.0;
    const auto& w = j["committee"];
    if (w.is_array()) {
      std::set<std::string> seen;
      for (auto& a : w) {
        if (!a.is_string()) {
          add("MALFORMED", "committee entries must be candidate ids");
          continue;
        }
        std::string cid = a.get<std::string>();
        if (!cand_ids.count(cid)) add("UNKNOWN_CANDIDATE", "committee member " + cid);
        if (!seen.insert(cid).second) add("DUPLICATE_ID", "committee member " + cid + " twice");
        auto it = sizes.find(cid);
        if (it != sizes.end()) total += it->second;
      }
    } else if (w.is_object()) {
      for (auto& [cid, xv] : w.items()) {
        if (!cand_ids.count(cid)) add("UNKNOWN_CANDIDATE", "committee member " + cid);
        if (!xv.is_number() || xv.get<double>() < 0.0 || xv.get<double>() > 1.0) {
          add("MALFORMED", "committee weight for " + cid + " outside [0,1]");
          continue;
        }
        auto it = sizes.find(cid);
        if (it != sizes.end()) total += xv.get<double>() * it->second;
      }
    } else {
      add("MALFORMED", "committee must be an array or object");
    }
    if (budget > 0.0 && total > budget * (1.0 + 1e-9) + 1e-12)
      add("BUDGET_EXCEEDED", "committee size exceeds budget");
  } else {
    add("MALFORMED", "committee missing");
  }
  return rep;
}

ValidationReport validate(const Election& e, const Committee* w) {
  ValidationReport rep;
  auto add = [&](const std::string& code, const std::string& detail) {
    rep.violations.push_back({code, detail});
  };
  std::set<std::string> ids;
  if (e.candidates.empty()) add("MALFORMED", "no candidates");
  if (e.voters.empty()) add("MALFORMED", "no voters");
  for (auto& c : e.candidates) {
    if (!ids.insert(c.id).second) add("DUPLICATE_ID", "candidate id " + c.id);
    if (!(c.size > 0.0) || !std::isfinite(c.size)) add("NEGATIVE_SIZE", "candidate " + c.id);
  }
  std::set<std::string> vids;
  for (auto& v : e.voters) {
    if (!vids.insert(v.id).second) add("DUPLICATE_ID", "voter id " + v.id);
    int prev = -1;
    for (auto& [j, u] : v.utilities) {
      if (j < 0 || (std::size_t)j >= e.candidates.size())
        add("UNKNOWN_CANDIDATE", "voter " + v.id);
      if (j <= prev) add("MALFORMED", "voter " + v.id + " utilities unsorted");
      prev = j;
      if (u < 0) add("NON_INTEGER_UTILITY", "voter " + v.id + " has a negative utility");
    }
  }
  if (!(e.budget > 0.0) || !std::isfinite(e.budget))
    add("NONPOSITIVE_BUDGET", "budget must be positive");
  if (w) {
    if (w->x.size() != e.candidates.size()) {
      add("MALFORMED", "committee vector length mismatch");
    } else {
      double total = 0.0;
      for (std::size_t j = 0; j < w->x.size(); ++j) {
        double xv = w->x[j];
        if (xv < 0.0 || xv > 1.0) add("MALFORMED", "committee weight outside [0,1]");
        if (!w->fractional && xv != 0.0 && xv != 1.0)
          add("MALFORMED", "integral committee weight not 0/1");
        total += xv * e.candidates[j].size;
      }
      if (e.budget > 0.0 && total > e.budget * (1.0 + 1e-9) + 1e-12)
        add("BUDGET_EXCEEDED", "committee size exceeds budget");
    }
  }
  return rep;
}

// ---- JSON parse / emit ----

Election parse_election(const nlohmann::json& j) {
  Election e;
  for (auto& c : j["candidates"])
    e.candidates.push_back({c["id"].get<std::string>(), c["size"].get<double>()});
  e.rebuild_index();
  for (auto& v : j["voters"]) {
    Voter voter;
    voter.id = v["id"].get<std::string>();
    if (v.contains("approvals")) {
      voter.approval_input = true;
      std::vector<int> idx;
      for (auto& a : v["approvals"]) idx.push_back(e.candidate_index(a.get<std::string>()));
      std::sort(idx.begin(), idx.end());
      for (int j2 : idx) voter.utilities.push_back({j2, 1});
    } else {
      voter.approval_input = false;
      std::vector<std::pair<int, long long>> us;
      for (auto& [cid, uv] : v["utilities"].items()) {
        long long u = (long long)std::llround(uv.get<double>());
        if (u > 0) us.push_back({e.candidate_index(cid), u});
      }
      std::sort(us.begin(), us.end());
      voter.utilities = std::move(us);
    }
    e.voters.push_back(std::move(voter));
  }
  e.budget = j["budget"].get<double>();
  return e;
}

AuditInstance parse_instance(const nlohmann::json& j) {
  ValidationReport rep = validate_instance_json(j);
  if (!rep.ok()) {
    std::string codes;
    for (auto& v : rep.violations) codes += (codes.empty() ? "" : ",") + v.code;
    throw AuditError("MALFORMED", "instance fails validation: " + codes);
  }
  Election e = parse_election(j);
  Committee w;
  w.x.assign(e.candidates.size(), 0.0);
  const auto& cj = j["committee"];
  if (cj.is_array()) {
    w.fractional = false;
    for (auto& a : cj) w.x[e.candidate_index(a.get<std::string>())] = 1.0;
  } else {
    bool all01 = true;
    for (auto& [cid, xv] : cj.items()) {
      double val = xv.get<double>();
      w.x[e.candidate_index(cid)] = val;
      if (val != 0.0 && val != 1.0) all01 = false;
    }
    // An object whose weights are all exactly 0/1 denotes an integral committee.
    w.fractional = !all01;
  }
  return AuditInstance::make(std::move(e), std::move(w));
}

nlohmann::ordered_json emit_instance(const Election& e, const Committee* w) {
  nlohmann::ordered_json j;
  j["candidates"] = nlohmann::ordered_json::array();
  for (auto& c : e.candidates)
    j["candidates"].push_back({{"id", c.id}, {"size", c.size}});
  j["voters"] = nlohmann::ordered_json::array();
  for (auto& v : e.voters) {
    nlohmann::ordered_json vj;
    vj["id"] = v.id;
    if (v.approval_input) {
      auto arr = nlohmann::ordered_json::array();
      for (auto& [jdx, u] : v.utilities)
        if (u > 0) arr.push_back(e.candidates[jdx].id);
      vj["approvals"] = std::move(arr);
    } else {
      nlohmann::ordered_json uj = nlohmann::ordered_json::object();
      for (auto& [jdx, u] : v.utilities)
        if (u > 0) uj[e.candidates[jdx].id] = u;
      vj["utilities"] = std::move(uj);
    }
    j["voters"].push_back(std::move(vj));
  }
  j["budget"] = e.budget;
  if (w) {
    if (!w->fractional) {
      auto arr = nlohmann::ordered_json::array();
      for (std::size_t jdx = 0; jdx < w->x.size(); ++jdx)
        if (w->x[jdx] > 0.0) arr.push_back(e.candidates[jdx].id);
      j["committee"] = std::move(arr);
    } else {
      nlohmann::ordered_json cj = nlohmann::ordered_json::object();
      for (std::size_t jdx = 0; jdx < w->x.size(); ++jdx)
        if (w->x[jdx] > 0.0) cj[e.candidates[jdx].id] = w->x[jdx];
      j["committee"] = std::move(cj);
    }
  }
  return j;
}

nlohmann::ordered_json emit_instance(const AuditInstance& inst) {
  return emit_instance(inst.election, &inst.committee);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace coreaudit
