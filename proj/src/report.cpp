#include "coreaudit/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace coreaudit {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const char* witness_mode_name(DeviationWitness::Mode m) {
  switch (m) {
    case DeviationWitness::Mode::Core: return "core";
    case DeviationWitness::Mode::SubCore: return "subcore";
    case DeviationWitness::Mode::FractionalCore: return "fractional-core";
  }
  return "core";
}

DeviationWitness::Mode witness_mode_from(const std::string& s) {
  if (s == "core") return DeviationWitness::Mode::Core;
  if (s == "subcore") return DeviationWitness::Mode::SubCore;
  if (s == "fractional-core") return DeviationWitness::Mode::FractionalCore;
  throw AuditError("MALFORMED", "unknown witness mode '" + s + "'");
}

const char* price_mode_name(PriceSystem::Mode m) {
  switch (m) {
    case PriceSystem::Mode::LindahlApproval: return "lindahl-approval";
    case PriceSystem::Mode::LindahlFractional: return "lindahl-fractional";
    case PriceSystem::Mode::Weak: return "weak";
    case PriceSystem::Mode::LindahlInteger: return "lindahl-integer";
  }
  return "lindahl-approval";
}

PriceSystem::Mode price_mode_from(const std::string& s) {
  if (s == "lindahl-approval") return PriceSystem::Mode::LindahlApproval;
  if (s == "lindahl-fractional") return PriceSystem::Mode::LindahlFractional;
  if (s == "weak") return PriceSystem::Mode::Weak;
  if (s == "lindahl-integer") return PriceSystem::Mode::LindahlInteger;
  throw AuditError("MALFORMED", "unknown price mode '" + s + "'");
}

// Serialized ratio bounds use a string sentinel for "no finite bound".
ordered_json bound_to_json(const std::optional<double>& v) {
  if (!v) return "unbounded";
  return canonical_ratio(*v);
}

std::optional<double> bound_from_json(const json& v, const char* name) {
  if (v.is_string()) {
    if (v.get<std::string>() == "unbounded") return std::nullopt;
    throw AuditError("MALFORMED", std::string(name) + " must be a number or \"unbounded\"");
  }
  if (!v.is_number())
    throw AuditError("MALFORMED", std::string(name) + " must be a number or \"unbounded\"");
  return v.get<double>();
}

ordered_json sparse_table_to_json(const std::vector<std::map<int, double>>& table) {
  ordered_json out = ordered_json::array();
  for (const auto& row : table) {
    ordered_json o = ordered_json::object();
    for (const auto& [cand, value] : row) o[std::to_string(cand)] = canonical_ratio(value);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<std::map<int, double>> sparse_table_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw AuditError("MALFORMED", std::string(name) + " must be an array");
  std::vector<std::map<int, double>> table;
  table.reserve(j.size());
  for (const auto& row : j) {
    if (!row.is_object())
      throw AuditError("MALFORMED", std::string(name) + " entries must be objects");
    std::map<int, double> r;
    for (auto it = row.begin(); it != row.end(); ++it) {
      char* end = nullptr;
      long cand = std::strtol(it.key().c_str(), &end, 10);
      if (end == it.key().c_str() || *end != '\0' || cand < 0)
        throw AuditError("MALFORMED",
                         std::string(name) + " keys must be candidate indices, got '" +
                             it.key() + "'");
      if (!it.value().is_number())
        throw AuditError("MALFORMED", std::string(name) + " values must be numbers");
      r[(int)cand] = it.value().get<double>();
    }
    table.push_back(std::move(r));
  }
  return table;
}

const json& need(const json& j, const char* key, const char* ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw AuditError("MALFORMED", std::string(ctx) + " is missing field '" + key + "'");
  return *it;
}

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

double canonical_ratio(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

ordered_json witness_to_json(const DeviationWitness& w) {
  ordered_json o;
  o["mode"] = witness_mode_name(w.mode);
  if (w.mode == DeviationWitness::Mode::FractionalCore) o["eta"] = canonical_ratio(w.eta);
  o["voters"] = w.voters;
  ordered_json c;
  c["fractional"] = w.committee.fractional;
  if (w.committee.fractional) {
    ordered_json xs = ordered_json::array();
    for (double x : w.committee.x) xs.push_back(canonical_ratio(x));
    c["x"] = std::move(xs);
  } else {
    c["m"] = w.committee.x.size();
    c["members"] = w.committee.members();
  }
  o["committee"] = std::move(c);
  o["ratio"] = canonical_ratio(w.ratio);
  return o;
}

DeviationWitness witness_from_json(const json& j) {
  if (!j.is_object()) throw AuditError("MALFORMED", "witness must be an object");
  DeviationWitness w;
  w.mode = witness_mode_from(need(j, "mode", "witness").get<std::string>());
  if (auto it = j.find("eta"); it != j.end()) w.eta = it->get<double>();
  const json& voters = need(j, "voters", "witness");
  if (!voters.is_array()) throw AuditError("MALFORMED", "witness voters must be an array");
  for (const auto& v : voters) {
    if (!v.is_number_integer())
      throw AuditError("MALFORMED", "witness voters must be integer indices");
    w.voters.push_back(v.get<int>());
  }
  const json& c = need(j, "committee", "witness");
  if (!c.is_object()) throw AuditError("MALFORMED", "witness committee must be an object");
  w.committee.fractional = need(c, "fractional", "witness committee").get<bool>();
  if (w.committee.fractional) {
    const json& xs = need(c, "x", "witness committee");
    if (!xs.is_array())
      throw AuditError("MALFORMED", "witness committee x must be an array");
    for (const auto& x : xs) {
      if (!x.is_number())
        throw AuditError("MALFORMED", "witness committee x entries must be numbers");
      w.committee.x.push_back(x.get<double>());
    }
  } else {
    const json& m = need(c, "m", "witness committee");
    if (!m.is_number_integer() || m.get<long long>() < 0)
      throw AuditError("MALFORMED", "witness committee m must be a nonnegative integer");
    w.committee.x.assign((std::size_t)m.get<long long>(), 0.0);
    const json& members = need(c, "members", "witness committee");
    if (!members.is_array())
      throw AuditError("MALFORMED", "witness committee members must be an array");
    for (const auto& v : members) {
      if (!v.is_number_integer())
        throw AuditError("MALFORMED", "witness committee members must be integer indices");
      long long idx = v.get<long long>();
      if (idx < 0 || (std::size_t)idx >= w.committee.x.size())
        throw AuditError("MALFORMED", "witness committee member index out of range");
      w.committee.x[(std::size_t)idx] = 1.0;
    }
  }
  w.ratio = need(j, "ratio", "witness").get<double>();
  return w;
}

ordered_json prices_to_json(const PriceSystem& ps) {
  ordered_json o;
  o["mode"] = price_mode_name(ps.mode);
  if (ps.mode == PriceSystem::Mode::LindahlFractional) o["eta"] = canonical_ratio(ps.eta);
  o["theta"] = canonical_ratio(ps.theta);
  o["table"] = sparse_table_to_json(ps.prices);
  if (ps.mode == PriceSystem::Mode::LindahlFractional) {
    ordered_json ls = ordered_json::array();
    for (double l : ps.lambda) ls.push_back(canonical_ratio(l));
    o["lambda"] = std::move(ls);
    o["alpha"] = sparse_table_to_json(ps.alpha);
  }
  return o;
}

PriceSystem prices_from_json(const json& j) {
  if (!j.is_object()) throw AuditError("MALFORMED", "price system must be an object");
  PriceSystem ps;
  ps.mode = price_mode_from(need(j, "mode", "price system").get<std::string>());
  if (auto it = j.find("eta"); it != j.end()) ps.eta = it->get<double>();
  ps.theta = need(j, "theta", "price system").get<double>();
  ps.prices = sparse_table_from_json(need(j, "table", "price system"), "price table");
  if (auto it = j.find("lambda"); it != j.end()) {
    if (!it->is_array()) throw AuditError("MALFORMED", "lambda must be an array");
    for (const auto& l : *it) {
      if (!l.is_number()) throw AuditError("MALFORMED", "lambda entries must be numbers");
      ps.lambda.push_back(l.get<double>());
    }
  }
  if (auto it = j.find("alpha"); it != j.end())
    ps.alpha = sparse_table_from_json(*it, "alpha table");
  return ps;
}

ordered_json report_to_json(const AuditReport& r) {
  ordered_json o;
  o["theta_lower"] = bound_to_json(r.theta_lower);
  o["theta_upper"] = bound_to_json(r.theta_upper);
  o["witness"] = r.witness ? witness_to_json(*r.witness) : ordered_json(nullptr);
  o["method"] = r.method;
  o["seed"] = r.seed ? ordered_json(*r.seed) : ordered_json(nullptr);
  o["prices"] = r.prices ? prices_to_json(*r.prices) : ordered_json(nullptr);
  ordered_json d;
  d["lp_iterations"] = r.diagnostics.lp_iterations;
  d["trials"] = r.diagnostics.trials;
  d["successes"] = r.diagnostics.successes;
  d["cuts"] = r.diagnostics.cuts;
  d["enumerated"] = r.diagnostics.enumerated;
  if (r.diagnostics.wall_ms) d["wall_ms"] = canonical_ratio(*r.diagnostics.wall_ms);
  d["notes"] = r.diagnostics.notes;
  o["diagnostics"] = std::move(d);
  return o;
}

AuditReport report_from_json(const json& j) {
  if (!j.is_object()) throw AuditError("MALFORMED", "report must be an object");
  AuditReport r;
  r.theta_lower = bound_from_json(need(j, "theta_lower", "report"), "theta_lower");
  r.theta_upper = bound_from_json(need(j, "theta_upper", "report"), "theta_upper");
  const json& w = need(j, "witness", "report");
  if (!w.is_null()) r.witness = witness_from_json(w);
  r.method = need(j, "method", "report").get<std::string>();
  const json& seed = need(j, "seed", "report");
  if (!seed.is_null()) {
    if (!seed.is_number_integer())
      throw AuditError("MALFORMED", "seed must be an integer or null");
    r.seed = seed.get<std::uint64_t>();
  }
  const json& prices = need(j, "prices", "report");
  if (!prices.is_null()) r.prices = prices_from_json(prices);
  const json& d = need(j, "diagnostics", "report");
  if (!d.is_object()) throw AuditError("MALFORMED", "diagnostics must be an object");
  r.diagnostics.lp_iterations = need(d, "lp_iterations", "diagnostics").get<long long>();
  r.diagnostics.trials = need(d, "trials", "diagnostics").get<long long>();
  r.diagnostics.successes = need(d, "successes", "diagnostics").get<long long>();
  r.diagnostics.cuts = need(d, "cuts", "diagnostics").get<long long>();
  r.diagnostics.enumerated = need(d, "enumerated", "diagnostics").get<long long>();
  if (auto it = d.find("wall_ms"); it != d.end() && !it->is_null())
    r.diagnostics.wall_ms = it->get<double>();
  const json& notes = need(d, "notes", "diagnostics");
  if (!notes.is_array()) throw AuditError("MALFORMED", "notes must be an array");
  for (const auto& n : notes) r.diagnostics.notes.push_back(n.get<std::string>());
  return r;
}

std::string render_report_text(const AuditReport& r) {
  std::ostringstream out;
  out << "method: " << r.method << "\n";
  out << "theta_lower: " << (r.theta_lower ? fmt12(*r.theta_lower) : "unbounded") << "\n";
  out << "theta_upper: " << (r.theta_upper ? fmt12(*r.theta_upper) : "unbounded") << "\n";
  if (r.witness) {
    const DeviationWitness& w = *r.witness;
    out << "witness: mode " << witness_mode_name(w.mode) << ", " << w.voters.size()
        << " voter(s), ";
    if (w.committee.fractional) {
      out << "fractional committee over " << w.committee.x.size() << " candidate(s)";
    } else {
      out << "committee of " << w.committee.members().size() << " candidate(s)";
    }
    out << ", ratio " << fmt12(w.ratio) << "\n";
  } else {
    out << "witness: none\n";
  }
  if (r.seed) out << "seed: " << *r.seed << "\n";
  if (r.prices) {
    std::size_t positive = 0;
    for (const auto& row : r.prices->prices)
      for (const auto& [cand, value] : row)
        if (value > 0.0) ++positive;
    out << "prices: mode " << price_mode_name(r.prices->mode) << ", theta "
        << fmt12(r.prices->theta) << ", " << positive << " positive entr"
        << (positive == 1 ? "y" : "ies") << "\n";
  } else {
    out << "prices: none\n";
  }
  const Diagnostics& d = r.diagnostics;
  out << "lp_iterations: " << d.lp_iterations << "  trials: " << d.trials
      << "  successes: " << d.successes << "  cuts: " << d.cuts
      << "  enumerated: " << d.enumerated << "\n";
  if (d.wall_ms) out << "wall_ms: " << fmt12(*d.wall_ms) << "\n";
  for (const auto& n : d.notes) out << "note: " << n << "\n";
  return out.str();
}

}  // namespace coreaudit
