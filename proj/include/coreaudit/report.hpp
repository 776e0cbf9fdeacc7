#pragma once

#include <optional>
#include <string>
#include <utility>

#include "coreaudit/model.hpp"
#include "json.hpp"

namespace coreaudit {

// Ratios are reported with 12 significant digits; the stored double is the
// reparse of that rendering so the JSON number equals the printed value.
double canonical_ratio(double v);

// Report <-> JSON.  Field order is fixed, doubles are canonicalized, and
// optional ratio bounds serialize as the string sentinel "unbounded", so the
// bytes are deterministic for identical inputs.  report_from_json accepts
// any object carrying the report fields (extra envelope keys are ignored)
// and round-trips everything report_to_json emits.
nlohmann::ordered_json report_to_json(const AuditReport& r);
AuditReport report_from_json(const nlohmann::json& j);

nlohmann::ordered_json witness_to_json(const DeviationWitness& w);
DeviationWitness witness_from_json(const nlohmann::json& j);
nlohmann::ordered_json prices_to_json(const PriceSystem& ps);
PriceSystem prices_from_json(const nlohmann::json& j);

// Human-readable rendering of the same report.
std::string render_report_text(const AuditReport& r);

// Machine-readable verdict on a price system: (error code, message), or
// empty when the system passes every check.  check_prices is the boolean
// view of the same test.
std::optional<std::pair<std::string, std::string>> price_system_violation(
    const AuditInstance& inst, const PriceSystem& ps);

}  // namespace coreaudit
