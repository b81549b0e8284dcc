#pragma once

// JSON documents for every result type. "sigma" holds variances, one per regime
// for switching models and a single entry otherwise; "P" is a list of rows.

#include "regimes/asymptotics.hpp"
#include "regimes/estimation.hpp"
#include "regimes/simulate.hpp"
#include "regimes/testing.hpp"

#include <json.hpp>

#include <string>

namespace regimes {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const ModelSpec& spec);
Json to_json(const Parameters& p);
Json to_json(const FitResult& fit);
Json to_json(const TestResult& test, bool include_fits = true);
Json to_json(const SelectionReport& report);
Json to_json(const AsymptoticNull& null, bool include_draws = false);
/// Full replication logs; wall-clock time is left out so the document is reproducible.
Json to_json(const McReport& report);
Json to_json(const McDesign& design);

/// Inverse maps; throw InvalidParameter on malformed documents.
ModelSpec spec_from_json(const Json& j);
Parameters parameters_from_json(const Json& j);
FitResult fit_from_json(const Json& j);
/// Reads a design file: {"dgp": {...parameters...}, "test": {...spec...}, "n": ..., ...}.
McDesign design_from_json(const Json& j);

/// One CSV row per level: design, n, reps, B, level, rejection_pct, failed_reps, wall_seconds.
std::string mc_report_csv(const McReport& report);

/// "0.05" style key for a nominal level.
std::string level_key(double level);

}  // namespace regimes
