#pragma once

// JSON and CSV serialisation of records, configurations and results.
// Non-finite numbers are written as the strings "inf", "-inf" and "nan" so
// that every document round-trips.

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "longtail/bayes.hpp"
#include "longtail/diagnostics.hpp"
#include "longtail/likelihood.hpp"
#include "longtail/nonparam.hpp"
#include "longtail/simlab.hpp"

namespace longtail {

using Json = nlohmann::json;

Json json_number(double x);
double number_from_json(const Json& j);

void to_json(Json& j, const Interval& v);
void from_json(const Json& j, Interval& v);
void to_json(Json& j, const IntervalSet& v);
void from_json(const Json& j, IntervalSet& v);
void to_json(Json& j, const LifetimeRecord& v);
void from_json(const Json& j, LifetimeRecord& v);
void to_json(Json& j, const ModelSpec& v);
void from_json(const Json& j, ModelSpec& v);
void to_json(Json& j, const ParamVector& v);
void from_json(const Json& j, ParamVector& v);
void to_json(Json& j, const FitResult& v);
void from_json(const Json& j, FitResult& v);
void to_json(Json& j, const ProfileLimit& v);
void from_json(const Json& j, ProfileLimit& v);
void to_json(Json& j, const ProfileTrace& v);
void from_json(const Json& j, ProfileTrace& v);
void to_json(Json& j, const TestResult& v);
void from_json(const Json& j, TestResult& v);
void to_json(Json& j, const ShapeTestResult& v);
void from_json(const Json& j, ShapeTestResult& v);
void to_json(Json& j, const NPEstimate& v);
void from_json(const Json& j, NPEstimate& v);
void to_json(Json& j, const PosteriorSample& v);
void from_json(const Json& j, PosteriorSample& v);
void to_json(Json& j, const HazardBand& v);
void from_json(const Json& j, HazardBand& v);
void to_json(Json& j, const QQPoint& v);
void from_json(const Json& j, QQPoint& v);
void to_json(Json& j, const QQData& v);
void from_json(const Json& j, QQData& v);
void to_json(Json& j, const RateFunction& v);
void from_json(const Json& j, RateFunction& v);
void to_json(Json& j, const CohortSimConfig& v);
void from_json(const Json& j, CohortSimConfig& v);
void to_json(Json& j, const TabulationConfig& v);
void from_json(const Json& j, TabulationConfig& v);
void to_json(Json& j, const EstimatorSummary& v);
void from_json(const Json& j, EstimatorSummary& v);
void to_json(Json& j, const ExtinctCohortResult& v);
void from_json(const Json& j, ExtinctCohortResult& v);
void to_json(Json& j, const TabulationResult& v);
void from_json(const Json& j, TabulationResult& v);

/// Reads a whole file; throws DataError when it cannot be opened.
std::string read_text(const std::filesystem::path& path);
/// Writes atomically enough for batch use (truncate and write).
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Records document: {"units": ..., "records": [...]}.
std::vector<LifetimeRecord> read_records(const std::filesystem::path& path, std::string* units = nullptr);
void write_records(const std::filesystem::path& path, std::span<const LifetimeRecord> records,
                   const std::string& units);

// Plot data.
std::string np_csv(const NPEstimate& np);
std::string qq_csv(const QQData& qq);
std::string profile_csv(const ProfileTrace& p);
std::string hazard_band_csv(const HazardBand& b);
std::string draws_csv(const PosteriorSample& s);
std::string extinct_csv(const ExtinctCohortResult& r);
std::string tabulation_csv(const TabulationResult& r);

/// Aligned human-readable table of estimates, standard errors and loglik.
std::string fit_table(std::span<const FitResult> fits);

}  // namespace longtail
