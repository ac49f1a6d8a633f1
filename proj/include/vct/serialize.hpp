#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "vct/analytics.hpp"
#include "vct/controller.hpp"
#include "vct/errors.hpp"
#include "vct/population.hpp"
#include "vct/protocol.hpp"
#include "vct/simulation.hpp"

namespace vct {

using Json = nlohmann::json;

// JSON mappings found by nlohmann::json through ADL. from_json throws
// ConfigError on missing or mistyped fields.

void to_json(Json& j, const Patient& v);
void from_json(const Json& j, Patient& v);
void to_json(Json& j, const ParameterSet& v);
void from_json(const Json& j, ParameterSet& v);
void to_json(Json& j, const PopulationEntry& v);
void from_json(const Json& j, PopulationEntry& v);
void to_json(Json& j, const DemographicsConfig& v);
void from_json(const Json& j, DemographicsConfig& v);
void to_json(Json& j, const ParameterDistribution& v);
void from_json(const Json& j, ParameterDistribution& v);
void to_json(Json& j, const ParameterDistributionTable& v);
void from_json(const Json& j, ParameterDistributionTable& v);

void to_json(Json& j, const Disturbance& v);
void from_json(const Json& j, Disturbance& v);
void to_json(Json& j, const Protocol& v);
void from_json(const Json& j, Protocol& v);
void to_json(Json& j, const DayEvent& v);
void from_json(const Json& j, DayEvent& v);
void to_json(Json& j, const BasisDay& v);
void from_json(const Json& j, BasisDay& v);
void to_json(Json& j, const BasisWeek& v);
void from_json(const Json& j, BasisWeek& v);
void to_json(Json& j, const Season& v);
void from_json(const Json& j, Season& v);
void to_json(Json& j, const ProtocolLibrary& v);
void from_json(const Json& j, ProtocolLibrary& v);
void to_json(Json& j, const AnnouncementPolicy& v);
void from_json(const Json& j, AnnouncementPolicy& v);

void to_json(Json& j, const ModeParameters& v);
void from_json(const Json& j, ModeParameters& v);
void to_json(Json& j, const DualHormoneParameters& v);
void from_json(const Json& j, DualHormoneParameters& v);

void to_json(Json& j, const HistogramSpec& v);
void from_json(const Json& j, HistogramSpec& v);
void to_json(Json& j, const AnalyticsConfig& v);
void from_json(const Json& j, AnalyticsConfig& v);
void to_json(Json& j, const GridSpec& v);
void from_json(const Json& j, GridSpec& v);
void to_json(Json& j, const TrialAccumulator& v);
void from_json(const Json& j, TrialAccumulator& v);
void to_json(Json& j, const TrialMetadata& v);
void from_json(const Json& j, TrialMetadata& v);
/// Derived sections are written for readers but recomputed from the accumulator on load.
void to_json(Json& j, const TrialReport& v);
void from_json(const Json& j, TrialReport& v);
void to_json(Json& j, const ComparisonReport& v);

void to_json(Json& j, const SimulationConfig& v);
void from_json(const Json& j, SimulationConfig& v);
void to_json(Json& j, const Trace& v);
void from_json(const Json& j, Trace& v);

/// Deterministic text form: sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const Json& j);

/// Parses a JSON file. Throws DataError when unreadable or malformed.
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

inline constexpr int kPopulationSchemaVersion = 1;

/// Header line {"format":"vct-population","schema_version":1,"patients":N,
/// "parameter_attempts":A}, then one population entry per line.
std::string population_to_jsonl(const Population& population);
Population population_from_jsonl(const std::string& text);

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string content_hash(const Json& j);
std::string profile_hash(const DualHormoneParameters& params);

template <class T>
T parse_as(const Json& j, const char* what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace vct
