#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vct/analytics.hpp"
#include "vct/controller.hpp"
#include "vct/errors.hpp"
#include "vct/population.hpp"
#include "vct/protocol.hpp"
#include "vct/serialize.hpp"
#include "vct/simulation.hpp"

namespace vct {

inline constexpr int kSchemaVersion = 1;

/// A store lookup for an id that does not exist.
class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

enum class ArtifactKind { population, protocols, parameter_sets, library, profile, report, trace, trial };

std::string_view to_string(ArtifactKind kind) noexcept;
/// Subdirectory of the store holding artifacts of `kind`.
std::string_view directory_of(ArtifactKind kind) noexcept;

/// Directory-of-files trial database.
///
/// Every artifact is one file: a header line
///   {"checksum":"<crc32 hex>","kind":"...","length":N,"schema_version":1}
/// followed by exactly N body bytes. Writes go to a temporary file in the
/// same directory and are renamed into place.
class Store {
 public:
  /// Opens (creating if needed) the store rooted at `root`.
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_of(ArtifactKind kind, const std::string& id) const;
  bool contains(ArtifactKind kind, const std::string& id) const;
  /// Ids of all artifacts of `kind`, sorted.
  std::vector<std::string> list(ArtifactKind kind) const;

  void write(ArtifactKind kind, const std::string& id, const std::string& body) const;
  /// Throws NotFoundError for an unknown id and DataError on a kind,
  /// version, length or checksum mismatch.
  std::string read(ArtifactKind kind, const std::string& id) const;

 private:
  std::filesystem::path root_;
};

/// Ids become file names: nonempty, at most 128 characters of [A-Za-z0-9._-], not starting with a dot.
void validate_artifact_id(const std::string& id);

std::uint32_t crc32_of(const std::string& bytes);
std::string encode_artifact(ArtifactKind kind, const std::string& body);
std::string decode_artifact(ArtifactKind kind, const std::string& file_bytes, const std::string& what);

using ParameterSets = std::map<std::uint64_t, ParameterSet>;

ParameterSets parameter_sets_of(const Population& population);

void save_population(const Store& store, const std::string& id, const Population& population);
Population load_population(const Store& store, const std::string& id);
void save_protocols(const Store& store, const std::string& id, const std::vector<Protocol>& protocols);
std::vector<Protocol> load_protocols(const Store& store, const std::string& id);
void save_parameter_sets(const Store& store, const std::string& id, const ParameterSets& sets);
ParameterSets load_parameter_sets(const Store& store, const std::string& id);
void save_library(const Store& store, const std::string& id, const ProtocolLibrary& library);
ProtocolLibrary load_library(const Store& store, const std::string& id);
/// Profiles are stored under their content hash, which is returned.
std::string save_profile(const Store& store, const DualHormoneParameters& profile);
DualHormoneParameters load_profile(const Store& store, const std::string& hash);
void save_report(const Store& store, const std::string& id, const TrialReport& report);
TrialReport load_report(const Store& store, const std::string& id);
void save_trace(const Store& store, const std::string& id, const Trace& trace);
Trace load_trace(const Store& store, const std::string& id);

struct PopulationFilter {
  std::optional<Sex> sex;
  std::optional<double> weight_min_kg;
  std::optional<double> weight_max_kg;
  std::optional<double> height_min_cm;
  std::optional<double> height_max_cm;
  /// Age in whole years on `reference_date`.
  std::optional<int> age_min;
  std::optional<int> age_max;
  std::chrono::year_month_day reference_date{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}};

  /// Bounds are inclusive.
  bool matches(const Patient& patient) const;
};

int age_in_years(std::chrono::year_month_day dob, std::chrono::year_month_day on);

Population query_population(const Population& population, const PopulationFilter& filter);
Population query_population(const Store& store, const std::string& population_id, const PopulationFilter& filter);

/// How the protocols of a trial are obtained.
struct ProtocolReference {
  enum class Kind { generated, stored } kind = Kind::generated;
  std::string id;  // library id when generated, protocols id when stored
  AnnouncementPolicy policy;
  std::uint64_t seed = 0;

  bool operator==(const ProtocolReference&) const = default;
};

/// Everything needed to re-run a trial from the store.
struct TrialRecord {
  std::string trial_id;
  std::string created_utc;
  std::uint64_t seed = 0;
  std::string model_id;
  std::string controller_id;
  std::string profile_hash;
  std::string population_id;
  ProtocolReference protocols;
  SimulationConfig config;
  std::string report_id;
  std::string trace_id;  // empty when no trace was kept
  Json manifest;         // verbatim copy of the run manifest

  bool operator==(const TrialRecord&) const = default;
};

void to_json(Json& j, const ProtocolReference& v);
void from_json(const Json& j, ProtocolReference& v);
void to_json(Json& j, const TrialRecord& v);
void from_json(const Json& j, TrialRecord& v);

void save_trial_record(const Store& store, const TrialRecord& record);
TrialRecord load_trial_record(const Store& store, const std::string& trial_id);

struct RerunResult {
  TrialReport report;
  TrialOutput output;
  /// True when the canonical report text equals the stored report byte for byte.
  bool identical = false;
};

/// Re-executes a stored trial from its record and referenced artifacts.
RerunResult rerun_trial(const Store& store, const std::string& trial_id, unsigned threads);

/// SQL DDL for the relational mirror of the store.
std::string sql_schema();
/// DDL followed by INSERT statements for every artifact in the store.
std::string export_sql(const Store& store);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace vct
