#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "vct/serialize.hpp"
#include "vct/storage.hpp"

namespace vct {

/// Recipe for a population that is generated when the store does not have it yet.
struct PopulationRecipe {
  std::uint64_t seed = 0;
  std::uint64_t patients = 0;
  std::filesystem::path demographics;
  std::filesystem::path parameters;
};

/// A single file describing one trial. Relative paths are resolved against
/// the manifest's directory.
///
/// {
///   "trial_id": "trial_a",
///   "store": "store",
///   "population": {"id": "...", "generate": {"seed": 1, "patients": 100,
///                  "demographics": "...", "parameters": "..."}},
///   "protocols": {"library": "basis_days.json", "seed": 1, "announcement": {...}}
///             or {"stored": "<protocols id>"},
///   "model": "hovorka_ext",
///   "controller": "<profile path>" or {inline profile},
///   "simulation": {SimulationConfig},
///   "output": "out/trial_a"
/// }
struct RunManifest {
  std::string trial_id;
  std::filesystem::path store;
  std::string population_id;  // derived from the recipe when empty
  std::optional<PopulationRecipe> population_recipe;
  std::optional<std::filesystem::path> library;
  std::string stored_protocols;
  AnnouncementPolicy announcement;
  std::uint64_t protocol_seed = 0;
  std::string model_id = "hovorka_ext";
  DualHormoneParameters controller;
  SimulationConfig simulation;
  std::filesystem::path output;
  Json source;  // the manifest as written

  /// Throws ConfigError when a required field is missing or inconsistent.
  void validate() const;
};

RunManifest parse_manifest(const Json& j, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);

struct RunOptions {
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;      // overrides simulation and protocol seeds
  std::optional<std::uint64_t> patients;  // overrides the recipe size
  std::optional<std::filesystem::path> out;
  std::optional<TracePolicy> store_trace;
  std::function<void(const std::string&)> progress;
};

/// Applies command-line overrides and writes them back into the manifest copy kept in the record.
RunManifest apply_options(RunManifest manifest, const RunOptions& options);

struct RunOutcome {
  TrialRecord record;
  TrialReport report;
  TrialOutput output;
  std::filesystem::path output_dir;
  double wall_seconds = 0.0;
};

/// Resolves every reference, runs the trial, and writes the report, the
/// figure exports, the worst-case trace and the TrialRecord.
RunOutcome execute_run(const RunManifest& manifest, const RunOptions& options);

/// Population id used when a recipe carries none.
std::string recipe_population_id(const PopulationRecipe& recipe, const DemographicsConfig& demographics,
                                 const ParameterDistributionTable& table);

/// Loads the population from the store, generating and saving it first when
/// it is missing and a recipe is given.
Population resolve_population(const Store& store, const RunManifest& manifest, std::string& population_id,
                              unsigned threads);

/// Human-readable or JSON summary of a finished run.
Json run_summary(const RunOutcome& outcome);
std::string format_summary_text(const Json& summary);

}  // namespace vct
