#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "vct/physiology.hpp"
#include "vct/rng.hpp"

namespace vct {

enum class Sex { female, male };

struct Patient {
  std::uint64_t id = 0;
  std::string first_name;
  std::string last_name;
  std::chrono::year_month_day date_of_birth{};
  std::string place_of_birth;
  Sex sex = Sex::female;
  double height_cm = 0.0;
  double body_weight_kg = 0.0;
  double resting_heart_rate = 0.0;

  bool operator==(const Patient&) const = default;
};

struct NormalSpec {
  double mean = 0.0;
  double sd = 0.0;
};

struct DemographicsConfig {
  NormalSpec height_cm{172.0, 9.0};
  NormalSpec body_weight_kg{75.0, 12.0};
  NormalSpec resting_heart_rate{68.0, 8.0};
  std::chrono::year_month_day dob_min{std::chrono::year{1950}, std::chrono::January, std::chrono::day{1}};
  std::chrono::year_month_day dob_max{std::chrono::year{2005}, std::chrono::December, std::chrono::day{31}};
  std::vector<std::string> female_first_names;
  std::vector<std::string> male_first_names;
  std::vector<std::string> last_names;
  std::vector<std::string> places;

  /// Throws ConfigError on negative deviations, an empty date range or empty lookup tables.
  void validate() const;
};

enum class DistributionKind { normal, lognormal, fixed };

/// One row of the parameter-distribution table. For lognormal rows, mean and
/// sd describe the underlying normal of log(value). Fixed rows use `mean`.
struct ParameterDistribution {
  std::string name;
  DistributionKind kind = DistributionKind::fixed;
  double mean = 0.0;
  double sd = 0.0;
  std::string unit;
  std::string source;

  bool operator==(const ParameterDistribution&) const = default;
};

struct ParameterDistributionTable {
  std::string model_id = "hovorka_ext";
  double target_bg = 6.0;
  double min_basal_u_per_h = 0.4;
  std::vector<ParameterDistribution> parameters;

  const ParameterDistribution* find(const std::string& name) const;
  bool operator==(const ParameterDistributionTable&) const = default;
};

inline constexpr std::uint64_t kPatientRejectionBudget = 10'000;
inline constexpr std::uint64_t kParameterRejectionBudget = 1'000'000;

/// Draws demographics. Normal attributes are re-drawn until positive.
/// Throws SamplingError when the rejection budget is exhausted.
Patient sample_patient(RngStream& rng, const DemographicsConfig& config, std::uint64_t id = 0);

struct SampledParameters {
  ParameterSet params;
  std::uint64_t attempts = 0;
};

/// Rejection-samples a parameter set until every value is nonnegative, every
/// normally distributed value lies within one standard deviation of its mean,
/// and the implied steady-state basal rate (at the table's target glucose) is
/// at least the table's minimum. Whole sets are redrawn on any violation.
SampledParameters sample_parameter_set(RngStream& rng, const Patient& patient, const ParameterDistributionTable& table,
                                       const PatientModel& model);

/// Violations of the acceptance rules for `params` (empty when accepted).
std::vector<std::string> check_parameter_set(const ParameterSet& params, const ParameterDistributionTable& table,
                                             const PatientModel& model);

struct PopulationEntry {
  Patient patient;
  ParameterSet params;

  bool operator==(const PopulationEntry&) const = default;
};

struct Population {
  std::vector<PopulationEntry> entries;
  /// Total parameter draws across all patients (accepted + rejected).
  std::uint64_t parameter_attempts = 0;

  std::vector<Patient> patients() const;
};

/// Pure function of (seed, n, configs): ids are 0..n-1 and each id owns its
/// own random streams, so the result does not depend on `threads`.
Population generate_population(std::uint64_t seed, std::uint64_t n, const DemographicsConfig& demographics,
                               const ParameterDistributionTable& table, const PatientModel& model,
                               unsigned threads = 1);

std::string_view to_string(Sex sex) noexcept;
Sex parse_sex(std::string_view text);
std::string_view to_string(DistributionKind kind) noexcept;
DistributionKind parse_distribution_kind(std::string_view text);

}  // namespace vct
