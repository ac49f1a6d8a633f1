#include "vct/population.hpp"

#include <cmath>
#include <string>

#include "vct/errors.hpp"
#include "vct/parallel.hpp"

namespace vct {

namespace {

double positive_normal(RngStream& rng, const NormalSpec& spec, const char* what) {
  for (std::uint64_t attempt = 0; attempt < kPatientRejectionBudget; ++attempt) {
    const double v = spec.mean + spec.sd * rng.gaussian();
    if (v > 0.0) return v;
  }
  throw SamplingError(std::string("no positive draw for ") + what + " within the rejection budget");
}

const std::string& pick(RngStream& rng, const std::vector<std::string>& table) {
  std::uniform_int_distribution<std::size_t> index(0, table.size() - 1);
  return table[index(rng)];
}

double draw(RngStream& rng, const ParameterDistribution& d) {
  switch (d.kind) {
    case DistributionKind::normal:
      return d.mean + d.sd * rng.gaussian();
    case DistributionKind::lognormal:
      return std::exp(d.mean + d.sd * rng.gaussian());
    case DistributionKind::fixed:
      return d.mean;
  }
  return d.mean;
}

}  // namespace

void DemographicsConfig::validate() const {
  for (const auto* spec : {&height_cm, &body_weight_kg, &resting_heart_rate}) {
    if (!(spec->sd >= 0.0) || !std::isfinite(spec->mean)) {
      throw ConfigError("demographics: standard deviations must be >= 0 and means finite");
    }
  }
  if (!dob_min.ok() || !dob_max.ok() || std::chrono::sys_days(dob_max) < std::chrono::sys_days(dob_min)) {
    throw ConfigError("demographics: date-of-birth range is empty or invalid");
  }
  if (female_first_names.empty() || male_first_names.empty() || last_names.empty() || places.empty()) {
    throw ConfigError("demographics: name and place lookup tables must be nonempty");
  }
}

const ParameterDistribution* ParameterDistributionTable::find(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Patient sample_patient(RngStream& rng, const DemographicsConfig& config, std::uint64_t id) {
  config.validate();
  Patient patient;
  patient.id = id;
  patient.sex = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? Sex::female : Sex::male;
  patient.first_name = pick(rng, patient.sex == Sex::female ? config.female_first_names : config.male_first_names);
  patient.last_name = pick(rng, config.last_names);
  patient.place_of_birth = pick(rng, config.places);

  const auto first = std::chrono::sys_days(config.dob_min).time_since_epoch().count();
  const auto last = std::chrono::sys_days(config.dob_max).time_since_epoch().count();
  const auto day = std::uniform_int_distribution<long long>(first, last)(rng);
  patient.date_of_birth = std::chrono::year_month_day(std::chrono::sys_days(std::chrono::days(day)));

  patient.height_cm = positive_normal(rng, config.height_cm, "height");
  patient.body_weight_kg = positive_normal(rng, config.body_weight_kg, "body weight");
  patient.resting_heart_rate = positive_normal(rng, config.resting_heart_rate, "resting heart rate");
  return patient;
}

std::vector<std::string> check_parameter_set(const ParameterSet& params, const ParameterDistributionTable& table,
                                             const PatientModel& model) {
  std::vector<std::string> violations;
  for (const auto& [name, value] : params.values) {
    if (!(value >= 0.0)) violations.push_back(name + " is negative");
  }
  for (const auto& d : table.parameters) {
    const auto it = params.values.find(d.name);
    if (it == params.values.end()) {
      violations.push_back(d.name + " is missing");
      continue;
    }
    if (d.kind == DistributionKind::normal && !(std::abs(it->second - d.mean) <= d.sd)) {
      violations.push_back(d.name + " lies outside one standard deviation of its mean");
    }
  }
  if (!violations.empty()) return violations;
  try {
    const auto ss = model.steady_state(model.bind(params), table.target_bg);
    if (!(ss.basal_u_per_h >= table.min_basal_u_per_h)) violations.push_back("basal rate below the minimum");
    if (params.basal_u_per_h != ss.basal_u_per_h) violations.push_back("recorded basal rate differs from steady state");
  } catch (const SimulationError& e) {
    violations.push_back(std::string("steady state: ") + e.what());
  }
  return violations;
}

SampledParameters sample_parameter_set(RngStream& rng, const Patient& patient, const ParameterDistributionTable& table,
                                       const PatientModel& model) {
  if (table.parameters.empty()) throw ConfigError("parameter-distribution table is empty");
  if (table.find("BW") != nullptr) throw ConfigError("BW comes from the patient record, not the distribution table");
  for (const auto& info : model.parameters()) {
    if (info.name != "BW" && table.find(info.name) == nullptr) {
      throw ConfigError("distribution table lacks model parameter '" + info.name + "'");
    }
  }

  ParameterSet candidate;
  for (std::uint64_t attempt = 1; attempt <= kParameterRejectionBudget; ++attempt) {
    candidate.values.clear();
    candidate.values["BW"] = patient.body_weight_kg;
    bool ok = patient.body_weight_kg > 0.0;
    for (const auto& d : table.parameters) {
      const double v = draw(rng, d);
      candidate.values[d.name] = v;
      if (!(v >= 0.0)) ok = false;
      if (d.kind == DistributionKind::normal && !(std::abs(v - d.mean) <= d.sd)) ok = false;
    }
    if (!ok) continue;
    try {
      const auto ss = model.steady_state(model.bind(candidate), table.target_bg);
      if (!(ss.basal_u_per_h >= table.min_basal_u_per_h)) continue;
      candidate.basal_u_per_h = ss.basal_u_per_h;
    } catch (const SimulationError&) {
      continue;
    }
    return SampledParameters{std::move(candidate), attempt};
  }
  throw SamplingError("parameter rejection budget exhausted for patient " + std::to_string(patient.id) +
                      " (inconsistent distribution table?)");
}

std::vector<Patient> Population::patients() const {
  std::vector<Patient> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.patient);
  return out;
}

Population generate_population(std::uint64_t seed, std::uint64_t n, const DemographicsConfig& demographics,
                               const ParameterDistributionTable& table, const PatientModel& model, unsigned threads) {
  if (n == 0) throw ConfigError("population size must be at least 1");
  demographics.validate();
  Population population;
  population.entries.resize(n);
  std::vector<std::uint64_t> attempts(n, 0);
  parallel_for(n, threads, [&](unsigned, std::size_t i) {
    RngStream demo_rng(seed, i, StreamRole::demographics);
    RngStream param_rng(seed, i, StreamRole::parameters);
    auto& entry = population.entries[i];
    entry.patient = sample_patient(demo_rng, demographics, i);
    auto sampled = sample_parameter_set(param_rng, entry.patient, table, model);
    entry.params = std::move(sampled.params);
    attempts[i] = sampled.attempts;
  });
  for (auto a : attempts) population.parameter_attempts += a;
  return population;
}

std::string_view to_string(Sex sex) noexcept { return sex == Sex::female ? "female" : "male"; }

Sex parse_sex(std::string_view text) {
  if (text == "female") return Sex::female;
  if (text == "male") return Sex::male;
  throw DataError("unknown sex '" + std::string(text) + "'");
}

std::string_view to_string(DistributionKind kind) noexcept {
  switch (kind) {
    case DistributionKind::normal:
      return "normal";
    case DistributionKind::lognormal:
      return "lognormal";
    case DistributionKind::fixed:
      return "fixed";
  }
  return "fixed";
}

DistributionKind parse_distribution_kind(std::string_view text) {
  if (text == "normal") return DistributionKind::normal;
  if (text == "lognormal") return DistributionKind::lognormal;
  if (text == "fixed") return DistributionKind::fixed;
  throw ConfigError("unknown distribution kind '" + std::string(text) + "'");
}

}  // namespace vct
