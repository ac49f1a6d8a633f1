#include <doctest.h>

#include <cmath>
#include <set>

#include "../oracles/validators.hpp"
#include "../support/fixtures.hpp"
#include "vct/errors.hpp"
#include "vct/population.hpp"
#include "vct/serialize.hpp"

using namespace vct;

namespace {

DemographicsConfig degenerate_demographics() {
  auto d = fixtures::demographics();
  d.height_cm = {180.0, 0.0};
  d.body_weight_kg = {70.0, 0.0};
  d.resting_heart_rate = {60.0, 0.0};
  return d;
}

ParameterDistributionTable degenerate_table() {
  auto t = fixtures::table();
  for (auto& row : t.parameters) row.sd = 0.0;
  return t;
}

/// Patient whose implied basal rate at the table means is 1 U/h. The rate
/// scales linearly with body weight, so one probe fixes the weight.
Patient unit_basal_patient() {
  auto p = fixtures::nominal_patient().patient;
  p.body_weight_kg *= 1.0 / fixtures::nominal_patient().params.basal_u_per_h;
  return p;
}

}  // namespace

TEST_CASE("zero-variance demographics reproduce the means") {
  RngStream rng(1, 0, StreamRole::demographics);
  const auto p = sample_patient(rng, degenerate_demographics(), 3);
  CHECK(p.id == 3);
  CHECK(p.height_cm == 180.0);
  CHECK(p.body_weight_kg == 70.0);
  CHECK(p.resting_heart_rate == 60.0);
}

TEST_CASE("sampled attributes match the configured moments") {
  auto d = fixtures::demographics();
  d.body_weight_kg = {70.0, 10.0};
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  int female = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(11, static_cast<std::uint64_t>(i), StreamRole::demographics);
    const auto p = sample_patient(rng, d, static_cast<std::uint64_t>(i));
    sum += p.body_weight_kg;
    sq += p.body_weight_kg * p.body_weight_kg;
    if (p.sex == Sex::female) ++female;
    REQUIRE(p.height_cm > 0.0);
    REQUIRE(p.resting_heart_rate > 0.0);
    REQUIRE(std::chrono::sys_days(p.date_of_birth) >= std::chrono::sys_days(d.dob_min));
    REQUIRE(std::chrono::sys_days(p.date_of_birth) <= std::chrono::sys_days(d.dob_max));
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - 70.0) < 0.2);
  CHECK(std::abs(sd - 10.0) < 0.2);
  CHECK(std::abs(female / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("degenerate sampler config is rejected") {
  auto d = fixtures::demographics();
  d.body_weight_kg = {-1000.0, 1.0};
  RngStream rng(1, 0, StreamRole::demographics);
  CHECK_THROWS_AS(sample_patient(rng, d), SamplingError);
  d.body_weight_kg = {70.0, -1.0};
  CHECK_THROWS_AS(sample_patient(rng, d), ConfigError);
}

TEST_CASE("degenerate parameter distributions are accepted on the first draw") {
  const auto table = degenerate_table();
  RngStream rng(1, 0, StreamRole::parameters);
  const auto s = sample_parameter_set(rng, unit_basal_patient(), table, fixtures::model());
  CHECK(s.attempts == 1);
  CHECK(s.params.basal_u_per_h == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(check_parameter_set(s.params, table, fixtures::model()).empty());
}

TEST_CASE("a parameter set implying a basal rate below 0.4 U/h is rejected") {
  // Small patients need little insulin; with a high minimum every draw fails.
  auto table = degenerate_table();
  const auto patient = unit_basal_patient();
  RngStream probe(1, 0, StreamRole::parameters);
  const double basal = sample_parameter_set(probe, patient, table, fixtures::model()).params.basal_u_per_h;
  table.min_basal_u_per_h = basal * 1.01;
  RngStream rng(1, 0, StreamRole::parameters);
  CHECK_THROWS_AS(sample_parameter_set(rng, patient, table, fixtures::model()), SamplingError);

  // Scaling body weight down until the implied basal is 0.3 U/h is rejected by the checker.
  auto set = fixtures::nominal_patient().params;
  set.values["BW"] *= 0.3 / set.basal_u_per_h;
  set.basal_u_per_h = fixtures::model().steady_state(fixtures::model().bind(set), 6.0).basal_u_per_h;
  CHECK(set.basal_u_per_h == doctest::Approx(0.3).epsilon(1e-6));
  CHECK_FALSE(check_parameter_set(set, fixtures::table(), fixtures::model()).empty());
  CHECK_FALSE(oracle::check_parameters(set, fixtures::table()).basal_ok);
}

TEST_CASE("accepted parameter sets pass the standalone validator") {
  const auto table = fixtures::table();
  const auto pop = fixtures::population(3, 500);
  for (const auto& e : pop.entries) {
    const auto v = oracle::check_parameters(e.params, table);
    REQUIRE(v.nonnegative);
    REQUIRE(v.within_one_sd);
    REQUIRE(v.basal_ok);
    REQUIRE(std::abs(oracle::steady_basal_u_per_h(e.params.values, 6.0) - e.params.basal_u_per_h) <
            1e-9 * e.params.basal_u_per_h);
  }
  CHECK(pop.parameter_attempts >= pop.entries.size());
}

TEST_CASE("generation is deterministic and thread-count invariant") {
  const auto a = fixtures::population(42, 1);
  const auto b = fixtures::population(42, 1);
  CHECK(a.entries == b.entries);

  const auto one = fixtures::population(42, 200, 1);
  const auto eight = fixtures::population(42, 200, 8);
  CHECK(population_to_jsonl(one) == population_to_jsonl(eight));
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < one.entries.size(); ++i) {
    CHECK(one.entries[i].patient.id == i);
    ids.insert(one.entries[i].patient.id);
  }
  CHECK(ids.size() == 200);

  // Prefix stability: growing the population keeps existing patients.
  const auto more = fixtures::population(42, 210);
  for (std::size_t i = 0; i < one.entries.size(); ++i) REQUIRE(more.entries[i] == one.entries[i]);
}

TEST_CASE("population size zero and incomplete tables are configuration errors") {
  CHECK_THROWS_AS(fixtures::population(1, 0), ConfigError);
  auto table = fixtures::table();
  table.parameters.pop_back();
  RngStream rng(1, 0, StreamRole::parameters);
  CHECK_THROWS_AS(sample_parameter_set(rng, fixtures::nominal_patient().patient, table, fixtures::model()), ConfigError);
}
