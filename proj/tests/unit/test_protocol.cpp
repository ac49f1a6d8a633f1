#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "../support/fixtures.hpp"
#include "vct/protocol.hpp"

using namespace vct;

namespace {

int count_meals(const std::vector<Disturbance>& ds) {
  return static_cast<int>(std::count_if(ds.begin(), ds.end(), [](const Disturbance& d) { return d.kind == DisturbanceKind::meal; }));
}

int count_exercise(const std::vector<Disturbance>& ds) {
  return static_cast<int>(ds.size()) - count_meals(ds);
}

}  // namespace

TEST_CASE("meal sizes scale linearly with body weight") {
  CHECK(meal_grams(MealClass::large, 70.0) == doctest::Approx(90.3));
  CHECK(meal_grams(MealClass::medium, 70.0) == doctest::Approx(60.2));
  CHECK(meal_grams(MealClass::small, 70.0) == doctest::Approx(39.9));
  CHECK(meal_grams(MealClass::snack, 70.0) == doctest::Approx(20.3));
  CHECK(meal_grams(MealClass::medium, 1e-9) == doctest::Approx(0.86e-9));
  for (auto m : {MealClass::large, MealClass::medium, MealClass::small, MealClass::snack}) {
    CHECK(meal_grams(m, 140.0) == doctest::Approx(2.0 * meal_grams(m, 70.0)));
  }
}

TEST_CASE("basis days: movie night adds one snack and late night two") {
  const auto lib = fixtures::library();
  for (auto sc : {SeasonClass::winter_autumn, SeasonClass::summer_spring}) {
    const auto standard = compose_day(lib.day(DayType::standard, sc), 70.0, 0.0);
    const auto movie = compose_day(lib.day(DayType::movie_night, sc), 70.0, 0.0);
    const auto late = compose_day(lib.day(DayType::late_night, sc), 70.0, 0.0);
    const auto active = compose_day(lib.day(DayType::active, sc), 70.0, 0.0);
    CHECK(count_meals(movie) == count_meals(standard) + 1);
    CHECK(count_meals(late) == count_meals(standard) + 2);
    CHECK(count_exercise(active) == 1);
    CHECK(count_exercise(standard) == 0);
    CHECK(count_meals(active) == count_meals(standard));
  }
}

TEST_CASE("compose_day offsets events and sizes meals by weight") {
  const auto lib = fixtures::library();
  const auto& day = lib.day(DayType::standard, SeasonClass::winter_autumn);
  const auto ds = compose_day(day, 80.0, 3 * kSecondsPerDay);
  REQUIRE(ds.size() == day.events.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds[i].start_s == 3 * kSecondsPerDay + day.events[i].clock_s);
    CHECK(ds[i].end_s == ds[i].start_s + day.events[i].duration_s);
    CHECK(ds[i].magnitude == doctest::Approx(meal_grams(day.events[i].meal, 80.0)));
    CHECK(ds[i].announced);
    CHECK(ds[i].announced_magnitude == ds[i].magnitude);
  }
  // Winter standard day: small breakfast, medium lunch, afternoon snack, large dinner.
  CHECK(day.events.back().meal == MealClass::large);
  // Summer and spring: the dinner is medium and the snack comes before lunch.
  const auto& summer = lib.day(DayType::standard, SeasonClass::summer_spring);
  CHECK(summer.events.back().meal == MealClass::medium);
  CHECK(summer.events[1].meal == MealClass::snack);
}

TEST_CASE("compose_week keeps the day multiset and never puts an active day next to a late night") {
  const auto lib = fixtures::library();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (auto wt : {WeekType::standard, WeekType::active, WeekType::vacation}) {
      RngStream rng(seed, 0, StreamRole::protocol);
      std::vector<DayType> layout;
      const auto ds = compose_week(lib, lib.week(wt), SeasonClass::winter_autumn, rng, 70.0, 0.0, &layout);
      REQUIRE(layout.size() == 7);
      std::array<int, kDayTypeCount> counts{};
      for (auto d : layout) ++counts[static_cast<std::size_t>(d)];
      REQUIRE(counts == lib.week(wt).day_counts);
      if (wt == WeekType::standard) {
        for (std::size_t i = 0; i + 1 < 7; ++i) {
          const bool bad = (layout[i] == DayType::active && layout[i + 1] == DayType::late_night) ||
                           (layout[i] == DayType::late_night && layout[i + 1] == DayType::active);
          REQUIRE_FALSE(bad);
        }
      }
      for (std::size_t i = 1; i < ds.size(); ++i) REQUIRE(ds[i - 1].start_s <= ds[i].start_s);
      for (const auto& d : ds) {
        REQUIRE(d.start_s >= 0.0);
        REQUIRE(d.end_s <= kSecondsPerWeek);
      }
    }
  }
}

TEST_CASE("compose_year is deterministic and valid") {
  const auto lib = fixtures::library();
  const auto a = compose_year(lib, 7, 70.0);
  const auto b = compose_year(lib, 7, 70.0);
  CHECK(a == b);
  CHECK(a.horizon_s == 52 * 7 * 86400.0);
  CHECK(validate_protocol(a).empty());
  CHECK_FALSE(compose_year(lib, 8, 70.0) == a);

  const auto y = compose_year_with_layout(lib, 7, 70.0);
  REQUIRE(y.layout.size() == 364);
  int vacation_weeks = 0;
  for (std::size_t w = 0; w < 52; ++w) {
    if (y.layout[w * 7].week == WeekType::vacation) ++vacation_weeks;
  }
  CHECK(vacation_weeks == 3 + 1 + 3 + 1);
}

TEST_CASE("validate_protocol reports overlaps and bounds") {
  Protocol empty;
  CHECK(validate_protocol(empty).empty());

  Protocol p;
  p.horizon_s = 86400.0;
  p.disturbances.push_back({DisturbanceKind::meal, 100.0, 1000.0, 50.0, true, 50.0});
  p.disturbances.push_back({DisturbanceKind::meal, 500.0, 1400.0, 20.0, true, 20.0});
  const auto v = validate_protocol(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("100") != std::string::npos);
  CHECK(v[0].find("500") != std::string::npos);

  // A meal during exercise is fine; exercise overlapping exercise is not.
  p.disturbances.pop_back();
  p.disturbances.push_back({DisturbanceKind::exercise, 200.0, 3000.0, 0.5, true, 0.0});
  CHECK(validate_protocol(p).empty());
  p.disturbances.push_back({DisturbanceKind::exercise, 2000.0, 4000.0, 0.5, true, 0.0});
  CHECK(validate_protocol(p).size() == 1);

  Protocol out;
  out.horizon_s = 1000.0;
  out.disturbances.push_back({DisturbanceKind::meal, 900.0, 1800.0, 10.0, true, 10.0});
  CHECK_FALSE(validate_protocol(out).empty());
  Protocol inverted;
  inverted.horizon_s = 1000.0;
  inverted.disturbances.push_back({DisturbanceKind::meal, 500.0, 400.0, 10.0, true, 10.0});
  CHECK_FALSE(validate_protocol(inverted).empty());
}

TEST_CASE("announcement policies") {
  const auto lib = fixtures::library();
  const auto year = compose_year(lib, 3, 70.0);

  SUBCASE("identity policy leaves the protocol unchanged") {
    RngStream rng(1, 0, StreamRole::announcement);
    CHECK(apply_announcement_policy(year, {}, rng) == year);
  }
  SUBCASE("full unannounced") {
    RngStream rng(1, 0, StreamRole::announcement);
    const auto p = apply_announcement_policy(year, {1.0, 0.0, 1.0, 1.0}, rng);
    for (const auto& d : p.disturbances) {
      if (d.kind == DisturbanceKind::meal) REQUIRE_FALSE(d.announced);
    }
  }
  SUBCASE("fractions over many meals") {
    RngStream rng(1, 0, StreamRole::announcement);
    const auto p = apply_announcement_policy(year, {0.25, 0.2, 0.5, 1.5}, rng);
    int meals = 0;
    int unannounced = 0;
    int rescaled = 0;
    for (std::size_t i = 0; i < p.disturbances.size(); ++i) {
      const auto& d = p.disturbances[i];
      REQUIRE(d.magnitude == year.disturbances[i].magnitude);
      if (d.kind != DisturbanceKind::meal) continue;
      ++meals;
      if (!d.announced) {
        ++unannounced;
      } else if (d.announced_magnitude != d.magnitude) {
        ++rescaled;
        const double f = d.announced_magnitude / d.magnitude;
        REQUIRE(f >= 0.5 - 1e-12);
        REQUIRE(f <= 1.5 + 1e-12);
      }
    }
    REQUIRE(meals > 1500);
    CHECK(std::abs(unannounced / static_cast<double>(meals) - 0.25) < 0.02);
    CHECK(rescaled > 0);
  }
}

TEST_CASE("disturbance cursor holds values piecewise constant") {
  Protocol p;
  p.horizon_s = 86400.0;
  p.disturbances.push_back({DisturbanceKind::meal, 600.0, 1500.0, 45.0, true, 30.0});
  p.disturbances.push_back({DisturbanceKind::exercise, 1200.0, 3900.0, 0.5, true, 0.0});
  p.disturbances.push_back({DisturbanceKind::meal, 7200.0, 8100.0, 9.0, false, 0.0});
  DisturbanceCursor c(p);
  CHECK(c.at(0.0).cho_g_per_min == 0.0);
  CHECK(c.at(600.0).cho_g_per_min == doctest::Approx(3.0));
  const auto mid = c.at(1200.0);
  CHECK(mid.cho_g_per_min == doctest::Approx(3.0));
  CHECK(mid.exercising);
  CHECK(mid.hrr == 0.5);
  CHECK(c.at(1500.0).cho_g_per_min == 0.0);
  CHECK_FALSE(c.at(3900.0).exercising);

  DisturbanceCursor a(p);
  CHECK(a.announced_between(-1.0, 300.0) == 0.0);
  CHECK(a.announced_between(300.0, 600.0) == 30.0);
  CHECK(a.announced_between(600.0, 9000.0) == 0.0);  // the second meal is unannounced
}
