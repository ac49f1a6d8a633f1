#include "vct/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vct/errors.hpp"

namespace vct {

double meal_grams_per_kg(MealClass meal) {
  switch (meal) {
    case MealClass::large:
      return 1.29;
    case MealClass::medium:
      return 0.86;
    case MealClass::small:
      return 0.57;
    case MealClass::snack:
      return 0.29;
  }
  return 0.0;
}

double meal_grams(MealClass meal, double body_weight_kg) { return body_weight_kg * meal_grams_per_kg(meal); }

const BasisDay& ProtocolLibrary::day(DayType type, SeasonClass season_class) const {
  for (const auto& d : days) {
    if (d.day_type == type && d.season_class == season_class) return d;
  }
  throw ConfigError("protocol library has no basis day '" + std::string(to_string(type)) + "' for " +
                    std::string(to_string(season_class)));
}

const BasisWeek& ProtocolLibrary::week(WeekType type) const {
  for (const auto& w : weeks) {
    if (w.week_type == type) return w;
  }
  throw ConfigError("protocol library has no basis week '" + std::string(to_string(type)) + "'");
}

void ProtocolLibrary::validate() const {
  for (const auto& d : days) {
    for (std::size_t i = 0; i < d.events.size(); ++i) {
      const auto& e = d.events[i];
      if (e.clock_s < 0.0 || e.clock_s + e.duration_s > kSecondsPerDay || !(e.duration_s > 0.0)) {
        throw ConfigError("basis day event outside 00:00-24:00 or with nonpositive duration");
      }
      if (i > 0 && e.clock_s < d.events[i - 1].clock_s) throw ConfigError("basis day events are not time-ordered");
    }
  }
  for (const auto& w : weeks) {
    int sum = 0;
    for (int c : w.day_counts) sum += c;
    if (sum != 7) throw ConfigError("basis week '" + std::string(to_string(w.week_type)) + "' does not have 7 days");
  }
  for (const auto& s : seasons) {
    int sum = 0;
    for (int c : s.week_counts) sum += c;
    if (sum != kWeeksPerSeason) {
      throw ConfigError("season '" + std::string(to_string(s.name)) + "' does not have 13 weeks");
    }
  }
  if (seasons.size() != 4) throw ConfigError("a protocol year needs exactly four seasons");
}

std::vector<Disturbance> compose_day(const BasisDay& day, double body_weight_kg, double day_offset_s) {
  std::vector<Disturbance> out;
  out.reserve(day.events.size());
  for (const auto& e : day.events) {
    Disturbance d;
    d.kind = e.kind;
    d.start_s = day_offset_s + e.clock_s;
    d.end_s = d.start_s + e.duration_s;
    if (e.kind == DisturbanceKind::meal) {
      d.magnitude = meal_grams(e.meal, body_weight_kg);
      d.announced_magnitude = d.magnitude;
    } else {
      d.magnitude = e.intensity;
      d.announced_magnitude = 0.0;
    }
    d.announced = true;
    out.push_back(d);
  }
  return out;
}

namespace {

bool active_next_to_late_night(const std::vector<DayType>& order) {
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto a = order[i - 1];
    const auto b = order[i];
    if ((a == DayType::active && b == DayType::late_night) || (a == DayType::late_night && b == DayType::active)) {
      return true;
    }
  }
  return false;
}

bool by_start(const Disturbance& a, const Disturbance& b) {
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  return a.kind < b.kind;
}

}  // namespace

std::vector<Disturbance> compose_week(const ProtocolLibrary& library, const BasisWeek& week,
                                      SeasonClass season_class, RngStream& rng, double body_weight_kg,
                                      double week_offset_s, std::vector<DayType>* layout) {
  std::vector<DayType> order;
  for (std::size_t t = 0; t < kDayTypeCount; ++t) order.insert(order.end(), week.day_counts[t], static_cast<DayType>(t));
  if (order.size() != 7) throw ConfigError("basis week does not have 7 days");

  // A valid arrangement always exists for the shipped week compositions; bound the loop anyway.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    if (!active_next_to_late_night(order)) break;
  }
  if (active_next_to_late_night(order)) throw ConfigError("cannot separate active days from late nights");

  std::vector<Disturbance> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto day = compose_day(library.day(order[i], season_class), body_weight_kg,
                           week_offset_s + static_cast<double>(i) * kSecondsPerDay);
    out.insert(out.end(), day.begin(), day.end());
    if (layout != nullptr) layout->push_back(order[i]);
  }
  std::stable_sort(out.begin(), out.end(), by_start);
  return out;
}

ComposedYear compose_year_with_layout(const ProtocolLibrary& library, std::uint64_t seed, double body_weight_kg) {
  if (!(body_weight_kg > 0.0)) throw ConfigError("body weight must be positive");
  library.validate();
  RngStream rng(seed, 0, StreamRole::protocol);
  ComposedYear year;
  year.protocol.id = seed;
  year.protocol.horizon_s = kWeeksPerYear * kSecondsPerWeek;
  int week_index = 0;
  for (const auto& season : library.seasons) {
    std::vector<WeekType> weeks;
    for (std::size_t t = 0; t < kWeekTypeCount; ++t) {
      weeks.insert(weeks.end(), season.week_counts[t], static_cast<WeekType>(t));
    }
    std::shuffle(weeks.begin(), weeks.end(), rng);
    for (const auto type : weeks) {
      std::vector<DayType> days;
      auto events = compose_week(library, library.week(type), season.season_class, rng, body_weight_kg,
                                 week_index * kSecondsPerWeek, &days);
      year.protocol.disturbances.insert(year.protocol.disturbances.end(), events.begin(), events.end());
      for (const auto d : days) year.layout.push_back(DayRecord{season.name, type, d});
      ++week_index;
    }
  }
  return year;
}

Protocol compose_year(const ProtocolLibrary& library, std::uint64_t seed, double body_weight_kg) {
  return compose_year_with_layout(library, seed, body_weight_kg).protocol;
}

Protocol apply_announcement_policy(Protocol protocol, const AnnouncementPolicy& policy, RngStream& rng) {
  const auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(policy.fraction_unannounced) || !in_unit(policy.fraction_misannounced) ||
      !(policy.misannouncement_min >= 0.0) || !(policy.misannouncement_max >= policy.misannouncement_min)) {
    throw ConfigError("announcement policy: fractions must lie in [0, 1] and the factor range must be ordered");
  }
  for (auto& d : protocol.disturbances) {
    if (d.kind != DisturbanceKind::meal) continue;
    // Two draws per meal regardless of outcome keep the stream aligned across policies.
    const double u_unannounced = rng.uniform(0.0, 1.0);
    const double u_factor = rng.uniform(0.0, 1.0);
    if (u_unannounced < policy.fraction_unannounced) {
      d.announced = false;
      d.announced_magnitude = 0.0;
      continue;
    }
    const double band = policy.fraction_unannounced + policy.fraction_misannounced;
    if (u_unannounced < band) {
      const double factor =
          policy.misannouncement_min + u_factor * (policy.misannouncement_max - policy.misannouncement_min);
      d.announced_magnitude = d.magnitude * factor;
    }
  }
  return protocol;
}

std::vector<std::string> validate_protocol(const Protocol& protocol) {
  std::vector<std::string> violations;
  const auto& ds = protocol.disturbances;
  const auto describe = [&](std::size_t i) {
    std::ostringstream os;
    os << to_string(ds[i].kind) << " #" << i << " [" << ds[i].start_s << ", " << ds[i].end_s << ")";
    return os.str();
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& d = ds[i];
    if (!(d.start_s < d.end_s)) violations.push_back(describe(i) + ": start is not before end");
    if (d.start_s < 0.0 || d.end_s > protocol.horizon_s) violations.push_back(describe(i) + ": outside the horizon");
    if (!(d.magnitude >= 0.0)) violations.push_back(describe(i) + ": negative magnitude");
    if (!(d.announced_magnitude >= 0.0)) violations.push_back(describe(i) + ": negative announced magnitude");
    if (i > 0 && ds[i].start_s < ds[i - 1].start_s) violations.push_back(describe(i) + ": not time-ordered");
  }
  for (const auto kind : {DisturbanceKind::meal, DisturbanceKind::exercise}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds[i].kind == kind) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return ds[a].start_s < ds[b].start_s; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (ds[idx[k]].start_s < ds[idx[k - 1]].end_s) {
        violations.push_back(describe(idx[k - 1]) + " overlaps " + describe(idx[k]));
      }
    }
  }
  return violations;
}

DisturbanceCursor::DisturbanceCursor(const Protocol& protocol) : protocol_(protocol) {
  for (std::size_t i = 0; i < protocol.disturbances.size(); ++i) {
    (protocol.disturbances[i].kind == DisturbanceKind::meal ? meals_ : exercise_).push_back(i);
  }
}

DisturbanceCursor::Values DisturbanceCursor::at(double t_s) {
  const auto& ds = protocol_.disturbances;
  Values v;
  while (meal_pos_ < meals_.size() && ds[meals_[meal_pos_]].end_s <= t_s) ++meal_pos_;
  if (meal_pos_ < meals_.size()) {
    const auto& m = ds[meals_[meal_pos_]];
    if (m.start_s <= t_s) v.cho_g_per_min = m.magnitude / ((m.end_s - m.start_s) / 60.0);
  }
  while (exercise_pos_ < exercise_.size() && ds[exercise_[exercise_pos_]].end_s <= t_s) ++exercise_pos_;
  if (exercise_pos_ < exercise_.size()) {
    const auto& e = ds[exercise_[exercise_pos_]];
    if (e.start_s <= t_s) {
      v.hrr = e.magnitude;
      v.exercising = true;
    }
  }
  return v;
}

double DisturbanceCursor::announced_between(double from_s, double to_s) {
  const auto& ds = protocol_.disturbances;
  double grams = 0.0;
  while (announce_pos_ < meals_.size() && ds[meals_[announce_pos_]].start_s <= from_s) ++announce_pos_;
  while (announce_pos_ < meals_.size() && ds[meals_[announce_pos_]].start_s <= to_s) {
    const auto& m = ds[meals_[announce_pos_]];
    if (m.announced) grams += m.announced_magnitude;
    ++announce_pos_;
  }
  return grams;
}

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view text, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return static_cast<E>(i);
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr std::array<std::string_view, 2> kKindNames{"meal", "exercise"};
constexpr std::array<std::string_view, 4> kMealNames{"large", "medium", "small", "snack"};
constexpr std::array<std::string_view, 4> kDayNames{"standard", "active", "movie_night", "late_night"};
constexpr std::array<std::string_view, 2> kSeasonClassNames{"winter_autumn", "summer_spring"};
constexpr std::array<std::string_view, 3> kWeekNames{"standard", "active", "vacation"};
constexpr std::array<std::string_view, 4> kSeasonNames{"winter", "spring", "summer", "autumn"};

}  // namespace

std::string_view to_string(DisturbanceKind v) noexcept { return kKindNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(MealClass v) noexcept { return kMealNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(DayType v) noexcept { return kDayNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(SeasonClass v) noexcept { return kSeasonClassNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(WeekType v) noexcept { return kWeekNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(SeasonName v) noexcept { return kSeasonNames[static_cast<std::size_t>(v)]; }

DisturbanceKind parse_disturbance_kind(std::string_view t) { return parse_enum<DisturbanceKind>(t, kKindNames, "disturbance kind"); }
MealClass parse_meal_class(std::string_view t) { return parse_enum<MealClass>(t, kMealNames, "meal class"); }
DayType parse_day_type(std::string_view t) { return parse_enum<DayType>(t, kDayNames, "day type"); }
SeasonClass parse_season_class(std::string_view t) { return parse_enum<SeasonClass>(t, kSeasonClassNames, "season class"); }
WeekType parse_week_type(std::string_view t) { return parse_enum<WeekType>(t, kWeekNames, "week type"); }
SeasonName parse_season_name(std::string_view t) { return parse_enum<SeasonName>(t, kSeasonNames, "season"); }

}  // namespace vct
