#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vct/rng.hpp"

namespace vct {

enum class DisturbanceKind { meal, exercise };

/// One uncontrolled input. Times are seconds since trial start. Meals carry
/// grams of carbohydrate; exercise carries a heart-rate-reserve fraction.
struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::meal;
  double start_s = 0.0;
  double end_s = 0.0;
  double magnitude = 0.0;
  bool announced = true;
  double announced_magnitude = 0.0;

  bool operator==(const Disturbance&) const = default;
};

enum class MealClass { large, medium, small, snack };
enum class DayType { standard, active, movie_night, late_night };
enum class SeasonClass { winter_autumn, summer_spring };
enum class WeekType { standard, active, vacation };
enum class SeasonName { winter, spring, summer, autumn };

inline constexpr std::size_t kDayTypeCount = 4;
inline constexpr std::size_t kWeekTypeCount = 3;
inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kSecondsPerWeek = 7.0 * kSecondsPerDay;
inline constexpr int kWeeksPerSeason = 13;
inline constexpr int kWeeksPerYear = 52;

/// g CHO for a meal class: body weight times 1.29, 0.86, 0.57 or 0.29 g/kg.
double meal_grams(MealClass meal, double body_weight_kg);
double meal_grams_per_kg(MealClass meal);

struct DayEvent {
  double clock_s = 0.0;  // seconds after midnight
  DisturbanceKind kind = DisturbanceKind::meal;
  MealClass meal = MealClass::medium;
  double duration_s = 900.0;
  double intensity = 0.0;  // exercise only, HRR fraction

  bool operator==(const DayEvent&) const = default;
};

struct BasisDay {
  DayType day_type = DayType::standard;
  SeasonClass season_class = SeasonClass::winter_autumn;
  std::vector<DayEvent> events;

  bool operator==(const BasisDay&) const = default;
};

struct BasisWeek {
  WeekType week_type = WeekType::standard;
  std::array<int, kDayTypeCount> day_counts{};  // indexed by DayType

  bool operator==(const BasisWeek&) const = default;
};

struct Season {
  SeasonName name = SeasonName::winter;
  SeasonClass season_class = SeasonClass::winter_autumn;
  std::array<int, kWeekTypeCount> week_counts{};  // indexed by WeekType

  bool operator==(const Season&) const = default;
};

/// Basis days, weeks and seasons that protocols are composed from.
struct ProtocolLibrary {
  std::vector<BasisDay> days;
  std::vector<BasisWeek> weeks;
  std::vector<Season> seasons;  // in calendar order

  const BasisDay& day(DayType type, SeasonClass season_class) const;
  const BasisWeek& week(WeekType type) const;
  /// Throws ConfigError if counts or event orderings are inconsistent.
  void validate() const;
  bool operator==(const ProtocolLibrary&) const = default;
};

struct Protocol {
  std::uint64_t id = 0;
  double horizon_s = 0.0;
  std::vector<Disturbance> disturbances;

  bool operator==(const Protocol&) const = default;
};

/// Which basis day / week / season produced each day of a composed year.
struct DayRecord {
  SeasonName season = SeasonName::winter;
  WeekType week = WeekType::standard;
  DayType day = DayType::standard;
};

struct ComposedYear {
  Protocol protocol;
  std::vector<DayRecord> layout;  // 364 entries
};

std::vector<Disturbance> compose_day(const BasisDay& day, double body_weight_kg, double day_offset_s);

/// Shuffles the week's day multiset (never placing an active day next to a
/// late night) and concatenates the days. Appends the day types to `layout` when given.
std::vector<Disturbance> compose_week(const ProtocolLibrary& library, const BasisWeek& week,
                                      SeasonClass season_class, RngStream& rng, double body_weight_kg,
                                      double week_offset_s, std::vector<DayType>* layout = nullptr);

/// 52 weeks: each season's week multiset shuffled, seasons in library order.
ComposedYear compose_year_with_layout(const ProtocolLibrary& library, std::uint64_t seed, double body_weight_kg);
Protocol compose_year(const ProtocolLibrary& library, std::uint64_t seed, double body_weight_kg);

struct AnnouncementPolicy {
  double fraction_unannounced = 0.0;
  double fraction_misannounced = 0.0;
  double misannouncement_min = 1.0;
  double misannouncement_max = 1.0;

  bool operator==(const AnnouncementPolicy&) const = default;
};

/// Marks a random subset of meals unannounced and rescales the announced
/// amount of another subset. True carbohydrate amounts are untouched.
Protocol apply_announcement_policy(Protocol protocol, const AnnouncementPolicy& policy, RngStream& rng);

/// All invariant violations of a protocol; empty means valid.
std::vector<std::string> validate_protocol(const Protocol& protocol);

/// Sequential reader returning the piecewise-constant disturbance values at
/// nondecreasing query times.
class DisturbanceCursor {
 public:
  explicit DisturbanceCursor(const Protocol& protocol);

  struct Values {
    double cho_g_per_min = 0.0;
    double hrr = 0.0;
    bool exercising = false;
  };

  Values at(double t_s);
  /// Sum of announced grams of meals starting in (from_s, to_s].
  double announced_between(double from_s, double to_s);

 private:
  const Protocol& protocol_;
  std::vector<std::size_t> meals_;
  std::vector<std::size_t> exercise_;
  std::size_t meal_pos_ = 0;
  std::size_t exercise_pos_ = 0;
  std::size_t announce_pos_ = 0;
};

std::string_view to_string(DisturbanceKind v) noexcept;
std::string_view to_string(MealClass v) noexcept;
std::string_view to_string(DayType v) noexcept;
std::string_view to_string(SeasonClass v) noexcept;
std::string_view to_string(WeekType v) noexcept;
std::string_view to_string(SeasonName v) noexcept;
DisturbanceKind parse_disturbance_kind(std::string_view text);
MealClass parse_meal_class(std::string_view text);
DayType parse_day_type(std::string_view text);
SeasonClass parse_season_class(std::string_view text);
WeekType parse_week_type(std::string_view text);
SeasonName parse_season_name(std::string_view text);

}  // namespace vct
