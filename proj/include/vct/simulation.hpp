#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vct/analytics.hpp"
#include "vct/controller.hpp"
#include "vct/physiology.hpp"
#include "vct/population.hpp"
#include "vct/protocol.hpp"
#include "vct/simd/isa.hpp"

namespace vct {

enum class TracePolicy { never, worst_case_only, always };

struct SimulationConfig {
  std::int64_t dt_s = 30;
  std::int64_t controller_period_s = 300;
  std::int64_t horizon_s = 7 * 86400;
  std::uint64_t seed = 0;
  TracePolicy store_trace = TracePolicy::worst_case_only;
  /// Also record the full state vector in traces.
  bool trace_states = false;
  simd::KernelChoice kernel = simd::KernelChoice::automatic;
  AnalyticsConfig analytics;

  /// Throws ConfigError unless dt > 0, the period is a multiple of dt and the horizon a multiple of the period.
  void validate() const;
  std::int64_t ticks() const { return horizon_s / dt_s; }
  GridSpec grid() const;
  bool operator==(const SimulationConfig&) const = default;
};

/// Columnar closed-loop record, one row per integration step. Doses are the
/// amounts delivered during the step starting at t.
struct Trace {
  std::vector<double> t_s;
  std::vector<double> bg;
  std::vector<double> cgm;  // last sampled CGM value, held between samples
  std::vector<double> cho_g_per_min;
  std::vector<double> hrr;
  std::vector<double> basal_u_per_h;
  std::vector<double> insulin_bolus_u;
  std::vector<double> glucagon_bolus_ug;
  std::size_t state_dimension = 0;
  std::vector<double> states;  // row-major, empty unless requested

  std::size_t rows() const noexcept { return t_s.size(); }
  bool operator==(const Trace&) const = default;
};

struct SimulationResult {
  std::uint64_t patient_id = 0;
  PatientStats stats;
  double min_bg = 0.0;
  bool aborted = false;
  std::string diagnostic;
  std::optional<Trace> trace;

  bool operator==(const SimulationResult&) const = default;
};

/// Supplies the disturbance protocol of every patient in a trial.
class ProtocolSource {
 public:
  virtual ~ProtocolSource() = default;
  /// Must be a pure function of its arguments.
  virtual Protocol protocol_for(const Patient& patient, std::int64_t horizon_s) const = 0;
};

/// Composes a fresh protocol per patient from the basis library, keyed on
/// (trial seed, patient id), then applies the announcement policy.
class GeneratedProtocols final : public ProtocolSource {
 public:
  GeneratedProtocols(ProtocolLibrary library, AnnouncementPolicy policy, std::uint64_t seed);
  Protocol protocol_for(const Patient& patient, std::int64_t horizon_s) const override;
  const ProtocolLibrary& library() const noexcept { return library_; }
  const AnnouncementPolicy& policy() const noexcept { return policy_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  ProtocolLibrary library_;
  AnnouncementPolicy policy_;
  std::uint64_t seed_;
};

/// Stored protocols looked up by patient id; a single protocol with id 0
/// and no per-patient entry is shared by everyone.
class StoredProtocols final : public ProtocolSource {
 public:
  explicit StoredProtocols(std::vector<Protocol> protocols);
  Protocol protocol_for(const Patient& patient, std::int64_t horizon_s) const override;

 private:
  std::map<std::uint64_t, Protocol> by_id_;
};

/// Observes every controller decision and counts violations of the dosing
/// rules: no simultaneous insulin and glucagon except the exercise-start
/// bolus (which must carry zero insulin), and at most one exercise bolus per
/// session, given only while the glucose estimate is below the threshold.
class SafetyMonitor {
 public:
  SafetyMonitor(double exercise_bolus_ug = 100.0, double exercise_threshold = 7.0);
  void observe(bool exercising, const ControlDecision& decision, std::optional<double> estimate);
  std::int64_t violations() const noexcept { return violations_; }
  std::int64_t exercise_boluses() const noexcept { return exercise_boluses_; }

 private:
  double exercise_bolus_ug_;
  double threshold_;
  bool was_exercising_ = false;
  bool session_bolus_ = false;
  std::int64_t violations_ = 0;
  std::int64_t exercise_boluses_ = 0;
};

/// Closed-loop simulation of one patient. Throws ConfigError on an invalid
/// config or a protocol whose horizon differs from the config's. A
/// non-finite state aborts the run and is reported in the result.
SimulationResult simulate_closed_loop(const PopulationEntry& patient, const Protocol& protocol,
                                      const ControllerFactory& controller, const PatientModel& model,
                                      const SimulationConfig& config, bool keep_trace = true);

struct TrialOutput {
  TrialAccumulator accumulator;
  std::vector<SimulationResult> aborted;
  /// Results of every patient in population order when store_trace is always.
  std::vector<SimulationResult> patients;
  /// Worst-case patient with its trace unless store_trace is never.
  std::optional<SimulationResult> worst;
  simd::Isa isa = simd::Isa::scalar;
};

/// Simulates all patients (in lockstep batches of simd::kLanes) on `threads`
/// workers. The accumulator does not depend on the thread count or order.
/// `progress`, when set, is called with (patients done, total) after each
/// batch, serialized across workers.
using ProgressFn = std::function<void(std::uint64_t, std::uint64_t)>;

TrialOutput run_trial(const Population& population, const ProtocolSource& protocols,
                      const ControllerFactory& controller, const PatientModel& model,
                      const SimulationConfig& config, unsigned threads, const ProgressFn& progress = {});

std::string_view to_string(TracePolicy policy) noexcept;
/// Accepts never, worst, worst_case_only and always.
TracePolicy parse_trace_policy(std::string_view text);

}  // namespace vct
