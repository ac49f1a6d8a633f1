#include "vct/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <string>

#include "vct/errors.hpp"
#include "vct/parallel.hpp"
#include "vct/rng.hpp"

namespace vct {

void SimulationConfig::validate() const {
  if (dt_s <= 0) throw ConfigError("simulation: dt must be positive");
  if (controller_period_s <= 0 || controller_period_s % dt_s != 0) {
    throw ConfigError("simulation: controller period must be a positive multiple of dt");
  }
  if (horizon_s <= 0 || horizon_s % controller_period_s != 0) {
    throw ConfigError("simulation: horizon must be a positive multiple of the controller period");
  }
  if (analytics.time_grid_s <= 0) throw ConfigError("simulation: analytics time grid must be positive");
  for (const auto* h : {&analytics.basal, &analytics.bolus, &analytics.glucagon}) {
    if (!(h->bin_width > 0.0) || h->bins == 0) throw ConfigError("simulation: dose histogram bins must be positive");
  }
}

GridSpec SimulationConfig::grid() const { return GridSpec{dt_s, ticks(), analytics}; }

// ---------------------------------------------------------------------------

GeneratedProtocols::GeneratedProtocols(ProtocolLibrary library, AnnouncementPolicy policy, std::uint64_t seed)
    : library_(std::move(library)), policy_(policy), seed_(seed) {
  library_.validate();
}

Protocol GeneratedProtocols::protocol_for(const Patient& patient, std::int64_t horizon_s) const {
  Protocol out;
  out.id = patient.id;
  out.horizon_s = static_cast<double>(horizon_s);
  const double year_s = kWeeksPerYear * kSecondsPerWeek;
  const auto years = static_cast<std::uint64_t>(std::ceil(static_cast<double>(horizon_s) / year_s));
  for (std::uint64_t y = 0; y < years; ++y) {
    const std::uint64_t year_seed = detail::splitmix64(seed_ ^ detail::splitmix64(patient.id)) + y;
    const double offset = static_cast<double>(y) * year_s;
    for (auto d : compose_year(library_, year_seed, patient.body_weight_kg).disturbances) {
      d.start_s += offset;
      d.end_s += offset;
      if (d.start_s >= out.horizon_s) break;
      d.end_s = std::min(d.end_s, out.horizon_s);
      out.disturbances.push_back(d);
    }
  }
  RngStream rng(seed_, patient.id, StreamRole::announcement);
  return apply_announcement_policy(std::move(out), policy_, rng);
}

StoredProtocols::StoredProtocols(std::vector<Protocol> protocols) {
  for (auto& p : protocols) {
    const auto id = p.id;
    if (!by_id_.emplace(id, std::move(p)).second) throw ConfigError("duplicate protocol id " + std::to_string(id));
  }
}

Protocol StoredProtocols::protocol_for(const Patient& patient, std::int64_t horizon_s) const {
  auto it = by_id_.find(patient.id);
  if (it == by_id_.end()) it = by_id_.find(0);
  if (it == by_id_.end()) throw ConfigError("no protocol for patient " + std::to_string(patient.id));
  if (it->second.horizon_s != static_cast<double>(horizon_s)) {
    throw ConfigError("protocol " + std::to_string(it->second.id) + " horizon does not match the simulation horizon");
  }
  return it->second;
}

// ---------------------------------------------------------------------------

SafetyMonitor::SafetyMonitor(double exercise_bolus_ug, double exercise_threshold)
    : exercise_bolus_ug_(exercise_bolus_ug), threshold_(exercise_threshold) {}

void SafetyMonitor::observe(bool exercising, const ControlDecision& d, std::optional<double> estimate) {
  const bool session_start = exercising && !was_exercising_;
  if (!exercising) session_bolus_ = false;
  was_exercising_ = exercising;

  for (double v : {d.basal_u_per_h, d.insulin_bolus_u, d.glucagon_bolus_ug}) {
    if (!(std::isfinite(v) && v >= 0.0)) ++violations_;
  }
  const bool insulin = d.basal_u_per_h > 0.0 || d.insulin_bolus_u > 0.0;
  const bool glucagon = d.glucagon_bolus_ug > 0.0;
  if (session_start && glucagon) {
    ++exercise_boluses_;
    if (insulin) ++violations_;
    if (!estimate || !(*estimate < threshold_)) ++violations_;
    session_bolus_ = true;
  } else if (glucagon && insulin) {
    ++violations_;
  } else if (exercising && session_bolus_ && d.glucagon_bolus_ug == exercise_bolus_ug_) {
    ++violations_;  // a second exercise bolus in the same session
  }
}

// ---------------------------------------------------------------------------

namespace {

struct LaneJob {
  const PopulationEntry* entry = nullptr;
  Protocol protocol;
  bool keep_trace = false;
};

struct Lane {
  Lane(const LaneJob& job, const SimulationConfig& config, const ControllerFactory& factory)
      : entry(job.entry),
        protocol(job.protocol),
        cursor(protocol),
        diffusion(config.seed, job.entry->patient.id, StreamRole::diffusion),
        measurement(config.seed, job.entry->patient.id, StreamRole::measurement),
        stats(config.dt_s, config.analytics),
        monitor(exercise_bolus_of(factory), exercise_threshold_of(factory)) {}

  static double exercise_bolus_of(const ControllerFactory& f) {
    const auto* dh = dynamic_cast<const DualHormoneFactory*>(&f);
    return dh ? dh->parameters().exercise_bolus_ug : 100.0;
  }
  static double exercise_threshold_of(const ControllerFactory& f) {
    const auto* dh = dynamic_cast<const DualHormoneFactory*>(&f);
    return dh ? dh->parameters().exercise_bolus_threshold : 7.0;
  }

  const PopulationEntry* entry;
  Protocol protocol;
  DisturbanceCursor cursor;
  RngStream diffusion;
  RngStream measurement;
  PatientStats stats;
  SafetyMonitor monitor;
  std::unique_ptr<FeedbackController> controller;
  std::vector<double> p;
  double controller_basal_u_per_h = 0.0;
  double noise_sd = 0.0;
  double last_control_t = -1.0;
  double cgm = 0.0;
  ControlDecision decision;
  bool active = false;
  SimulationResult result;
};

void append_trace(Trace& tr, double t, double bg, double cgm, const DisturbanceCursor::Values& dv,
                  const ControlDecision& d, double bolus_u, double glucagon_ug) {
  tr.t_s.push_back(t);
  tr.bg.push_back(bg);
  tr.cgm.push_back(cgm);
  tr.cho_g_per_min.push_back(dv.cho_g_per_min);
  tr.hrr.push_back(dv.hrr);
  tr.basal_u_per_h.push_back(d.basal_u_per_h);
  tr.insulin_bolus_u.push_back(bolus_u);
  tr.glucagon_bolus_ug.push_back(glucagon_ug);
}

double deliverable(double v) { return std::isfinite(v) && v > 0.0 ? v : 0.0; }

/// Simulates up to simd::kLanes patients in lockstep. Each lane's arithmetic
/// is independent of its neighbours, so results do not depend on grouping.
std::vector<SimulationResult> run_batch(std::span<const LaneJob> jobs, const ControllerFactory& factory,
                                        const PatientModel& model, const SimulationConfig& config, simd::Isa isa) {
  auto stepper = model.make_batch_stepper(isa);
  std::vector<std::unique_ptr<Lane>> lanes;
  const std::size_t n_state = model.state_dimension();
  const std::size_t n_wiener = model.wiener_dimension();

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto lane = std::make_unique<Lane>(jobs[i], config, factory);
    lane->result.patient_id = jobs[i].entry->patient.id;
    try {
      lane->p = model.bind(jobs[i].entry->params);
      const auto ss = model.steady_state(lane->p, factory.setpoint());
      lane->controller_basal_u_per_h = ss.basal_u_per_h * factory.basal_scale();
      lane->controller = factory.create(
          {jobs[i].entry->patient.body_weight_kg, lane->controller_basal_u_per_h,
           static_cast<double>(config.controller_period_s)});
      lane->noise_sd = std::sqrt(std::max(0.0, model.noise_variance(0.0, lane->p)));
      stepper->load(i, lane->p, ss.x);
      lane->active = true;
      if (jobs[i].keep_trace) {
        Trace tr;
        tr.state_dimension = config.trace_states ? n_state : 0;
        lane->result.trace = std::move(tr);
      }
    } catch (const Error& e) {
      lane->result.aborted = true;
      lane->result.diagnostic = std::string("initialization failed: ") + e.what();
    }
    lanes.push_back(std::move(lane));
  }

  const std::int64_t ticks = config.ticks();
  const std::int64_t per_control = config.controller_period_s / config.dt_s;
  const double h = static_cast<double>(config.dt_s) / 60.0;
  const double dt_h = static_cast<double>(config.dt_s) / 3600.0;
  std::vector<double> xi(n_wiener);
  std::vector<double> state(n_state);

  for (std::int64_t k = 0; k < ticks; ++k) {
    const std::int64_t t_int = k * config.dt_s;
    const double t = static_cast<double>(t_int);
    const bool control_tick = k % per_control == 0;
    bool any = false;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      Lane& L = *lanes[i];
      if (!L.active) continue;
      any = true;
      const auto dv = L.cursor.at(t);
      double bolus_u = 0.0;
      double glucagon_ug = 0.0;
      if (control_tick) {
        const double y = stepper->measurement(i) + L.noise_sd * L.measurement.gaussian();
        const double announced = L.cursor.announced_between(L.last_control_t, t);
        L.last_control_t = t;
        L.decision = L.controller->step({t, y, announced, dv.exercising, L.controller_basal_u_per_h});
        L.monitor.observe(dv.exercising, L.decision, L.controller->glucose_estimate());
        L.cgm = y;
        bolus_u = deliverable(L.decision.insulin_bolus_u);
        glucagon_ug = deliverable(L.decision.glucagon_bolus_ug);
      }
      const double basal = deliverable(L.decision.basal_u_per_h);
      const double bg = stepper->output(i);
      L.stats.accumulate_sample(t_int, bg, basal * dt_h, bolus_u, glucagon_ug);
      if (L.result.trace) {
        append_trace(*L.result.trace, t, bg, L.cgm, dv, L.decision, bolus_u, glucagon_ug);
        if (config.trace_states) {
          stepper->state(i, state);
          L.result.trace->states.insert(L.result.trace->states.end(), state.begin(), state.end());
        }
      }
      ModelInputs in;
      in.basal_mu_per_min = basal * 1000.0 / 60.0;
      in.bolus_mu_per_min = bolus_u * 1000.0 / h;
      in.glucagon_ug_per_min = glucagon_ug / h;
      in.cho_g_per_min = dv.cho_g_per_min;
      in.hrr = dv.hrr;
      stepper->set_inputs(i, in);
      for (auto& w : xi) w = L.diffusion.gaussian();
      stepper->set_noise(i, xi);
    }
    if (!any) break;
    stepper->step(h);
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      Lane& L = *lanes[i];
      if (L.active && !stepper->finite(i)) {
        L.active = false;
        L.result.aborted = true;
        L.result.diagnostic = "non-finite state after step at t=" + std::to_string(t_int) + " s";
        stepper->disable(i);
      }
    }
  }

  std::vector<SimulationResult> out;
  out.reserve(lanes.size());
  for (auto& lane : lanes) {
    lane->stats.add_safety_violations(lane->monitor.violations());
    lane->result.min_bg = lane->stats.min_bg();
    lane->result.stats = std::move(lane->stats);
    if (lane->result.aborted) lane->result.trace.reset();
    out.push_back(std::move(lane->result));
  }
  return out;
}

Protocol checked_protocol(Protocol protocol, const SimulationConfig& config) {
  if (protocol.horizon_s != static_cast<double>(config.horizon_s)) {
    throw ConfigError("protocol horizon does not match the simulation horizon");
  }
  return protocol;
}

}  // namespace

SimulationResult simulate_closed_loop(const PopulationEntry& patient, const Protocol& protocol,
                                      const ControllerFactory& controller, const PatientModel& model,
                                      const SimulationConfig& config, bool keep_trace) {
  config.validate();
  const LaneJob job{&patient, checked_protocol(protocol, config), keep_trace};
  return std::move(run_batch({&job, 1}, controller, model, config, simd::resolve(config.kernel)).front());
}

TrialOutput run_trial(const Population& population, const ProtocolSource& protocols,
                      const ControllerFactory& controller, const PatientModel& model,
                      const SimulationConfig& config, unsigned threads, const ProgressFn& progress) {
  config.validate();
  if (population.entries.empty()) throw ConfigError("trial population is empty");
  threads = std::max(1U, threads);

  TrialOutput output;
  output.isa = simd::resolve(config.kernel);
  const auto grid = config.grid();
  const bool keep_all = config.store_trace == TracePolicy::always;
  const std::size_t n = population.entries.size();
  const std::size_t batches = (n + simd::kLanes - 1) / simd::kLanes;

  std::vector<TrialAccumulator> partial(threads, TrialAccumulator(grid));
  std::vector<std::vector<SimulationResult>> per_batch(batches);
  std::mutex progress_mutex;
  std::uint64_t done = 0;

  parallel_for(batches, threads, [&](unsigned worker, std::size_t b) {
    const std::size_t first = b * simd::kLanes;
    const std::size_t last = std::min(n, first + simd::kLanes);
    std::vector<LaneJob> jobs;
    for (std::size_t i = first; i < last; ++i) {
      const auto& entry = population.entries[i];
      jobs.push_back({&entry, checked_protocol(protocols.protocol_for(entry.patient, config.horizon_s), config),
                      keep_all});
    }
    auto results = run_batch(jobs, controller, model, config, output.isa);
    for (auto& r : results) {
      if (r.aborted) {
        partial[worker].add_aborted(r.patient_id);
      } else {
        partial[worker].add_patient(r.patient_id, r.stats);
      }
      if (keep_all || r.aborted) per_batch[b].push_back(std::move(r));
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      done += last - first;
      progress(done, n);
    }
  });

  output.accumulator = TrialAccumulator(grid);
  for (const auto& acc : partial) output.accumulator.merge(acc);
  for (auto& batch : per_batch) {
    for (auto& r : batch) {
      if (r.aborted) output.aborted.push_back(r);
      if (keep_all) output.patients.push_back(std::move(r));
    }
  }

  const auto& worst = output.accumulator.worst_;
  if (worst && config.store_trace != TracePolicy::never) {
    if (keep_all) {
      for (const auto& r : output.patients) {
        if (r.patient_id == worst->patient_id) output.worst = r;
      }
    } else {
      const auto it = std::find_if(population.entries.begin(), population.entries.end(),
                                   [&](const PopulationEntry& e) { return e.patient.id == worst->patient_id; });
      const LaneJob job{&*it, checked_protocol(protocols.protocol_for(it->patient, config.horizon_s), config), true};
      auto replay = run_batch({&job, 1}, controller, model, config, output.isa);
      if (replay.front().aborted || replay.front().min_bg != worst->min_bg ||
          replay.front().stats.range_ticks() != worst->range_ticks) {
        throw SimulationError("worst-case replay diverged from the recorded run");
      }
      output.worst = std::move(replay.front());
    }
  }
  return output;
}

std::string_view to_string(TracePolicy policy) noexcept {
  switch (policy) {
    case TracePolicy::never: return "never";
    case TracePolicy::worst_case_only: return "worst";
    case TracePolicy::always: return "always";
  }
  return "?";
}

TracePolicy parse_trace_policy(std::string_view text) {
  if (text == "never") return TracePolicy::never;
  if (text == "worst" || text == "worst_case_only") return TracePolicy::worst_case_only;
  if (text == "always") return TracePolicy::always;
  throw ConfigError("unknown trace policy '" + std::string(text) + "' (expected never, worst or always)");
}

}  // namespace vct
