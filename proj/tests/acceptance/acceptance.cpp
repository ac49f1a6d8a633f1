// Acceptance run: one PASS/FAIL/SKIP line per criterion.
//
//   vct_acceptance [--only 1,5,7] [--expect-fail 5]
//
// Exit status is nonzero when a criterion fails that was not listed with
// --expect-fail. VCT_ACCEPTANCE_FULL=1 additionally runs the 10,000-patient
// year-long trial of criterion 9.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "../oracles/generators.hpp"
#include "../oracles/validators.hpp"
#include "../support/convergence.hpp"
#include "../support/fixtures.hpp"
#include "vct/run.hpp"
#include "vct/storage.hpp"

using namespace vct;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// State shared between criteria: every report produced and every checked
/// controller factory, for the suite-wide checks of criteria 4 and 13.
struct Suite {
  std::vector<std::pair<std::string, TrialReport>> reports;
  std::vector<std::shared_ptr<fixtures::CheckedFactory>> factories;
  double seconds_per_patient_week = 0.0;  // single-thread cost measured by criterion 7
  std::map<unsigned, double> scaling_seconds;

  std::shared_ptr<fixtures::CheckedFactory> factory(const char* profile = "controller_default.json") {
    factories.push_back(std::make_shared<fixtures::CheckedFactory>(fixtures::profile(profile)));
    return factories.back();
  }

  TrialOutput trial(const std::string& name, const Population& pop, std::uint64_t seed, std::int64_t days,
                    unsigned threads, const char* profile = "controller_default.json",
                    TracePolicy trace = TracePolicy::worst_case_only) {
    auto cfg = fixtures::config(days, seed);
    cfg.store_trace = trace;
    const GeneratedProtocols protocols(fixtures::library(), {}, seed);
    auto out = run_trial(pop, protocols, *factory(profile), fixtures::model(), cfg, threads);
    reports.emplace_back(name, make_report({name, seed, "hovorka_ext", "dual_hormone", "", 300}, out.accumulator));
    return out;
  }
};

// ---------------------------------------------------------------------------

Outcome criterion_1(Suite&) {
  // Expected week counts per season and day counts per week type.
  const std::map<SeasonName, std::array<int, 3>> seasons{{SeasonName::winter, {6, 4, 3}},
                                                         {SeasonName::spring, {6, 6, 1}},
                                                         {SeasonName::summer, {7, 3, 3}},
                                                         {SeasonName::autumn, {9, 3, 1}}};
  const std::map<WeekType, std::array<int, 4>> weeks{{WeekType::standard, {4, 1, 1, 1}},
                                                     {WeekType::active, {3, 3, 1, 0}},
                                                     {WeekType::vacation, {5, 0, 0, 2}}};
  const auto lib = fixtures::library();
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto y = compose_year_with_layout(lib, seed, 70.0);
    if (y.layout.size() != 364) ++mismatches;
    std::map<SeasonName, std::array<int, 3>> season_counts;
    std::map<SeasonName, int> season_weeks;
    for (std::size_t w = 0; w < 52; ++w) {
      const auto& first = y.layout[w * 7];
      std::array<int, 4> days{};
      for (std::size_t d = 0; d < 7; ++d) {
        const auto& rec = y.layout[w * 7 + d];
        if (rec.week != first.week || rec.season != first.season) ++mismatches;
        ++days[static_cast<std::size_t>(rec.day)];
      }
      if (days != weeks.at(first.week)) ++mismatches;
      ++season_counts[first.season][static_cast<std::size_t>(first.week)];
      ++season_weeks[first.season];
    }
    for (const auto& [name, counts] : seasons) {
      if (season_weeks[name] != 13 || season_counts[name] != counts) ++mismatches;
    }
    if (!validate_protocol(y.protocol).empty()) ++mismatches;
  }
  return verdict(mismatches == 0, std::to_string(mismatches) + " composition mismatches over 100 seeds");
}

Outcome criterion_2(Suite&) {
  const std::array<std::pair<MealClass, double>, 4> expected{
      {{MealClass::large, 90.3}, {MealClass::medium, 60.2}, {MealClass::small, 39.9}, {MealClass::snack, 20.3}}};
  double worst = 0.0;
  std::string values;
  for (const auto& [meal, grams] : expected) {
    const double g = meal_grams(meal, 70.0);
    worst = std::max(worst, std::abs(g - grams));
    values += (values.empty() ? "" : ", ") + fixed(g, 1);
  }
  return verdict(worst <= 0.5, "70 kg: {" + values + "} g, max deviation " + fixed(worst, 3) + " g");
}

Outcome criterion_3(Suite& suite) {
  std::int64_t patients = 0;
  std::int64_t bad = 0;
  for (std::uint64_t seed : {101, 202, 303}) {
    const auto pop = fixtures::population(seed, 100);
    const auto out = suite.trial("tir-partition-" + std::to_string(seed), pop, seed, 7, 1, "controller_default.json",
                                 TracePolicy::always);
    for (const auto& r : out.patients) {
      if (r.aborted) continue;
      ++patients;
      std::int64_t ticks = 0;
      for (auto t : r.stats.range_ticks()) ticks += t;
      if (ticks * r.stats.dt_s() != 7 * 86400 || ticks != r.stats.ticks()) ++bad;
    }
    std::int64_t total = 0;
    for (auto t : out.accumulator.range_ticks_) total += t;
    if (total != static_cast<std::int64_t>(out.accumulator.patients()) * out.accumulator.grid().horizon_ticks) ++bad;
  }
  return verdict(bad == 0 && patients == 300,
                 std::to_string(patients) + " patients, " + std::to_string(bad) + " partitions not summing to the horizon");
}

Outcome criterion_4(Suite& suite) {
  std::size_t problems = 0;
  std::string first;
  for (const auto& [name, report] : suite.reports) {
    const auto p = fixtures::cdf_problems(report.cdf);
    if (!p.empty() && first.empty()) first = name + ": " + p.front();
    problems += p.size();
  }
  return verdict(problems == 0 && !suite.reports.empty(),
                 std::to_string(suite.reports.size()) + " trial reports checked, " + std::to_string(problems) +
                     " violations" + (first.empty() ? "" : " (" + first + ")"));
}

Outcome criterion_5(Suite&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = fixtures::integrator_convergence(30);
  const double secs = seconds_since(t0);
  const bool ok = r.decisions_match && r.error_coarse <= 0.05 && r.ratio() >= 1.6 && r.ratio() <= 2.5 && secs < 30.0;
  return verdict(ok, "max |BG error| " + fixed(r.error_coarse, 4) + " mmol/L at dt=30 s, " + fixed(r.error_fine, 4) +
                         " at dt=15 s, ratio " + fixed(r.ratio(), 2) + ", decisions " +
                         (r.decisions_match ? "identical" : "differ") + ", " + fixed(secs, 1) + " s");
}

Outcome criterion_6(Suite&) {
  gen::Gen g(6006);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto grid = gen::small_grid(g);
    std::vector<PatientStats> pool{gen::random_patient(g, grid), gen::random_patient(g, grid)};
    const auto a = gen::random_accumulator(g, grid, 3, pool);
    const auto b = gen::random_accumulator(g, grid, 3, pool);
    const auto c = gen::random_accumulator(g, grid, 3, pool);
    const TrialAccumulator e(grid);
    if (!(merge(a, e) == a) || !(merge(e, a) == a)) ++failures;
    if (!(merge(a, b) == merge(b, a))) ++failures;
    if (!(merge(merge(a, b), c) == merge(a, merge(b, c)))) ++failures;
  }
  return verdict(failures == 0, "1000 random triples, " + std::to_string(failures) + " law violations");
}

Outcome criterion_7(Suite& suite) {
  const auto pop = fixtures::population(7, 1000);
  std::string reference;
  std::vector<std::string> notes;
  bool identical = true;
  for (unsigned threads : {1U, 4U, 8U, 1U}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = suite.trial("determinism-t" + std::to_string(threads), pop, 7, 14, threads);
    const double secs = seconds_since(t0);
    if (!suite.scaling_seconds.count(threads)) suite.scaling_seconds[threads] = secs;
    const auto bytes = canonical_dump(Json(make_report({"determinism", 7, "hovorka_ext", "dual_hormone", "", 300},
                                                       out.accumulator)));
    if (reference.empty()) {
      reference = bytes;
      suite.seconds_per_patient_week = secs / (1000.0 * 2.0);
    } else if (bytes != reference) {
      identical = false;
    }
    notes.push_back(std::to_string(threads) + "T " + fixed(secs, 1) + " s");
  }
  std::string joined;
  for (const auto& n : notes) joined += (joined.empty() ? "" : ", ") + n;
  return verdict(identical, std::string("reports ") + (identical ? "byte-identical" : "DIFFER") +
                                " across 1/4/8 threads and a repeat (" + joined + ")");
}

Outcome criterion_8(Suite& suite) {
  const unsigned cores = std::thread::hardware_concurrency();
  std::string measured;
  if (suite.scaling_seconds.count(1) && suite.scaling_seconds.count(4) && suite.scaling_seconds.count(8)) {
    const double s1 = suite.scaling_seconds[1];
    measured = "measured speedup " + fixed(s1 / suite.scaling_seconds[4], 2) + "x at 4 threads, " +
               fixed(s1 / suite.scaling_seconds[8], 2) + "x at 8 threads";
    if (cores >= 8) {
      const bool ok = s1 / suite.scaling_seconds[4] >= 3.0 && s1 / suite.scaling_seconds[8] >= 6.0;
      return verdict(ok, measured + " on " + std::to_string(cores) + " hardware threads");
    }
  }
  return {Status::skip, "needs >= 8 cores, this machine reports " + std::to_string(cores) +
                            (measured.empty() ? "" : "; " + measured)};
}

Outcome criterion_9(Suite& suite) {
  if (suite.seconds_per_patient_week <= 0.0) {
    const auto pop = fixtures::population(9, 200);
    const auto t0 = std::chrono::steady_clock::now();
    suite.trial("throughput", pop, 9, 14, 1);
    suite.seconds_per_patient_week = seconds_since(t0) / (200.0 * 2.0);
  }
  const double cost = suite.seconds_per_patient_week;
  const double extrapolated_min = cost * 1e6 * 52.0 / 64.0 / 60.0;
  const double reference_min = 82.0;
  const bool in_range = extrapolated_min >= reference_min / 10.0 && extrapolated_min <= reference_min * 10.0;
  std::string detail = fixed(cost * 1e3, 2) + " ms per patient-week on one thread; 10^6 x 52 weeks on 64 cores -> " +
                       fixed(extrapolated_min, 1) + " min (reference 82 min, accepted 8.2-820)";

  bool full_ok = true;
  const char* full = std::getenv("VCT_ACCEPTANCE_FULL");
  if (full && std::string(full) == "1") {
    const unsigned threads = std::max(1U, std::thread::hardware_concurrency());
    const auto t0 = std::chrono::steady_clock::now();
    const auto pop = fixtures::population(9, 10000, threads);
    const auto out = suite.trial("full-year", pop, 9, 364, threads);
    const double secs = seconds_since(t0);
    full_ok = out.accumulator.patients() + out.accumulator.aborted().size() == 10000;
    detail += "; full 10,000 x 52 weeks completed on " + std::to_string(threads) + " thread(s) in " +
              fixed(secs / 60.0, 1) + " min";
  } else {
    detail += "; full 10,000 x 52-week run not executed (set VCT_ACCEPTANCE_FULL=1)";
  }
  return verdict(in_range && full_ok, detail);
}

Outcome criterion_10(Suite& suite) {
  const auto pop = fixtures::population(1, 1000);
  const auto a = suite.trial("trial_a", pop, 1, 28, 1, "controller_default.json");
  const auto b = suite.trial("trial_b", pop, 1, 28, 1, "controller_trial_b.json");
  const auto ra = make_report({}, a.accumulator);
  const auto rb = make_report({}, b.accumulator);
  const bool bg = rb.mean_bg > ra.mean_bg;
  const bool tir = rb.tir.mean[2] < ra.tir.mean[2];
  const bool bolus = rb.doses.bolus.mean > ra.doses.bolus.mean;
  const bool glucagon = rb.doses.glucagon.mean > ra.doses.glucagon.mean;
  auto mark = [](bool ok) { return ok ? "" : " (wrong sign)"; };
  return verdict(bg && tir && bolus && glucagon,
                 "A/B mean BG " + fixed(ra.mean_bg, 2) + "/" + fixed(rb.mean_bg, 2) + mark(bg) + ", normo TIR " +
                     fixed(100 * ra.tir.mean[2], 1) + "%/" + fixed(100 * rb.tir.mean[2], 1) + "%" + mark(tir) +
                     ", bolus " + fixed(ra.doses.bolus.mean, 1) + "/" + fixed(rb.doses.bolus.mean, 1) + " U/day" +
                     mark(bolus) + ", glucagon " + fixed(ra.doses.glucagon.mean, 0) + "/" +
                     fixed(rb.doses.glucagon.mean, 0) + " ug/day" + mark(glucagon));
}

Outcome criterion_11(Suite& suite) {
  const auto pop = fixtures::population(11, 100);
  const auto worst = suite.trial("worst-only", pop, 11, 7, 1, "controller_default.json", TracePolicy::worst_case_only);
  const auto all = suite.trial("worst-always", pop, 11, 7, 1, "controller_default.json", TracePolicy::always);
  if (!worst.worst || !worst.worst->trace) return verdict(false, "no worst-case trace retained");
  int above = 0;
  for (const auto& r : all.patients) {
    if (!r.aborted && worst.worst->min_bg > r.min_bg) ++above;
  }
  const auto& same = all.patients.at(worst.worst->patient_id);
  const bool trace_equal = same.trace == worst.worst->trace;
  return verdict(above == 0 && trace_equal && worst.accumulator == all.accumulator,
                 "worst patient " + std::to_string(worst.worst->patient_id) + " min BG " +
                     fixed(worst.worst->min_bg, 3) + " mmol/L; " + std::to_string(above) +
                     " patients lower; trace " + (trace_equal ? "matches" : "differs from") + " the always rerun");
}

Outcome criterion_12(Suite&) {
  const auto table = fixtures::table();
  const auto pop = fixtures::population(12, 10000);
  std::int64_t nonneg = 0, sd = 0, basal = 0;
  for (const auto& e : pop.entries) {
    const auto v = oracle::check_parameters(e.params, table);
    nonneg += !v.nonnegative;
    sd += !v.within_one_sd;
    basal += !v.basal_ok;
  }
  const double acceptance = static_cast<double>(pop.entries.size()) / static_cast<double>(pop.parameter_attempts);
  return verdict(nonneg + sd + basal == 0 && pop.entries.size() == 10000,
                 "10^4 sets: " + std::to_string(nonneg) + " negative, " + std::to_string(sd) + " outside one SD, " +
                     std::to_string(basal) + " with basal < 0.4 U/h; acceptance rate " + fixed(acceptance, 5));
}

Outcome criterion_13(Suite& suite) {
  std::int64_t steps = 0, violations = 0, boluses = 0, sessions = 0, monitored = 0;
  for (const auto& f : suite.factories) {
    steps += f->steps();
    violations += f->violations();
    boluses += f->exercise_boluses();
    sessions += f->sessions();
  }
  for (const auto& [name, report] : suite.reports) monitored += report.accumulator.safety_violations_;
  return verdict(steps > 0 && violations == 0 && monitored == 0 && boluses > 0,
                 std::to_string(steps) + " controller steps, " + std::to_string(sessions) + " exercise sessions, " +
                     std::to_string(boluses) + " exercise boluses; " + std::to_string(violations) +
                     " in-loop violations, " + std::to_string(monitored) + " engine-monitor violations");
}

Outcome criterion_14(Suite& suite) {
  fixtures::TempDir dir("acceptance-store");
  const Store store(dir.path() / "store");
  std::vector<std::string> failed;

  const auto pop = fixtures::population(14, 200);
  save_population(store, "pop", pop);
  const auto pop_file = read_text_file(store.path_of(ArtifactKind::population, "pop"));
  save_population(store, "pop", load_population(store, "pop"));
  if (read_text_file(store.path_of(ArtifactKind::population, "pop")) != pop_file ||
      !(load_population(store, "pop").entries == pop.entries)) {
    failed.push_back("population");
  }

  std::vector<Protocol> protocols;
  const GeneratedProtocols gen(fixtures::library(), {0.1, 0.1, 0.7, 1.3}, 14);
  for (const auto& e : pop.entries) {
    auto p = gen.protocol_for(e.patient, 52 * 7 * 86400);
    p.id = e.patient.id;
    protocols.push_back(std::move(p));
  }
  save_protocols(store, "protos", protocols);
  const auto proto_file = read_text_file(store.path_of(ArtifactKind::protocols, "protos"));
  save_protocols(store, "protos", load_protocols(store, "protos"));
  if (read_text_file(store.path_of(ArtifactKind::protocols, "protos")) != proto_file ||
      !(load_protocols(store, "protos") == protocols)) {
    failed.push_back("protocols");
  }

  const auto sets = parameter_sets_of(pop);
  save_parameter_sets(store, "sets", sets);
  const auto sets_file = read_text_file(store.path_of(ArtifactKind::parameter_sets, "sets"));
  save_parameter_sets(store, "sets", load_parameter_sets(store, "sets"));
  if (read_text_file(store.path_of(ArtifactKind::parameter_sets, "sets")) != sets_file ||
      !(load_parameter_sets(store, "sets") == sets)) {
    failed.push_back("parameter sets");
  }

  // A full run through the manifest path, then re-execution from its record.
  const auto data = fixtures::data_dir();
  const Json manifest_json = {
      {"trial_id", "roundtrip"},
      {"store", (dir.path() / "store").string()},
      {"output", (dir.path() / "out").string()},
      {"model", "hovorka_ext"},
      {"controller", (data / "controller_default.json").string()},
      {"population",
       {{"generate",
         {{"seed", 14},
          {"patients", 100},
          {"demographics", (data / "demographics.json").string()},
          {"parameters", (data / "parameter_distributions.json").string()}}}}},
      {"protocols", {{"library", (data / "basis_days.json").string()}, {"seed", 14}}},
      {"simulation", {{"dt_s", 30}, {"controller_period_s", 300}, {"horizon_weeks", 1}, {"seed", 14}}},
  };
  RunOptions options;
  options.threads = std::max(1U, std::thread::hardware_concurrency());
  const auto outcome = execute_run(parse_manifest(manifest_json, dir.path()), options);
  suite.reports.emplace_back("roundtrip", outcome.report);
  const auto report_file = read_text_file(store.path_of(ArtifactKind::report, outcome.record.report_id));
  save_report(store, outcome.record.report_id, load_report(store, outcome.record.report_id));
  if (read_text_file(store.path_of(ArtifactKind::report, outcome.record.report_id)) != report_file ||
      !(load_report(store, outcome.record.report_id) == outcome.report)) {
    failed.push_back("report");
  }
  const auto rerun = rerun_trial(store, "roundtrip", 1);
  if (!rerun.identical) failed.push_back("re-execution");

  std::string detail = "population, protocols, parameter sets and report byte-identical; re-execution ";
  detail += rerun.identical ? "reproduces the stored report" : "DIFFERS";
  if (!failed.empty()) {
    detail = "mismatch:";
    for (const auto& f : failed) detail += " " + f;
  }
  return verdict(failed.empty(), detail);
}

std::set<int> parse_list(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::set<int> expect_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = parse_list(argv[++i]);
    } else if (arg == "--expect-fail" && i + 1 < argc) {
      expect_fail = parse_list(argv[++i]);
    } else {
      std::cerr << "usage: vct_acceptance [--only 1,2,...] [--expect-fail 5,...]\n";
      return 2;
    }
  }

  // Criteria 4, 8, 9 and 13 summarize the trials run by the others, so they go last.
  const std::vector<std::pair<int, std::function<Outcome(Suite&)>>> order{
      {1, criterion_1},   {2, criterion_2},   {3, criterion_3},   {5, criterion_5},  {6, criterion_6},
      {7, criterion_7},   {10, criterion_10}, {11, criterion_11}, {12, criterion_12}, {14, criterion_14},
      {8, criterion_8},   {9, criterion_9},   {4, criterion_4},   {13, criterion_13}};

  Suite suite;
  std::map<int, Outcome> results;
  for (const auto& [n, fn] : order) {
    if (!only.empty() && !only.count(n)) continue;
    std::cerr << "running criterion " << n << "...\n";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      results[n] = fn(suite);
    } catch (const std::exception& e) {
      results[n] = {Status::fail, std::string("exception: ") + e.what()};
    }
    std::cerr << "  done in " << fixed(seconds_since(t0), 1) << " s\n";
  }

  int unexpected = 0;
  for (const auto& [n, r] : results) {
    const char* label = r.status == Status::pass ? "PASS" : r.status == Status::skip ? "SKIP" : "FAIL";
    std::string note;
    if (r.status == Status::fail && expect_fail.count(n)) {
      note = " [known shortfall, documented in README]";
    } else if (r.status == Status::fail) {
      ++unexpected;
    }
    std::cout << "criterion " << std::setw(2) << n << " " << label << "  " << r.detail << note << "\n";
  }
  std::cout.flush();
  return unexpected == 0 ? 0 : 1;
}
