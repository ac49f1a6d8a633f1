// vct: command-line front end of the virtual clinical trial engine.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vct/exports.hpp"
#include "vct/parallel.hpp"
#include "vct/physiology.hpp"
#include "vct/run.hpp"
#include "vct/serialize.hpp"
#include "vct/storage.hpp"

namespace fs = std::filesystem;
using namespace vct;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

struct Common {
  std::string format = "text";
  bool quiet = false;

  bool structured() const { return format == "structured"; }
  void progress(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }
  // Machine-readable summary on stdout, or the text form.
  void emit(const Json& summary, const std::string& text) const {
    if (structured()) {
      std::cout << summary.dump(2) << '\n';
    } else {
      std::cout << text;
    }
  }
};

int cmd_generate_population(const Common& c, std::uint64_t seed, std::uint64_t n, const std::string& demographics_path,
                            const std::string& parameters_path, const std::string& out, const std::string& store_dir,
                            std::string id, unsigned threads) {
  const auto demographics = parse_as<DemographicsConfig>(read_json_file(demographics_path), "demographics");
  const auto table = parse_as<ParameterDistributionTable>(read_json_file(parameters_path), "parameter table");
  demographics.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Population pop = generate_population(seed, n, demographics, table, find_model(table.model_id), threads);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.progress("generated " + std::to_string(n) + " patients in " + format_number(secs) + " s (" +
             format_number(secs > 0 ? static_cast<double>(n) / secs : 0.0) + " patients/s, " +
             std::to_string(pop.parameter_attempts) + " parameter draws)");

  if (!out.empty()) write_text_file(out, population_to_jsonl(pop));
  if (!store_dir.empty()) {
    if (id.empty()) id = recipe_population_id({seed, n, demographics_path, parameters_path}, demographics, table);
    save_population(Store(store_dir), id, pop);
  }
  const Json summary{{"patients", n},
                     {"seed", seed},
                     {"parameter_attempts", pop.parameter_attempts},
                     {"seconds", secs},
                     {"population_id", id},
                     {"out", out}};
  std::string text = "population: " + std::to_string(n) + " patients, " + std::to_string(pop.parameter_attempts) +
                     " parameter draws";
  if (!id.empty()) text += ", stored as " + id;
  c.emit(summary, text + "\n");
  return kOk;
}

int cmd_generate_protocols(const Common& c, const std::string& store_dir, const std::string& population_id,
                           const std::string& library_path, std::uint64_t seed, std::int64_t weeks,
                           const std::string& id) {
  const Store store(store_dir);
  const Population pop = load_population(store, population_id);
  const auto library = parse_as<ProtocolLibrary>(read_json_file(library_path), "protocol library");
  library.validate();
  const GeneratedProtocols gen(library, {}, seed);
  std::vector<Protocol> protocols;
  for (const auto& e : pop.entries) protocols.push_back(gen.protocol_for(e.patient, weeks * 7 * 86400));
  save_protocols(store, id, protocols);
  c.emit(Json{{"protocols_id", id}, {"protocols", protocols.size()}, {"weeks", weeks}},
         "protocols: " + std::to_string(protocols.size()) + " stored as " + id + "\n");
  return kOk;
}

int cmd_run(const Common& c, const std::string& manifest_path, RunOptions options) {
  options.progress = [&c](const std::string& msg) { c.progress(msg); };
  const RunManifest manifest = apply_options(load_manifest(manifest_path), options);
  const RunOutcome outcome = execute_run(manifest, options);
  Json summary = run_summary(outcome);
  summary["store"] = manifest.store.string();
  c.emit(summary, format_summary_text(summary));
  return outcome.output.aborted.empty() ? kOk : kRuntime;
}

TrialReport read_report(const std::string& path) {
  return parse_as<TrialReport>(read_json_file(path), ("report " + path).c_str());
}

int cmd_compare(const Common& c, const std::string& a_path, const std::string& b_path, const std::string& out) {
  const TrialReport a = read_report(a_path);
  const TrialReport b = read_report(b_path);
  const ComparisonReport cmp = compare_trials(a, b);
  const Json j(cmp);
  if (!out.empty()) {
    write_text_file(fs::path(out) / "comparison.json", canonical_dump(j));
    write_comparison_exports(cmp, out);
  }
  const auto& d = cmp.deltas;
  std::string text = "deltas (b - a): mean BG " + format_number(d.mean_bg) + " mmol/L, TIR normo " +
                     format_number(d.mean_tir[static_cast<std::size_t>(GlycemicRange::normo)]) + ", bolus " +
                     format_number(d.mean_daily_bolus_u) + " U/day, glucagon " + format_number(d.mean_daily_glucagon_ug) +
                     " ug/day, basal " + format_number(d.mean_daily_basal_u) + " U/day\n";
  c.emit(j.at("deltas"), text);
  return kOk;
}

int cmd_export_trace(const Common& c, const std::string& store_dir, const std::string& trial_id,
                     const std::string& patient, std::optional<double> from_h, std::optional<double> to_h,
                     const std::string& out) {
  const Store store(store_dir);
  const TrialRecord rec = load_trial_record(store, trial_id);
  std::string trace_id;
  if (patient == "worst") {
    if (rec.trace_id.empty()) throw DataError("trial '" + trial_id + "' kept no worst-case trace");
    trace_id = rec.trace_id;
  } else {
    std::size_t pos = 0;
    const auto pid = std::stoull(patient, &pos);
    if (pos != patient.size()) throw ConfigError("patient selector must be 'worst' or an id");
    trace_id = trial_id + "-p" + std::to_string(pid);
    if (!store.contains(ArtifactKind::trace, trace_id)) {
      const auto worst = store.contains(ArtifactKind::report, rec.report_id)
                             ? load_report(store, rec.report_id).accumulator.worst_
                             : std::nullopt;
      if (worst && worst->patient_id == pid && !rec.trace_id.empty()) {
        trace_id = rec.trace_id;
      } else {
        throw DataError("no trace retained for patient " + patient + " in trial '" + trial_id +
                        "' (run with --store-trace always)");
      }
    }
  }
  const Trace full = load_trace(store, trace_id);
  TraceWindow window;
  if (from_h) window.from_s = *from_h * 3600.0;
  if (to_h) window.to_s = *to_h * 3600.0;
  const Trace slice = slice_trace(full, window);
  const std::string csv = trace_csv(slice);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(out, csv);
    double min_bg = slice.bg.empty() ? 0.0 : slice.bg.front();
    for (double v : slice.bg) min_bg = std::min(min_bg, v);
    c.emit(Json{{"trace_id", trace_id}, {"rows", slice.rows()}, {"min_bg", min_bg}, {"out", out}},
           "trace " + trace_id + ": " + std::to_string(slice.rows()) + " rows, min BG " + format_number(min_bg) +
               " mmol/L -> " + out + "\n");
  }
  return kOk;
}

int cmd_export_sql(const Common& c, const std::string& store_dir, const std::string& out, bool schema_only) {
  const std::string sql = schema_only ? sql_schema() : export_sql(Store(store_dir));
  if (out.empty()) {
    std::cout << sql;
  } else {
    write_text_file(out, sql);
    c.emit(Json{{"out", out}, {"bytes", sql.size()}}, "SQL written to " + out + "\n");
  }
  return kOk;
}

int cmd_query(const Common& c, const std::string& store_dir, const std::string& population_id,
              const PopulationFilter& filter, const std::string& out) {
  const Population sub = query_population(Store(store_dir), population_id, filter);
  if (!out.empty()) write_text_file(out, population_to_jsonl(sub));
  Json ids = Json::array();
  for (const auto& e : sub.entries) ids.push_back(e.patient.id);
  c.emit(Json{{"matches", sub.entries.size()}, {"patient_ids", ids}},
         std::to_string(sub.entries.size()) + " matching patients\n");
  return kOk;
}

int cmd_rerun(const Common& c, const std::string& store_dir, const std::string& trial_id, unsigned threads) {
  const RerunResult r = rerun_trial(Store(store_dir), trial_id, threads);
  c.emit(Json{{"trial_id", trial_id}, {"identical", r.identical}},
         std::string("rerun of ") + trial_id + (r.identical ? ": report identical\n" : ": REPORT DIFFERS\n"));
  return r.identical ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual clinical trials of closed-loop diabetes treatment"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"text", "structured"}));
  app.add_flag("-q,--quiet", common.quiet, "No progress on stderr");

  unsigned threads = default_thread_count();
  std::uint64_t seed = 0;
  std::uint64_t patients = 0;
  std::string out;
  std::string store_dir = "store";

  auto* gen = app.add_subcommand("generate-population", "Sample fictive patients and their parameters");
  std::string demographics = (fs::path(VCT_DATA_DIR) / "demographics.json").string();
  std::string parameters = (fs::path(VCT_DATA_DIR) / "parameter_distributions.json").string();
  std::string pop_id;
  std::string pop_store;
  gen->add_option("--seed", seed, "Population seed");
  gen->add_option("--patients,-n", patients, "Number of patients")->required();
  gen->add_option("--demographics", demographics, "Demographics config")->check(CLI::ExistingFile);
  gen->add_option("--parameters", parameters, "Parameter distribution table")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "JSONL output file");
  gen->add_option("--store", pop_store, "Also save into this store");
  gen->add_option("--id", pop_id, "Population id in the store");
  gen->add_option("--threads", threads, "Worker threads");

  auto* genp = app.add_subcommand("generate-protocols", "Compose per-patient protocols and store them");
  std::string library = (fs::path(VCT_DATA_DIR) / "basis_days.json").string();
  std::string protocols_id;
  std::int64_t weeks = 52;
  genp->add_option("--store", store_dir, "Store directory");
  genp->add_option("--population", pop_id, "Population id")->required();
  genp->add_option("--library", library, "Basis day/week/season library")->check(CLI::ExistingFile);
  genp->add_option("--seed", seed, "Protocol seed");
  genp->add_option("--weeks", weeks, "Horizon in weeks")->check(CLI::PositiveNumber);
  genp->add_option("--id", protocols_id, "Protocols id")->required();

  auto* run = app.add_subcommand("run", "Run a trial described by a manifest");
  std::string manifest;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::uint64_t> run_patients;
  std::string store_trace;
  run->add_option("--manifest", manifest, "Run manifest")->required()->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "Worker threads (default: all cores)");
  run->add_option("--seed", run_seed, "Override the trial seed");
  run->add_option("--patients", run_patients, "Override the population size");
  run->add_option("--out", out, "Override the output directory");
  run->add_option("--store-trace", store_trace, "Trace retention")->check(CLI::IsMember({"never", "worst", "always"}));

  auto* cmp = app.add_subcommand("compare", "Compare two trial reports");
  std::string report_a;
  std::string report_b;
  cmp->add_option("report_a", report_a, "Report of trial A")->required();
  cmp->add_option("report_b", report_b, "Report of trial B")->required();
  cmp->add_option("--out", out, "Directory for comparison exports");

  auto* tr = app.add_subcommand("export-trace", "Export a retained trace as CSV");
  std::string trial_id;
  std::string patient = "worst";
  std::optional<double> from_h;
  std::optional<double> to_h;
  tr->add_option("--store", store_dir, "Store directory");
  tr->add_option("--trial", trial_id, "Trial id")->required();
  tr->add_option("--patient", patient, "'worst' or a patient id");
  tr->add_option("--from-hours", from_h, "Window start (h)");
  tr->add_option("--to-hours", to_h, "Window end (h)");
  tr->add_option("--out", out, "CSV file (stdout when empty)");

  auto* sql = app.add_subcommand("export-sql", "Export the store as SQL DDL and INSERT statements");
  bool schema_only = false;
  sql->add_option("--store", store_dir, "Store directory");
  sql->add_option("--out", out, "SQL file (stdout when empty)");
  sql->add_flag("--schema-only", schema_only, "Only the DDL");

  auto* query = app.add_subcommand("query", "Select patients of a stored population");
  PopulationFilter filter;
  std::string sex;
  query->add_option("--store", store_dir, "Store directory");
  query->add_option("--population", pop_id, "Population id")->required();
  query->add_option("--sex", sex, "female or male")->check(CLI::IsMember({"female", "male"}));
  query->add_option("--weight-min", filter.weight_min_kg, "kg");
  query->add_option("--weight-max", filter.weight_max_kg, "kg");
  query->add_option("--height-min", filter.height_min_cm, "cm");
  query->add_option("--height-max", filter.height_max_cm, "cm");
  query->add_option("--age-min", filter.age_min, "years");
  query->add_option("--age-max", filter.age_max, "years");
  query->add_option("--out", out, "JSONL output file");

  auto* rerun = app.add_subcommand("rerun", "Re-execute a stored trial and compare its report");
  rerun->add_option("--store", store_dir, "Store directory");
  rerun->add_option("--trial", trial_id, "Trial id")->required();
  rerun->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      return cmd_generate_population(common, seed, patients, demographics, parameters, out, pop_store, pop_id, threads);
    }
    if (*genp) return cmd_generate_protocols(common, store_dir, pop_id, library, seed, weeks, protocols_id);
    if (*run) {
      RunOptions options;
      options.threads = threads;
      options.seed = run_seed;
      options.patients = run_patients;
      if (!out.empty()) options.out = out;
      if (!store_trace.empty()) options.store_trace = parse_trace_policy(store_trace);
      return cmd_run(common, manifest, options);
    }
    if (*cmp) return cmd_compare(common, report_a, report_b, out);
    if (*tr) return cmd_export_trace(common, store_dir, trial_id, patient, from_h, to_h, out);
    if (*sql) return cmd_export_sql(common, store_dir, out, schema_only);
    if (*query) {
      if (!sex.empty()) filter.sex = parse_sex(sex);
      return cmd_query(common, store_dir, pop_id, filter, out);
    }
    if (*rerun) return cmd_rerun(common, store_dir, trial_id, threads);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const GridMismatchError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
