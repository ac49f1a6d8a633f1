#include "vct/run.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "vct/exports.hpp"
#include "vct/physiology.hpp"

#ifndef VCT_DATA_DIR
#define VCT_DATA_DIR "data"
#endif

namespace vct {

namespace fs = std::filesystem;

namespace {

fs::path resolve_path(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path data_file(const char* name) { return fs::path(VCT_DATA_DIR) / name; }

template <class T>
T load_config_file(const fs::path& path, const char* what) {
  return parse_as<T>(read_json_file(path), (std::string(what) + " " + path.string()).c_str());
}

const Json& require(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("manifest: missing '") + key + "'");
  return j.at(key);
}

}  // namespace

void RunManifest::validate() const {
  validate_artifact_id(trial_id);
  if (population_id.empty() && !population_recipe) {
    throw ConfigError("manifest: population needs an id or a generate recipe");
  }
  if (population_recipe && population_recipe->patients == 0) throw ConfigError("manifest: population size must be positive");
  if (!library && stored_protocols.empty()) throw ConfigError("manifest: protocols need a library or a stored id");
  controller.validate();
  simulation.validate();
}

RunManifest parse_manifest(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("manifest: expected a JSON object");
  RunManifest m;
  m.source = j;
  try {
    m.trial_id = require(j, "trial_id").get<std::string>();
    m.store = resolve_path(base_dir, j.value("store", std::string("store")));
    m.output = resolve_path(base_dir, j.value("output", "out/" + m.trial_id));
    m.model_id = j.value("model", std::string("hovorka_ext"));

    const Json& pop = require(j, "population");
    m.population_id = pop.value("id", std::string());
    if (pop.contains("generate")) {
      const Json& g = pop.at("generate");
      PopulationRecipe r;
      r.seed = g.value("seed", std::uint64_t{0});
      r.patients = require(g, "patients").get<std::uint64_t>();
      r.demographics = g.contains("demographics") ? resolve_path(base_dir, g.at("demographics").get<std::string>())
                                                  : data_file("demographics.json");
      r.parameters = g.contains("parameters") ? resolve_path(base_dir, g.at("parameters").get<std::string>())
                                              : data_file("parameter_distributions.json");
      m.population_recipe = r;
    }

    if (j.contains("simulation")) m.simulation = parse_as<SimulationConfig>(j.at("simulation"), "manifest simulation");

    const Json& prot = j.value("protocols", Json::object());
    if (prot.contains("stored")) {
      m.stored_protocols = prot.at("stored").get<std::string>();
    } else {
      m.library = prot.contains("library") ? resolve_path(base_dir, prot.at("library").get<std::string>())
                                           : data_file("basis_days.json");
    }
    if (prot.contains("announcement")) m.announcement = parse_as<AnnouncementPolicy>(prot.at("announcement"), "manifest announcement");
    m.protocol_seed = prot.value("seed", m.simulation.seed);

    const Json& ctrl = j.value("controller", Json(data_file("controller_default.json").string()));
    if (ctrl.is_string()) {
      m.controller = load_config_file<DualHormoneParameters>(resolve_path(base_dir, ctrl.get<std::string>()), "controller profile");
    } else {
      m.controller = parse_as<DualHormoneParameters>(ctrl, "manifest controller");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

RunManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_json_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

RunManifest apply_options(RunManifest m, const RunOptions& o) {
  if (o.seed) {
    m.simulation.seed = *o.seed;
    m.protocol_seed = *o.seed;
    m.source["simulation"]["seed"] = *o.seed;
    if (!m.source.contains("protocols")) m.source["protocols"] = Json::object();
    m.source["protocols"]["seed"] = *o.seed;
  }
  if (o.patients) {
    if (!m.population_recipe) throw ConfigError("--patients needs a population generate recipe in the manifest");
    m.population_recipe->patients = *o.patients;
    m.population_id.clear();
    m.source["population"].erase("id");
    m.source["population"]["generate"]["patients"] = *o.patients;
  }
  if (o.out) {
    m.output = *o.out;
    m.source["output"] = o.out->string();
  }
  if (o.store_trace) {
    m.simulation.store_trace = *o.store_trace;
    m.source["simulation"]["store_trace"] = to_string(*o.store_trace);
  }
  m.validate();
  return m;
}

std::string recipe_population_id(const PopulationRecipe& r, const DemographicsConfig& demographics,
                                 const ParameterDistributionTable& table) {
  const Json key{{"seed", r.seed}, {"patients", r.patients}, {"demographics", demographics}, {"parameters", table}};
  return "pop-" + std::to_string(r.patients) + "-" + content_hash(key);
}

Population resolve_population(const Store& store, const RunManifest& m, std::string& population_id, unsigned threads) {
  population_id = m.population_id;
  if (!m.population_recipe) return load_population(store, population_id);

  const auto& r = *m.population_recipe;
  const auto demographics = load_config_file<DemographicsConfig>(r.demographics, "demographics");
  const auto table = load_config_file<ParameterDistributionTable>(r.parameters, "parameter table");
  if (population_id.empty()) population_id = recipe_population_id(r, demographics, table);
  if (store.contains(ArtifactKind::population, population_id)) return load_population(store, population_id);

  Population pop = generate_population(r.seed, r.patients, demographics, table, find_model(table.model_id), threads);
  save_population(store, population_id, pop);
  return pop;
}

RunOutcome execute_run(const RunManifest& manifest, const RunOptions& options) {
  const auto say = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };
  const Store store(manifest.store);
  const PatientModel& model = find_model(manifest.model_id);
  const DualHormoneFactory factory(manifest.controller);

  RunOutcome out;
  TrialRecord& rec = out.record;
  rec.trial_id = manifest.trial_id;
  rec.created_utc = utc_timestamp();
  rec.seed = manifest.simulation.seed;
  rec.model_id = std::string(model.id());
  rec.controller_id = std::string(factory.id());
  rec.config = manifest.simulation;
  rec.manifest = manifest.source;

  // Resolve every reference before simulating.
  const Population population = resolve_population(store, manifest, rec.population_id, options.threads);
  say("population " + rec.population_id + ": " + std::to_string(population.entries.size()) + " patients");

  std::unique_ptr<ProtocolSource> protocols;
  if (manifest.library) {
    const auto library = load_config_file<ProtocolLibrary>(*manifest.library, "protocol library");
    library.validate();
    const std::string library_id = "lib-" + content_hash(Json(library));
    save_library(store, library_id, library);
    rec.protocols = {ProtocolReference::Kind::generated, library_id, manifest.announcement, manifest.protocol_seed};
    protocols = std::make_unique<GeneratedProtocols>(library, manifest.announcement, manifest.protocol_seed);
  } else {
    rec.protocols = {ProtocolReference::Kind::stored, manifest.stored_protocols, {}, 0};
    protocols = std::make_unique<StoredProtocols>(load_protocols(store, manifest.stored_protocols));
  }
  rec.profile_hash = save_profile(store, manifest.controller);

  say("running " + rec.trial_id + " on " + std::to_string(options.threads) + " thread(s)");
  std::uint64_t next_report = 0;
  const ProgressFn progress = [&](std::uint64_t done, std::uint64_t total) {
    if (done >= next_report || done == total) {
      say("  " + std::to_string(done) + "/" + std::to_string(total) + " patients");
      next_report = done + std::max<std::uint64_t>(total / 10, 1);
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  out.output = run_trial(population, *protocols, factory, model, manifest.simulation, options.threads, progress);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const TrialMetadata meta{rec.trial_id, rec.seed, rec.model_id, rec.controller_id, rec.profile_hash,
                           manifest.simulation.controller_period_s};
  out.report = make_report(meta, out.output.accumulator);
  rec.report_id = rec.trial_id;
  save_report(store, rec.report_id, out.report);

  out.output_dir = manifest.output;
  write_text_file(out.output_dir / "report.json", canonical_dump(Json(out.report)));
  write_report_exports(out.report, out.output_dir);

  if (out.output.worst && out.output.worst->trace) {
    rec.trace_id = rec.trial_id + "-worst";
    save_trace(store, rec.trace_id, *out.output.worst->trace);
    write_text_file(out.output_dir / "worst_trace.csv", trace_csv(*out.output.worst->trace));
  }
  for (const auto& r : out.output.patients) {
    if (r.trace) save_trace(store, rec.trial_id + "-p" + std::to_string(r.patient_id), *r.trace);
  }

  save_trial_record(store, rec);
  write_text_file(out.output_dir / "trial_record.json", canonical_dump(Json(rec)));
  return out;
}

Json run_summary(const RunOutcome& o) {
  const auto& acc = o.output.accumulator;
  Json tir = Json::object();
  for (std::size_t r = 0; r < kRangeCount; ++r) tir[std::string(to_string(static_cast<GlycemicRange>(r)))] = o.report.tir.mean[r];
  Json worst = nullptr;
  if (acc.worst_) worst = Json{{"patient_id", acc.worst_->patient_id}, {"min_bg", acc.worst_->min_bg}};
  return Json{{"trial_id", o.record.trial_id},
              {"patients", acc.patients()},
              {"aborted", acc.aborted().size()},
              {"mean_tir", tir},
              {"mean_bg", o.report.mean_bg},
              {"mean_daily_basal_u", o.report.doses.basal.mean},
              {"mean_daily_bolus_u", o.report.doses.bolus.mean},
              {"mean_daily_glucagon_ug", o.report.doses.glucagon.mean},
              {"worst_case", worst},
              {"safety_violations", acc.safety_violations_},
              {"wall_seconds", o.wall_seconds},
              {"isa", simd::to_string(o.output.isa)},
              {"output", o.output_dir.string()},
              {"store", o.record.manifest.value("store", std::string("store"))}};
}

std::string format_summary_text(const Json& s) {
  std::ostringstream out;
  out << "trial " << s.at("trial_id").get<std::string>() << ": " << s.at("patients").get<std::uint64_t>() << " patients, "
      << s.at("aborted").get<std::uint64_t>() << " aborted\n";
  out << "mean TIR:";
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    const std::string range(to_string(static_cast<GlycemicRange>(r)));
    out << ' ' << range << ' ' << format_number(std::round(s.at("mean_tir").at(range).get<double>() * 1000.0) / 10.0) << '%';
  }
  out << "\nmean BG " << format_number(std::round(s.at("mean_bg").get<double>() * 100.0) / 100.0) << " mmol/L\n";
  if (!s.at("worst_case").is_null()) {
    out << "worst case: patient " << s.at("worst_case").at("patient_id").get<std::uint64_t>() << ", min BG "
        << format_number(std::round(s.at("worst_case").at("min_bg").get<double>() * 100.0) / 100.0) << " mmol/L\n";
  }
  out << "wall time " << format_number(std::round(s.at("wall_seconds").get<double>() * 100.0) / 100.0) << " s ("
      << s.at("isa").get<std::string>() << ")\n";
  return out.str();
}

}  // namespace vct
