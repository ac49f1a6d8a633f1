#include "vct/storage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

#include <zlib.h>

#include "vct/physiology.hpp"

namespace vct {

namespace fs = std::filesystem;

namespace {

constexpr ArtifactKind kAllKinds[] = {ArtifactKind::population, ArtifactKind::protocols, ArtifactKind::parameter_sets,
                                      ArtifactKind::library,    ArtifactKind::profile,   ArtifactKind::report,
                                      ArtifactKind::trace,      ArtifactKind::trial};

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

}  // namespace

std::string_view to_string(ArtifactKind kind) noexcept {
  switch (kind) {
    case ArtifactKind::population: return "population";
    case ArtifactKind::protocols: return "protocols";
    case ArtifactKind::parameter_sets: return "parameter_sets";
    case ArtifactKind::library: return "library";
    case ArtifactKind::profile: return "profile";
    case ArtifactKind::report: return "report";
    case ArtifactKind::trace: return "trace";
    case ArtifactKind::trial: return "trial";
  }
  return "unknown";
}

std::string_view directory_of(ArtifactKind kind) noexcept {
  switch (kind) {
    case ArtifactKind::population: return "populations";
    case ArtifactKind::protocols: return "protocols";
    case ArtifactKind::parameter_sets: return "parameter_sets";
    case ArtifactKind::library: return "libraries";
    case ArtifactKind::profile: return "profiles";
    case ArtifactKind::report: return "reports";
    case ArtifactKind::trace: return "traces";
    case ArtifactKind::trial: return "trials";
  }
  return "unknown";
}

void validate_artifact_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && id.front() != '.' &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                           c == '_' || c == '-';
                  });
  if (!ok) throw ConfigError("invalid artifact id '" + id + "'");
}

std::uint32_t crc32_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string encode_artifact(ArtifactKind kind, const std::string& body) {
  const Json header{{"checksum", hex32(crc32_of(body))},
                    {"kind", to_string(kind)},
                    {"length", body.size()},
                    {"schema_version", kSchemaVersion}};
  return header.dump() + "\n" + body;
}

std::string decode_artifact(ArtifactKind kind, const std::string& bytes, const std::string& what) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError(what + ": missing header");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception&) {
    throw DataError(what + ": malformed header");
  }
  if (!header.is_object() || !header.contains("schema_version") || !header.contains("kind") ||
      !header.contains("length") || !header.contains("checksum")) {
    throw DataError(what + ": incomplete header");
  }
  try {
    if (header.at("schema_version").get<int>() != kSchemaVersion) {
      throw DataError(what + ": schema version " + header.at("schema_version").dump() + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
    }
    if (header.at("kind").get<std::string>() != to_string(kind)) {
      throw DataError(what + ": expected a " + std::string(to_string(kind)) + " artifact, found " +
                      header.at("kind").get<std::string>());
    }
    std::string body = bytes.substr(nl + 1);
    if (header.at("length").get<std::uint64_t>() != body.size()) throw DataError(what + ": length mismatch");
    if (header.at("checksum").get<std::string>() != hex32(crc32_of(body))) throw DataError(what + ": checksum mismatch");
    return body;
  } catch (const nlohmann::json::exception&) {
    throw DataError(what + ": mistyped header");
  }
}

// --- store -------------------------------------------------------------------

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (auto kind : kAllKinds) {
    fs::create_directories(root_ / directory_of(kind), ec);
    if (ec) throw DataError("cannot create store directory " + (root_ / directory_of(kind)).string() + ": " + ec.message());
  }
}

fs::path Store::path_of(ArtifactKind kind, const std::string& id) const {
  validate_artifact_id(id);
  return root_ / directory_of(kind) / (id + ".vct");
}

bool Store::contains(ArtifactKind kind, const std::string& id) const { return fs::exists(path_of(kind, id)); }

std::vector<std::string> Store::list(ArtifactKind kind) const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / directory_of(kind))) {
    if (entry.is_regular_file() && entry.path().extension() == ".vct") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void Store::write(ArtifactKind kind, const std::string& id, const std::string& body) const {
  const fs::path target = path_of(kind, id);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    const std::string bytes = encode_artifact(kind, body);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw DataError("cannot replace " + target.string() + ": " + ec.message());
}

std::string Store::read(ArtifactKind kind, const std::string& id) const {
  const fs::path p = path_of(kind, id);
  const std::string what = std::string(to_string(kind)) + " '" + id + "'";
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFoundError("no " + what + " in store " + root_.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_artifact(kind, ss.str(), what);
}

// --- typed artifacts ---------------------------------------------------------

namespace {

template <class T>
T parse_body(const std::string& body, const std::string& what) {
  try {
    return Json::parse(body).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(what + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(what + ": " + e.what());
  }
}

}  // namespace

ParameterSets parameter_sets_of(const Population& population) {
  ParameterSets sets;
  for (const auto& e : population.entries) sets.emplace(e.patient.id, e.params);
  return sets;
}

void save_population(const Store& store, const std::string& id, const Population& population) {
  store.write(ArtifactKind::population, id, population_to_jsonl(population));
}

Population load_population(const Store& store, const std::string& id) {
  try {
    return population_from_jsonl(store.read(ArtifactKind::population, id));
  } catch (const NotFoundError&) {
    throw;
  } catch (const DataError& e) {
    throw DataError("population '" + id + "': " + e.what());
  }
}

void save_protocols(const Store& store, const std::string& id, const std::vector<Protocol>& protocols) {
  store.write(ArtifactKind::protocols, id, canonical_dump(Json(protocols)));
}

std::vector<Protocol> load_protocols(const Store& store, const std::string& id) {
  return parse_body<std::vector<Protocol>>(store.read(ArtifactKind::protocols, id), "protocols '" + id + "'");
}

void save_parameter_sets(const Store& store, const std::string& id, const ParameterSets& sets) {
  Json rows = Json::array();
  for (const auto& [patient_id, params] : sets) rows.push_back(Json{{"patient_id", patient_id}, {"params", params}});
  store.write(ArtifactKind::parameter_sets, id, canonical_dump(rows));
}

ParameterSets load_parameter_sets(const Store& store, const std::string& id) {
  const std::string what = "parameter sets '" + id + "'";
  const Json rows = parse_body<Json>(store.read(ArtifactKind::parameter_sets, id), what);
  ParameterSets sets;
  try {
    for (const auto& row : rows) sets.emplace(row.at("patient_id").get<std::uint64_t>(), row.at("params").get<ParameterSet>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(what + ": " + e.what());
  }
  return sets;
}

void save_library(const Store& store, const std::string& id, const ProtocolLibrary& library) {
  store.write(ArtifactKind::library, id, canonical_dump(Json(library)));
}

ProtocolLibrary load_library(const Store& store, const std::string& id) {
  return parse_body<ProtocolLibrary>(store.read(ArtifactKind::library, id), "library '" + id + "'");
}

std::string save_profile(const Store& store, const DualHormoneParameters& profile) {
  const std::string hash = profile_hash(profile);
  store.write(ArtifactKind::profile, hash, canonical_dump(Json(profile)));
  return hash;
}

DualHormoneParameters load_profile(const Store& store, const std::string& hash) {
  auto profile = parse_body<DualHormoneParameters>(store.read(ArtifactKind::profile, hash), "profile '" + hash + "'");
  if (profile_hash(profile) != hash) throw DataError("profile '" + hash + "': content hash mismatch");
  return profile;
}

void save_report(const Store& store, const std::string& id, const TrialReport& report) {
  store.write(ArtifactKind::report, id, canonical_dump(Json(report)));
}

TrialReport load_report(const Store& store, const std::string& id) {
  return parse_body<TrialReport>(store.read(ArtifactKind::report, id), "report '" + id + "'");
}

void save_trace(const Store& store, const std::string& id, const Trace& trace) {
  store.write(ArtifactKind::trace, id, Json(trace).dump() + "\n");
}

Trace load_trace(const Store& store, const std::string& id) {
  return parse_body<Trace>(store.read(ArtifactKind::trace, id), "trace '" + id + "'");
}

// --- queries -----------------------------------------------------------------

int age_in_years(std::chrono::year_month_day dob, std::chrono::year_month_day on) {
  int age = static_cast<int>(on.year()) - static_cast<int>(dob.year());
  if (std::chrono::month_day{on.month(), on.day()} < std::chrono::month_day{dob.month(), dob.day()}) --age;
  return age;
}

bool PopulationFilter::matches(const Patient& p) const {
  if (sex && p.sex != *sex) return false;
  if (weight_min_kg && p.body_weight_kg < *weight_min_kg) return false;
  if (weight_max_kg && p.body_weight_kg > *weight_max_kg) return false;
  if (height_min_cm && p.height_cm < *height_min_cm) return false;
  if (height_max_cm && p.height_cm > *height_max_cm) return false;
  if (age_min || age_max) {
    const int age = age_in_years(p.date_of_birth, reference_date);
    if (age_min && age < *age_min) return false;
    if (age_max && age > *age_max) return false;
  }
  return true;
}

Population query_population(const Population& population, const PopulationFilter& filter) {
  Population out;
  for (const auto& e : population.entries) {
    if (filter.matches(e.patient)) out.entries.push_back(e);
  }
  return out;
}

Population query_population(const Store& store, const std::string& population_id, const PopulationFilter& filter) {
  return query_population(load_population(store, population_id), filter);
}

// --- trial records -----------------------------------------------------------

namespace {

std::string_view to_string(ProtocolReference::Kind k) { return k == ProtocolReference::Kind::generated ? "generated" : "stored"; }

}  // namespace

void to_json(Json& j, const ProtocolReference& v) {
  j = Json{{"kind", to_string(v.kind)}, {"id", v.id}, {"policy", v.policy}, {"seed", v.seed}};
}

void from_json(const Json& j, ProtocolReference& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "generated") {
    v.kind = ProtocolReference::Kind::generated;
  } else if (kind == "stored") {
    v.kind = ProtocolReference::Kind::stored;
  } else {
    throw ConfigError("unknown protocol reference kind '" + kind + "'");
  }
  j.at("id").get_to(v.id);
  if (j.contains("policy")) j.at("policy").get_to(v.policy);
  if (j.contains("seed")) j.at("seed").get_to(v.seed);
}

void to_json(Json& j, const TrialRecord& v) {
  j = Json{{"trial_id", v.trial_id},
           {"created_utc", v.created_utc},
           {"seed", v.seed},
           {"model_id", v.model_id},
           {"controller_id", v.controller_id},
           {"profile_hash", v.profile_hash},
           {"population_id", v.population_id},
           {"protocols", v.protocols},
           {"config", v.config},
           {"report_id", v.report_id},
           {"trace_id", v.trace_id},
           {"manifest", v.manifest}};
}

void from_json(const Json& j, TrialRecord& v) {
  j.at("trial_id").get_to(v.trial_id);
  j.at("created_utc").get_to(v.created_utc);
  j.at("seed").get_to(v.seed);
  j.at("model_id").get_to(v.model_id);
  j.at("controller_id").get_to(v.controller_id);
  j.at("profile_hash").get_to(v.profile_hash);
  j.at("population_id").get_to(v.population_id);
  j.at("protocols").get_to(v.protocols);
  j.at("config").get_to(v.config);
  j.at("report_id").get_to(v.report_id);
  j.at("trace_id").get_to(v.trace_id);
  v.manifest = j.at("manifest");
}

void save_trial_record(const Store& store, const TrialRecord& record) {
  store.write(ArtifactKind::trial, record.trial_id, canonical_dump(Json(record)));
}

TrialRecord load_trial_record(const Store& store, const std::string& trial_id) {
  return parse_body<TrialRecord>(store.read(ArtifactKind::trial, trial_id), "trial '" + trial_id + "'");
}

RerunResult rerun_trial(const Store& store, const std::string& trial_id, unsigned threads) {
  const TrialRecord record = load_trial_record(store, trial_id);
  if (record.controller_id != DualHormoneFactory::kId) {
    throw ConfigError("trial '" + trial_id + "': controller '" + record.controller_id + "' cannot be rebuilt from a profile");
  }
  const Population population = load_population(store, record.population_id);
  const DualHormoneFactory factory(load_profile(store, record.profile_hash));
  const PatientModel& model = find_model(record.model_id);

  std::unique_ptr<ProtocolSource> protocols;
  if (record.protocols.kind == ProtocolReference::Kind::generated) {
    protocols = std::make_unique<GeneratedProtocols>(load_library(store, record.protocols.id), record.protocols.policy,
                                                     record.protocols.seed);
  } else {
    protocols = std::make_unique<StoredProtocols>(load_protocols(store, record.protocols.id));
  }

  RerunResult result;
  result.output = run_trial(population, *protocols, factory, model, record.config, threads);
  const TrialMetadata meta{record.trial_id, record.seed, record.model_id, record.controller_id, record.profile_hash,
                           record.config.controller_period_s};
  result.report = make_report(meta, result.output.accumulator);
  if (!record.report_id.empty() && store.contains(ArtifactKind::report, record.report_id)) {
    result.identical = canonical_dump(Json(result.report)) == store.read(ArtifactKind::report, record.report_id);
  }
  return result;
}

// --- SQL export --------------------------------------------------------------

namespace {

std::string sql_text(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string sql_real(double v) {
  if (!std::isfinite(v)) return "NULL";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class Int>
std::string sql_int(Int v) {
  return std::to_string(v);
}

}  // namespace

std::string sql_schema() {
  return R"(CREATE TABLE IF NOT EXISTS patients (
  population_id TEXT NOT NULL,
  patient_id INTEGER NOT NULL,
  first_name TEXT NOT NULL,
  last_name TEXT NOT NULL,
  date_of_birth TEXT NOT NULL,
  place_of_birth TEXT NOT NULL,
  sex TEXT NOT NULL CHECK (sex IN ('female', 'male')),
  height_cm REAL NOT NULL,
  body_weight_kg REAL NOT NULL,
  resting_heart_rate REAL NOT NULL,
  PRIMARY KEY (population_id, patient_id)
);
CREATE TABLE IF NOT EXISTS parameter_sets (
  set_id TEXT NOT NULL,
  patient_id INTEGER NOT NULL,
  basal_u_per_h REAL NOT NULL,
  parameter TEXT NOT NULL,
  value REAL,
  PRIMARY KEY (set_id, patient_id, parameter)
);
CREATE TABLE IF NOT EXISTS protocols (
  protocols_id TEXT NOT NULL,
  protocol_id INTEGER NOT NULL,
  seq INTEGER NOT NULL,
  horizon_s REAL NOT NULL,
  kind TEXT NOT NULL CHECK (kind IN ('meal', 'exercise')),
  start_s REAL NOT NULL,
  end_s REAL NOT NULL,
  magnitude REAL NOT NULL,
  announced INTEGER NOT NULL,
  announced_magnitude REAL NOT NULL,
  PRIMARY KEY (protocols_id, protocol_id, seq)
);
CREATE TABLE IF NOT EXISTS basis_days (
  library_id TEXT NOT NULL,
  day_type TEXT NOT NULL,
  season_class TEXT NOT NULL,
  seq INTEGER NOT NULL,
  clock_s REAL NOT NULL,
  kind TEXT NOT NULL,
  meal TEXT,
  duration_s REAL NOT NULL,
  intensity REAL NOT NULL,
  PRIMARY KEY (library_id, day_type, season_class, seq)
);
CREATE TABLE IF NOT EXISTS trials (
  trial_id TEXT PRIMARY KEY,
  created_utc TEXT NOT NULL,
  seed INTEGER NOT NULL,
  model_id TEXT NOT NULL,
  controller_id TEXT NOT NULL,
  profile_hash TEXT NOT NULL,
  population_id TEXT NOT NULL,
  protocol_kind TEXT NOT NULL,
  protocol_ref TEXT NOT NULL,
  report_id TEXT NOT NULL,
  config_json TEXT NOT NULL,
  manifest_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS reports (
  report_id TEXT PRIMARY KEY,
  trial_id TEXT NOT NULL,
  patients INTEGER NOT NULL,
  aborted INTEGER NOT NULL,
  mean_bg REAL,
  tir_severe_hypo REAL,
  tir_hypo REAL,
  tir_normo REAL,
  tir_hyper REAL,
  tir_severe_hyper REAL,
  worst_patient_id INTEGER,
  worst_min_bg REAL,
  report_json TEXT NOT NULL
);
)";
}

std::string export_sql(const Store& store) {
  std::ostringstream out;
  out << "BEGIN TRANSACTION;\n" << sql_schema();

  for (const auto& id : store.list(ArtifactKind::population)) {
    const Population pop = load_population(store, id);
    for (const auto& e : pop.entries) {
      const auto& p = e.patient;
      out << "INSERT INTO patients VALUES (" << sql_text(id) << ", " << sql_int(p.id) << ", " << sql_text(p.first_name)
          << ", " << sql_text(p.last_name) << ", " << sql_text(format_date(p.date_of_birth)) << ", "
          << sql_text(p.place_of_birth) << ", " << sql_text(to_string(p.sex)) << ", " << sql_real(p.height_cm) << ", "
          << sql_real(p.body_weight_kg) << ", " << sql_real(p.resting_heart_rate) << ");\n";
    }
    for (const auto& e : pop.entries) {
      for (const auto& [name, value] : e.params.values) {
        out << "INSERT INTO parameter_sets VALUES (" << sql_text(id) << ", " << sql_int(e.patient.id) << ", "
            << sql_real(e.params.basal_u_per_h) << ", " << sql_text(name) << ", " << sql_real(value) << ");\n";
      }
    }
  }
  for (const auto& id : store.list(ArtifactKind::parameter_sets)) {
    for (const auto& [patient_id, params] : load_parameter_sets(store, id)) {
      for (const auto& [name, value] : params.values) {
        out << "INSERT INTO parameter_sets VALUES (" << sql_text(id) << ", " << sql_int(patient_id) << ", "
            << sql_real(params.basal_u_per_h) << ", " << sql_text(name) << ", " << sql_real(value) << ");\n";
      }
    }
  }
  for (const auto& id : store.list(ArtifactKind::protocols)) {
    for (const auto& protocol : load_protocols(store, id)) {
      std::size_t seq = 0;
      for (const auto& d : protocol.disturbances) {
        out << "INSERT INTO protocols VALUES (" << sql_text(id) << ", " << sql_int(protocol.id) << ", " << sql_int(seq++)
            << ", " << sql_real(protocol.horizon_s) << ", " << sql_text(to_string(d.kind)) << ", " << sql_real(d.start_s)
            << ", " << sql_real(d.end_s) << ", " << sql_real(d.magnitude) << ", " << (d.announced ? 1 : 0) << ", "
            << sql_real(d.announced_magnitude) << ");\n";
      }
    }
  }
  for (const auto& id : store.list(ArtifactKind::library)) {
    for (const auto& day : load_library(store, id).days) {
      std::size_t seq = 0;
      for (const auto& e : day.events) {
        out << "INSERT INTO basis_days VALUES (" << sql_text(id) << ", " << sql_text(to_string(day.day_type)) << ", "
            << sql_text(to_string(day.season_class)) << ", " << sql_int(seq++) << ", " << sql_real(e.clock_s) << ", "
            << sql_text(to_string(e.kind)) << ", "
            << (e.kind == DisturbanceKind::meal ? sql_text(to_string(e.meal)) : std::string("NULL")) << ", "
            << sql_real(e.duration_s) << ", " << sql_real(e.intensity) << ");\n";
      }
    }
  }
  for (const auto& id : store.list(ArtifactKind::trial)) {
    const TrialRecord r = load_trial_record(store, id);
    out << "INSERT INTO trials VALUES (" << sql_text(r.trial_id) << ", " << sql_text(r.created_utc) << ", "
        << sql_int(r.seed) << ", " << sql_text(r.model_id) << ", " << sql_text(r.controller_id) << ", "
        << sql_text(r.profile_hash) << ", " << sql_text(r.population_id) << ", "
        << sql_text(to_string(r.protocols.kind)) << ", " << sql_text(r.protocols.id) << ", " << sql_text(r.report_id)
        << ", " << sql_text(Json(r.config).dump()) << ", " << sql_text(r.manifest.dump()) << ");\n";
  }
  for (const auto& id : store.list(ArtifactKind::report)) {
    const std::string body = store.read(ArtifactKind::report, id);
    const TrialReport rep = parse_body<TrialReport>(body, "report '" + id + "'");
    const auto& worst = rep.accumulator.worst_;
    out << "INSERT INTO reports VALUES (" << sql_text(id) << ", " << sql_text(rep.metadata.trial_id) << ", "
        << sql_int(rep.accumulator.patients()) << ", " << sql_int(rep.accumulator.aborted().size()) << ", "
        << sql_real(rep.mean_bg);
    for (double f : rep.tir.mean) out << ", " << sql_real(f);
    out << ", " << (worst ? sql_int(worst->patient_id) : std::string("NULL")) << ", "
        << (worst ? sql_real(worst->min_bg) : std::string("NULL")) << ", " << sql_text(body) << ");\n";
  }
  out << "COMMIT;\n";
  return out.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace vct
