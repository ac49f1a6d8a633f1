#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vct/controller.hpp"
#include "vct/hovorka.hpp"
#include "vct/population.hpp"
#include "vct/protocol.hpp"
#include "vct/serialize.hpp"
#include "vct/simulation.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return VCT_DATA_DIR; }

inline vct::ProtocolLibrary library() {
  return vct::parse_as<vct::ProtocolLibrary>(vct::read_json_file(data_dir() / "basis_days.json"), "library");
}
inline vct::DemographicsConfig demographics() {
  return vct::parse_as<vct::DemographicsConfig>(vct::read_json_file(data_dir() / "demographics.json"), "demographics");
}
inline vct::ParameterDistributionTable table() {
  return vct::parse_as<vct::ParameterDistributionTable>(vct::read_json_file(data_dir() / "parameter_distributions.json"),
                                                        "table");
}
inline vct::DualHormoneParameters profile(const char* file = "controller_default.json") {
  return vct::parse_as<vct::DualHormoneParameters>(vct::read_json_file(data_dir() / file), "profile");
}

inline const vct::PatientModel& model() { return vct::find_model("hovorka_ext"); }

/// Patient with every parameter at its table mean (lognormal rows at the median).
inline vct::PopulationEntry nominal_patient(double body_weight_kg = 70.0, bool noise = true) {
  vct::PopulationEntry e;
  e.patient.id = 0;
  e.patient.body_weight_kg = body_weight_kg;
  e.patient.height_cm = 175.0;
  e.patient.resting_heart_rate = 65.0;
  e.params.values["BW"] = body_weight_kg;
  for (const auto& row : table().parameters) {
    e.params.values[row.name] = row.kind == vct::DistributionKind::lognormal ? std::exp(row.mean) : row.mean;
  }
  if (!noise) {
    e.params.values["sigma_gut"] = 0.0;
    e.params.values["sigma_q1"] = 0.0;
    e.params.values["cgm_noise_variance"] = 0.0;
  }
  e.params.basal_u_per_h = model().steady_state(model().bind(e.params), 6.0).basal_u_per_h;
  return e;
}

/// Small population drawn from the shipped configuration.
inline vct::Population population(std::uint64_t seed, std::uint64_t n, unsigned threads = 1) {
  return vct::generate_population(seed, n, demographics(), table(), model(), threads);
}

inline vct::SimulationConfig config(std::int64_t days, std::uint64_t seed = 1) {
  vct::SimulationConfig c;
  c.horizon_s = days * 86400;
  c.seed = seed;
  return c;
}

/// Protocol with the given meals (start seconds, grams), each 15 min long.
inline vct::Protocol meals(std::int64_t horizon_s, std::vector<std::pair<double, double>> list) {
  vct::Protocol p;
  p.horizon_s = static_cast<double>(horizon_s);
  for (const auto& [start, grams] : list) {
    p.disturbances.push_back({vct::DisturbanceKind::meal, start, start + 900.0, grams, true, grams});
  }
  return p;
}

/// Wraps a controller factory and checks every decision in the loop:
/// no insulin together with glucagon, and the exercise bolus only on the
/// first step of a session, at most once, with the estimate below threshold.
class CheckedFactory final : public vct::ControllerFactory {
 public:
  explicit CheckedFactory(vct::DualHormoneParameters hyper) : inner_(hyper), hyper_(hyper) {}

  std::string_view id() const override { return inner_.id(); }
  double setpoint() const override { return inner_.setpoint(); }
  double basal_scale() const override { return inner_.basal_scale(); }

  std::unique_ptr<vct::FeedbackController> create(const vct::PatientControlContext& ctx) const override {
    return std::make_unique<Checked>(inner_.create(ctx), *this);
  }

  std::int64_t steps() const { return steps_; }
  std::int64_t violations() const { return violations_; }
  std::int64_t exercise_boluses() const { return exercise_boluses_; }
  std::int64_t sessions() const { return sessions_; }

 private:
  class Checked final : public vct::FeedbackController {
   public:
    Checked(std::unique_ptr<vct::FeedbackController> inner, const CheckedFactory& owner)
        : inner_(std::move(inner)), owner_(owner) {}

    vct::ControlDecision step(const vct::ControllerInputs& in) override {
      const auto d = inner_->step(in);
      const bool start = in.exercising && !was_exercising_;
      if (start) {
        given_ = false;
        ++owner_.sessions_;
      }
      was_exercising_ = in.exercising;
      ++owner_.steps_;

      const bool insulin = d.basal_u_per_h > 0.0 || d.insulin_bolus_u > 0.0;
      const bool glucagon = d.glucagon_bolus_ug > 0.0;
      if (!(d.basal_u_per_h >= 0.0 && d.insulin_bolus_u >= 0.0 && d.glucagon_bolus_ug >= 0.0)) ++owner_.violations_;
      if (insulin && glucagon) ++owner_.violations_;
      if (in.exercising && d.glucagon_bolus_ug == owner_.hyper_.exercise_bolus_ug) {
        ++owner_.exercise_boluses_;
        const auto estimate = inner_->glucose_estimate();
        if (!start || given_ || !estimate || !(*estimate < owner_.hyper_.exercise_bolus_threshold)) ++owner_.violations_;
        given_ = true;
      }
      return d;
    }
    std::optional<double> glucose_estimate() const override { return inner_->glucose_estimate(); }

   private:
    std::unique_ptr<vct::FeedbackController> inner_;
    const CheckedFactory& owner_;
    bool was_exercising_ = false;
    bool given_ = false;
  };

  vct::DualHormoneFactory inner_;
  vct::DualHormoneParameters hyper_;
  mutable std::atomic<std::int64_t> steps_{0};
  mutable std::atomic<std::int64_t> violations_{0};
  mutable std::atomic<std::int64_t> exercise_boluses_{0};
  mutable std::atomic<std::int64_t> sessions_{0};
};

/// Structural problems of a CDF report: curves that decrease in threshold,
/// or a mean outside the [min, max] envelope. Empty when none.
inline std::vector<std::string> cdf_problems(const vct::CdfReport& c) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < c.thresholds.size(); ++j) {
    if (!(c.min[j] <= c.mean[j] && c.mean[j] <= c.max[j])) {
      out.push_back("mean outside envelope at " + std::to_string(c.thresholds[j]));
    }
    if (j == 0) continue;
    for (const auto* curve : {&c.mean, &c.min, &c.max}) {
      if ((*curve)[j] < (*curve)[j - 1]) out.push_back("curve decreases at " + std::to_string(c.thresholds[j]));
    }
    if (!c.worst.empty() && c.worst[j] < c.worst[j - 1]) {
      out.push_back("worst-case curve decreases at " + std::to_string(c.thresholds[j]));
    }
  }
  return out;
}

/// Fresh scratch directory in the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("vct-test-" + name + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
