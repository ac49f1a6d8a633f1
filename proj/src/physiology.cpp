#include "vct/physiology.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "vct/errors.hpp"
#include "vct/hovorka.hpp"

namespace vct {

double ParameterSet::at(const std::string& name) const {
  const auto it = values.find(name);
  if (it == values.end()) throw ConfigError("parameter set has no entry '" + name + "'");
  return it->second;
}

void euler_maruyama_step(const PatientModel& model, std::span<double> x, const ModelInputs& in,
                         std::span<const double> p, double t, double dt, std::span<const double> xi) {
  const std::size_t n = model.state_dimension();
  const std::size_t m = model.wiener_dimension();
  if (!(dt > 0.0)) throw SimulationError("Euler-Maruyama step requires dt > 0");
  if (x.size() != n || xi.size() != m) throw SimulationError("Euler-Maruyama step: dimension mismatch");

  std::vector<double> f(n);
  std::vector<double> sigma(n * m);
  model.drift(t, x, in, p, f);
  model.diffusion(t, x, in, p, sigma);

  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    double noise = 0.0;
    for (std::size_t j = 0; j < m; ++j) noise += sigma[i * m + j] * (sqrt_dt * xi[j]);
    next[i] = x[i] + f[i] * dt + noise;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(next[i])) {
      throw SimulationError("non-finite state component " + std::to_string(i) + " at t = " + std::to_string(t) +
                            " min");
    }
    x[i] = next[i] < 0.0 ? 0.0 : next[i];
  }
}

void euler_maruyama_step(const PatientModel& model, std::span<double> x, const ModelInputs& in,
                         std::span<const double> p, double t, double dt, RngStream& rng) {
  std::vector<double> xi(model.wiener_dimension());
  for (double& v : xi) v = rng.gaussian();
  euler_maruyama_step(model, x, in, p, t, dt, xi);
}

double measure(const PatientModel& model, double t, std::span<const double> x, std::span<const double> p,
               RngStream& rng) {
  const double r = model.noise_variance(t, p);
  const double noise = rng.gaussian();
  return model.measurement(t, x, p) + std::sqrt(r) * noise;
}

namespace {

// Lane-by-lane stepper for models without a dedicated batch kernel.
class GenericBatchStepper final : public BatchStepper {
 public:
  explicit GenericBatchStepper(const PatientModel& model) : model_(model) {}

  void load(std::size_t lane, std::span<const double> params, std::span<const double> x0) override {
    lanes_[lane].p.assign(params.begin(), params.end());
    lanes_[lane].x.assign(x0.begin(), x0.end());
    lanes_[lane].xi.assign(model_.wiener_dimension(), 0.0);
    lanes_[lane].active = true;
    lanes_[lane].blown_up = false;
  }
  void disable(std::size_t lane) override { lanes_[lane].active = false; }
  void set_inputs(std::size_t lane, const ModelInputs& inputs) override { lanes_[lane].in = inputs; }
  void set_noise(std::size_t lane, std::span<const double> xi) override {
    std::copy(xi.begin(), xi.end(), lanes_[lane].xi.begin());
  }
  void step(double h) override {
    for (auto& lane : lanes_) {
      if (!lane.active || lane.blown_up) continue;
      try {
        euler_maruyama_step(model_, lane.x, lane.in, lane.p, 0.0, h, lane.xi);
      } catch (const SimulationError&) {
        lane.blown_up = true;
      }
    }
  }
  double output(std::size_t lane) const override { return model_.output(0.0, lanes_[lane].x, lanes_[lane].p); }
  double measurement(std::size_t lane) const override {
    return model_.measurement(0.0, lanes_[lane].x, lanes_[lane].p);
  }
  bool finite(std::size_t lane) const override { return !lanes_[lane].blown_up; }
  void state(std::size_t lane, std::span<double> out) const override {
    std::copy(lanes_[lane].x.begin(), lanes_[lane].x.end(), out.begin());
  }

 private:
  struct Lane {
    std::vector<double> p;
    std::vector<double> x;
    std::vector<double> xi;
    ModelInputs in;
    bool active = false;
    bool blown_up = false;
  };
  const PatientModel& model_;
  std::array<Lane, simd::kLanes> lanes_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<const PatientModel>, std::less<>> models;

  Registry() { models.emplace(std::string(ExtendedHovorka::kId), std::make_shared<ExtendedHovorka>()); }
};

Registry& registry() {
  static Registry instance;
  return instance;
}

}  // namespace

std::unique_ptr<BatchStepper> PatientModel::make_batch_stepper(simd::Isa /*isa*/) const {
  return std::make_unique<GenericBatchStepper>(*this);
}

const PatientModel& find_model(std::string_view id) {
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  const auto it = reg.models.find(id);
  if (it == reg.models.end()) throw ConfigError("unknown model id '" + std::string(id) + "'");
  return *it->second;
}

void register_model(std::shared_ptr<const PatientModel> model) {
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  reg.models[std::string(model->id())] = std::move(model);
}

std::vector<std::string> registered_models() {
  auto& reg = registry();
  std::lock_guard lock(reg.mutex);
  std::vector<std::string> ids;
  for (const auto& [id, model] : reg.models) ids.push_back(id);
  return ids;
}

}  // namespace vct
