#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "../oracles/generators.hpp"
#include "../oracles/reference_model.hpp"
#include "../support/fixtures.hpp"
#include "vct/hovorka.hpp"
#include "vct/simd/hovorka_batch.hpp"

using namespace vct;
namespace hv = vct::hovorka;

namespace {

oracle::State to_state(const std::vector<double>& x) {
  oracle::State s{};
  std::copy(x.begin(), x.end(), s.begin());
  return s;
}

/// Random parameter set: each table row scaled by a factor in [0.5, 1.5].
ParameterSet random_params(gen::Gen& g) {
  auto set = fixtures::nominal_patient(g.uniform(45.0, 120.0)).params;
  for (auto& [name, v] : set.values) {
    if (name != "BW") v *= g.uniform(0.5, 1.5);
  }
  return set;
}

/// Steady state of the nominal patient; a valid neighbourhood for random states.
const std::vector<double>& nominal_state() {
  static const auto x = [] {
    const auto& m = fixtures::model();
    return m.steady_state(m.bind(fixtures::nominal_patient().params), 6.0).x;
  }();
  return x;
}

std::vector<double> random_state(gen::Gen& g, const std::vector<double>& around = nominal_state()) {
  std::vector<double> x(around);
  for (auto& v : x) v = v * g.uniform(0.0, 2.0) + g.uniform(0.0, 0.5);
  return x;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("model registry") {
  CHECK(find_model("hovorka_ext").id() == "hovorka_ext");
  CHECK(fixtures::model().state_dimension() == 16);
  CHECK(fixtures::model().wiener_dimension() == 3);
  CHECK_THROWS(find_model("nope"));
}

TEST_CASE("drift matches the independent transcription") {
  gen::Gen g(2024);
  const auto& m = fixtures::model();
  for (int trial = 0; trial < 2000; ++trial) {
    const auto params = random_params(g);
    const auto p = m.bind(params);
    const auto x = random_state(g);
    ModelInputs in;
    in.basal_mu_per_min = g.uniform(0.0, 40.0);
    in.bolus_mu_per_min = g.coin(0.2) ? g.uniform(0.0, 2000.0) : 0.0;
    in.glucagon_ug_per_min = g.coin(0.2) ? g.uniform(0.0, 200.0) : 0.0;
    in.cho_g_per_min = g.coin(0.3) ? g.uniform(0.0, 8.0) : 0.0;
    in.hrr = g.coin(0.3) ? g.uniform(0.0, 1.0) : 0.0;

    std::vector<double> dx(16);
    m.drift(0.0, x, in, p, dx);
    oracle::Inputs u{in.basal_mu_per_min + in.bolus_mu_per_min, in.glucagon_ug_per_min, in.cho_g_per_min, in.hrr};
    const auto ref = oracle::drift(to_state(x), u, params.values);
    for (std::size_t i = 0; i < 16; ++i) {
      const double scale = std::max({1.0, std::abs(ref[i]), std::abs(dx[i])});
      INFO("state " << i << " trial " << trial);
      REQUIRE(std::abs(dx[i] - ref[i]) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("steady state is a fixed point of the drift") {
  gen::Gen g(7);
  const auto& m = fixtures::model();
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = m.bind(random_params(g));
    const double target = g.uniform(4.0, 12.0);
    SteadyState ss;
    try {
      ss = m.steady_state(p, target);
    } catch (const SimulationError&) {
      continue;  // no basal rate can hold this target
    }
    ModelInputs in;
    in.basal_mu_per_min = ss.basal_u_per_h * 1000.0 / 60.0;
    std::vector<double> dx(16);
    m.drift(0.0, ss.x, in, p, dx);
    CHECK(norm(dx) <= 1e-8 * norm(ss.x));
    CHECK(m.output(0.0, ss.x, p) == doctest::Approx(target).epsilon(1e-12));
    CHECK(m.measurement(0.0, ss.x, p) == doctest::Approx(target).epsilon(1e-12));
  }
}

TEST_CASE("steady state basal rate decreases with insulin sensitivity") {
  const auto& m = fixtures::model();
  auto params = fixtures::nominal_patient().params;
  double previous = 1e9;
  for (double sid : {0.0004, 0.0006, 0.0008, 0.0010, 0.0012, 0.0014}) {
    params.values["SID"] = sid;
    const double basal = m.steady_state(m.bind(params), 6.0).basal_u_per_h;
    CHECK(basal < previous);
    previous = basal;
  }
}

TEST_CASE("steady state agrees with the reference basal solve") {
  gen::Gen g(8);
  const auto& m = fixtures::model();
  for (int trial = 0; trial < 200; ++trial) {
    const auto params = random_params(g);
    const double ref = oracle::steady_basal_u_per_h(params.values, 6.0);
    if (ref < 0.0) continue;
    CHECK(m.steady_state(m.bind(params), 6.0).basal_u_per_h == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("output is plasma glucose, linear in the glucose mass") {
  const auto& m = fixtures::model();
  const auto p = m.bind(fixtures::nominal_patient().params);
  auto x = m.steady_state(p, 6.0).x;
  const double z = m.output(0.0, x, p);
  x[hv::kQ1] *= 2.0;
  CHECK(m.output(0.0, x, p) == doctest::Approx(2.0 * z));
  x[hv::kQ1] = 0.0;
  CHECK(m.output(0.0, x, p) == 0.0);
}

TEST_CASE("carbohydrate intake raises the gut compartments") {
  const auto& m = fixtures::model();
  const auto p = m.bind(fixtures::nominal_patient().params);
  const auto ss = m.steady_state(p, 6.0);
  ModelInputs in;
  in.basal_mu_per_min = ss.basal_u_per_h * 1000.0 / 60.0;
  in.cho_g_per_min = 4.0;
  std::vector<double> dx(16);
  m.drift(0.0, ss.x, in, p, dx);
  CHECK(dx[hv::kD1] > 0.0);
  // D2 responds one compartment later.
  auto x = ss.x;
  euler_maruyama_step(m, x, in, p, 0.0, 0.5, std::vector<double>(3, 0.0));
  m.drift(0.0, x, in, p, dx);
  CHECK(dx[hv::kD2] > 0.0);
}

TEST_CASE("CGM compartment lags a plasma glucose step with first-order dynamics") {
  const auto& m = fixtures::model();
  const auto p = m.bind(fixtures::nominal_patient().params);
  auto x = m.steady_state(p, 6.0).x;
  x[hv::kQ1] *= 1.5;  // plasma glucose jumps to 9 mmol/L
  const double tau = p[hv::kTauCgm];
  // Evolve only the CGM state exactly: dGsc/dt = (G - Gsc)/tau with G held at 9.
  double gsc = x[hv::kGsc];
  const double h = 0.01;
  for (int i = 0; i < static_cast<int>(tau / h); ++i) {
    std::vector<double> dx(16);
    x[hv::kGsc] = gsc;
    m.drift(0.0, x, {}, p, dx);
    gsc += h * dx[hv::kGsc];
  }
  // After one time constant the gap has shrunk to about exp(-1).
  CHECK((9.0 - gsc) / 3.0 == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("measurement noise") {
  const auto& m = fixtures::model();
  auto params = fixtures::nominal_patient().params;
  params.values["cgm_noise_variance"] = 0.0;
  auto p = m.bind(params);
  const auto x = m.steady_state(p, 6.0).x;
  RngStream rng(1, 0, StreamRole::measurement);
  CHECK(measure(m, 0.0, x, p, rng) == m.measurement(0.0, x, p));

  params.values["cgm_noise_variance"] = 0.04;
  p = m.bind(params);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = measure(m, 0.0, x, p, rng) - 6.0;
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double se = 0.04 * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(var - 0.04) <= 3.0 * se);
}

TEST_CASE("Euler-Maruyama step") {
  const auto& m = fixtures::model();
  SUBCASE("null dynamics leave the state unchanged") {
    auto params = fixtures::nominal_patient(70.0, false).params;
    const auto p = m.bind(params);
    const auto ss = m.steady_state(p, 6.0);
    auto x = ss.x;
    ModelInputs in;
    in.basal_mu_per_min = ss.basal_u_per_h * 1000.0 / 60.0;
    for (int i = 0; i < 100; ++i) euler_maruyama_step(m, x, in, p, 0.0, 0.5, std::vector<double>(3, 1.0));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(ss.x[i]).epsilon(1e-9));
  }
  SUBCASE("additive noise increments have variance sigma^2 dt") {
    auto params = fixtures::nominal_patient().params;
    params.values["sigma_q1"] = 0.3;
    const auto p = m.bind(params);
    const auto ss = m.steady_state(p, 6.0);
    ModelInputs in;
    in.basal_mu_per_min = ss.basal_u_per_h * 1000.0 / 60.0;
    RngStream rng(3, 0, StreamRole::diffusion);
    const int n = 100000;
    const double h = 0.5;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      auto x = ss.x;  // f = 0 at steady state, so the increment is pure noise
      euler_maruyama_step(m, x, in, p, 0.0, h, rng);
      const double d = x[hv::kQ1] - ss.x[hv::kQ1];
      sum += d;
      sq += d * d;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    const double expected = 0.3 * 0.3 * h;
    CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / (n - 1)));
  }
  SUBCASE("states are projected onto the nonnegative orthant") {
    const auto p = m.bind(fixtures::nominal_patient().params);
    std::vector<double> x(16, 0.0);
    x[hv::kQ1] = 0.01;
    euler_maruyama_step(m, x, {}, p, 0.0, 30.0, std::vector<double>{0.0, 0.0, -50.0});
    for (double v : x) CHECK(v >= 0.0);
  }
}

TEST_CASE("scalar and AVX2 kernels are bit-identical") {
  if (!simd::cpu_has_avx2()) {
    MESSAGE("CPU without AVX2; only the scalar kernel is available");
    return;
  }
  gen::Gen g(99);
  const auto& m = fixtures::model();
  for (int trial = 0; trial < 500; ++trial) {
    hv::Batch a;
    for (std::size_t lane = 0; lane < simd::kLanes; ++lane) {
      const auto p = m.bind(random_params(g));
      const auto x = random_state(g);
      for (std::size_t i = 0; i < hv::kParamCount; ++i) a.p[i].v[lane] = p[i];
      for (std::size_t i = 0; i < hv::kStateCount; ++i) a.x[i].v[lane] = x[i];
      for (std::size_t i = 0; i < hv::kInputCount; ++i) a.in[i].v[lane] = g.coin(0.5) ? g.uniform(0.0, 50.0) : 0.0;
      a.in[hv::kHrr].v[lane] = g.uniform(0.0, 1.0);
      for (std::size_t i = 0; i < hv::kWienerCount; ++i) a.xi[i].v[lane] = g.uniform(-4.0, 4.0);
    }
    // Exercise the piecewise branches at their boundaries.
    a.x[hv::kQ1].v[0] = 4.5 * a.p[hv::kVg].v[0];
    a.x[hv::kQ1].v[1] = 9.0 * a.p[hv::kVg].v[1];
    hv::Batch b = a;
    const double h = g.coin(0.5) ? 0.5 : g.uniform(0.01, 2.0);
    for (int k = 0; k < 20; ++k) {
      hv::step_scalar(a, h, std::sqrt(h));
      hv::step_avx2(b, h, std::sqrt(h));
    }
    REQUIRE(std::memcmp(&a.x, &b.x, sizeof a.x) == 0);
  }
}

TEST_CASE("batch stepper agrees with the generic single-patient step") {
  const auto& m = fixtures::model();
  const auto p = m.bind(fixtures::nominal_patient().params);
  const auto ss = m.steady_state(p, 6.0);
  for (auto isa : {simd::Isa::scalar, simd::resolve(simd::KernelChoice::automatic)}) {
    auto stepper = m.make_batch_stepper(isa);
    stepper->load(2, p, ss.x);
    ModelInputs in;
    in.basal_mu_per_min = 20.0;
    in.cho_g_per_min = 3.0;
    stepper->set_inputs(2, in);
    const std::vector<double> xi{0.3, -0.2, 1.1};
    stepper->set_noise(2, xi);
    auto x = ss.x;
    for (int k = 0; k < 50; ++k) {
      stepper->step(0.5);
      euler_maruyama_step(m, x, in, p, 0.0, 0.5, xi);
    }
    std::vector<double> got(16);
    stepper->state(2, got);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(got[i] == doctest::Approx(x[i]).epsilon(1e-14));
    CHECK(stepper->finite(2));
    CHECK(stepper->output(2) == m.output(0.0, x, p));
  }
}
