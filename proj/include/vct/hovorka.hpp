#pragma once

#include "vct/physiology.hpp"
#include "vct/simd/hovorka_kernel.hpp"

namespace vct {

/// Hovorka glucose-insulin model extended with a one-state CGM model, a
/// two-state subcutaneous glucagon model and a three-state exercise model.
/// Registered as "hovorka_ext". Per-kilogram parameters (EGP0, F01, VI, VG)
/// are scaled by the "BW" entry when binding.
class ExtendedHovorka final : public PatientModel {
 public:
  static constexpr std::string_view kId = "hovorka_ext";
  /// Index of the CGM noise variance in the bound parameter vector.
  static constexpr std::size_t kNoiseVarianceIndex = hovorka::kParamCount;
  static constexpr std::size_t kBoundSize = hovorka::kParamCount + 1;

  ExtendedHovorka();

  std::string_view id() const override { return kId; }
  std::size_t state_dimension() const override { return hovorka::kStateCount; }
  std::size_t wiener_dimension() const override { return hovorka::kWienerCount; }
  const std::vector<ParameterInfo>& parameters() const override { return parameters_; }
  const std::vector<std::string>& state_names() const override { return state_names_; }

  std::vector<double> bind(const ParameterSet& params) const override;

  void drift(double t, std::span<const double> x, const ModelInputs& in, std::span<const double> p,
             std::span<double> dx) const override;
  void diffusion(double t, std::span<const double> x, const ModelInputs& in, std::span<const double> p,
                 std::span<double> sigma) const override;
  double output(double t, std::span<const double> x, std::span<const double> p) const override;
  double measurement(double t, std::span<const double> x, std::span<const double> p) const override;
  double noise_variance(double t, std::span<const double> p) const override;
  SteadyState steady_state(std::span<const double> p, double target_bg) const override;

  std::unique_ptr<BatchStepper> make_batch_stepper(simd::Isa isa) const override;

 private:
  std::vector<ParameterInfo> parameters_;
  std::vector<std::string> state_names_;
};

}  // namespace vct
