#pragma once

#include <map>
#include <string>
#include <vector>

#include "advaudit/data.hpp"
#include "advaudit/tensor.hpp"

namespace advaudit {

/// Per-feature Gaussian uncertainty envelope: sigma_i = f_i * |x_i|, with an
/// optional reference-scale floor |x_i| -> max(|x_i|, floor_i). Masked
/// features (charge, integer counts) have sigma identically zero.
struct UncertaintyModel {
  std::vector<double> fractional_width;  // per feature column
  std::vector<std::uint8_t> masked;      // per feature column
  std::vector<double> floor;             // per feature column, native units
  double n_sigma = 3.0;
  bool floor_enabled = true;

  bool perturbable(std::size_t col) const {
    return !masked[col] && fractional_width[col] > 0.0;
  }
  void validate(std::size_t feature_count) const;
};

/// Named, file-facing declaration; resolved against a concrete feature list.
struct UncertaintySpec {
  std::map<std::string, double> widths;
  std::vector<std::string> masked;
  std::map<std::string, double> floor_overrides;
  double n_sigma = 3.0;
  double floor = 1.0;
  bool floor_enabled = true;
};

UncertaintyModel resolve_uncertainty(const UncertaintySpec& spec,
                                     const std::vector<std::string>& feature_names);

/// sigma matrix for a feature matrix; entries are zero on masked features and
/// on rows excluded by the 0/1 row mask (track padding).
ad::Tensor sigma(const ad::Tensor& x, const UncertaintyModel& model,
                 const std::vector<double>* row_mask = nullptr);

/// Clamps x_adv into [x - N_sigma*sigma, x + N_sigma*sigma] anchored at the
/// nominal x; masked entries are restored to the nominal bit pattern.
void project(ad::Tensor& x_adv, const ad::Tensor& x_nominal, const UncertaintyModel& model,
             const std::vector<double>* row_mask = nullptr);

struct Deviation {
  ad::Tensor delta;  // x_adv - x_nominal
  ad::Tensor z;      // delta / sigma, 0 where sigma == 0
};

Deviation standardize(const ad::Tensor& x_adv, const ad::Tensor& x_nominal,
                      const UncertaintyModel& model,
                      const std::vector<double>* row_mask = nullptr);

/// z entries where sigma > 0 (the only ones with meaning), flattened.
std::vector<double> unmasked_z(const Deviation& dev, const UncertaintyModel& model,
                               const std::vector<double>* row_mask = nullptr);

}  // namespace advaudit
