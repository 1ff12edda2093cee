#include "advaudit/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advaudit {

void UncertaintyModel::validate(std::size_t feature_count) const {
  if (fractional_width.size() != feature_count || masked.size() != feature_count ||
      floor.size() != feature_count)
    throw std::invalid_argument("UncertaintyModel: per-feature vectors do not match feature count");
  for (double f : fractional_width)
    if (f < 0.0) throw std::invalid_argument("UncertaintyModel: fractional widths must be >= 0");
  if (!(n_sigma > 0.0)) throw std::invalid_argument("UncertaintyModel: N_sigma must be positive");
}

UncertaintyModel resolve_uncertainty(const UncertaintySpec& spec,
                                     const std::vector<std::string>& feature_names) {
  UncertaintyModel m;
  const std::size_t d = feature_names.size();
  m.fractional_width.assign(d, 0.0);
  m.masked.assign(d, 0);
  m.floor.assign(d, spec.floor);
  m.n_sigma = spec.n_sigma;
  m.floor_enabled = spec.floor_enabled;
  for (const auto& [name, width] : spec.widths) {
    if (width < 0.0) throw std::invalid_argument("uncertainty width for '" + name + "' is negative");
    m.fractional_width[static_cast<std::size_t>(feature_index(feature_names, name))] = width;
  }
  for (const auto& name : spec.masked)
    m.masked[static_cast<std::size_t>(feature_index(feature_names, name))] = 1;
  for (const auto& [name, f] : spec.floor_overrides)
    m.floor[static_cast<std::size_t>(feature_index(feature_names, name))] = f;
  m.validate(d);
  return m;
}

namespace {

inline double sigma_entry(double x, double width, double floor, bool floor_enabled) {
  const double scale = floor_enabled ? std::max(std::abs(x), floor) : std::abs(x);
  return width * scale;
}

}  // namespace

ad::Tensor sigma(const ad::Tensor& x, const UncertaintyModel& model,
                 const std::vector<double>* row_mask) {
  const std::size_t cols = x.cols();
  model.validate(cols);
  if (row_mask && row_mask->size() != x.rows())
    throw std::invalid_argument("sigma: row mask length mismatch");
  ad::Tensor s(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (row_mask && (*row_mask)[r] == 0.0) continue;  // entries stay 0
    for (std::size_t c = 0; c < cols; ++c) {
      if (!model.perturbable(c)) continue;
      s.at(r, c) = sigma_entry(x.at(r, c), model.fractional_width[c], model.floor[c],
                               model.floor_enabled);
    }
  }
  return s;
}

void project(ad::Tensor& x_adv, const ad::Tensor& x_nominal, const UncertaintyModel& model,
             const std::vector<double>* row_mask) {
  if (!x_adv.same_shape(x_nominal)) throw std::invalid_argument("project: shape mismatch");
  const ad::Tensor s = sigma(x_nominal, model, row_mask);
  for (std::size_t i = 0; i < x_adv.size(); ++i) {
    const double half_width = model.n_sigma * s[i];
    if (half_width == 0.0) {
      x_adv[i] = x_nominal[i];  // bit-exact restore on masked entries
      continue;
    }
    const double lo = x_nominal[i] - half_width;
    const double hi = x_nominal[i] + half_width;
    x_adv[i] = std::min(std::max(x_adv[i], lo), hi);
  }
}

Deviation standardize(const ad::Tensor& x_adv, const ad::Tensor& x_nominal,
                      const UncertaintyModel& model, const std::vector<double>* row_mask) {
  if (!x_adv.same_shape(x_nominal)) throw std::invalid_argument("standardize: shape mismatch");
  const ad::Tensor s = sigma(x_nominal, model, row_mask);
  Deviation dev;
  dev.delta = ad::Tensor(x_adv.shape());
  dev.z = ad::Tensor(x_adv.shape());
  for (std::size_t i = 0; i < x_adv.size(); ++i) {
    dev.delta[i] = x_adv[i] - x_nominal[i];
    dev.z[i] = s[i] > 0.0 ? dev.delta[i] / s[i] : 0.0;
  }
  return dev;
}

std::vector<double> unmasked_z(const Deviation& dev, const UncertaintyModel& model,
                               const std::vector<double>* row_mask) {
  const std::size_t cols = dev.z.cols();
  std::vector<double> out;
  out.reserve(dev.z.size());
  for (std::size_t r = 0; r < dev.z.rows(); ++r) {
    if (row_mask && (*row_mask)[r] == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c)
      if (model.perturbable(c)) out.push_back(dev.z.at(r, c));
  }
  return out;
}

}  // namespace advaudit
