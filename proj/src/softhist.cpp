#include "advaudit/softhist.hpp"

#include <cmath>
#include <stdexcept>

namespace advaudit {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double normal_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }
inline double normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

}  // namespace

void check_edges(std::span<const double> edges, double bandwidth) {
  if (edges.size() < 2) throw std::invalid_argument("soft_histogram: need at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("soft_histogram: edges must be strictly increasing");
  }
  if (!(bandwidth > 0.0)) throw std::invalid_argument("soft_histogram: bandwidth must be positive");
}

std::vector<double> soft_histogram_weighted(std::span<const double> values,
                                            std::span<const double> weights,
                                            std::span<const double> edges, double bandwidth) {
  check_edges(edges, bandwidth);
  const std::size_t ne = edges.size();
  std::vector<double> mass(ne + 1, 0.0);
  std::vector<double> cdf(ne);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double w = weights.empty() ? 1.0 : weights[j];
    if (w == 0.0) continue;
    const double v = values[j];
    for (std::size_t i = 0; i < ne; ++i) cdf[i] = normal_cdf((edges[i] - v) / bandwidth);
    mass[0] += w * cdf[0];
    for (std::size_t b = 1; b < ne; ++b) mass[b] += w * (cdf[b] - cdf[b - 1]);
    mass[ne] += w * (1.0 - cdf[ne - 1]);
  }
  return mass;
}

std::vector<double> soft_histogram(std::span<const double> values,
                                   std::span<const double> edges, double bandwidth) {
  return soft_histogram_weighted(values, {}, edges, bandwidth);
}

std::vector<double> hard_histogram_weighted(std::span<const double> values,
                                            std::span<const double> weights,
                                            std::span<const double> edges) {
  if (edges.size() < 2) throw std::invalid_argument("hard_histogram: need at least 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("hard_histogram: edges must be strictly increasing");
  }
  const std::size_t ne = edges.size();
  std::vector<double> count(ne + 1, 0.0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double w = weights.empty() ? 1.0 : weights[j];
    if (w == 0.0) continue;
    const double v = values[j];
    if (v < edges[0]) {
      count[0] += w;
      continue;
    }
    if (v >= edges[ne - 1]) {
      count[ne] += w;
      continue;
    }
    // bins are [e_i, e_{i+1})
    std::size_t lo = 0, hi = ne - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (v >= edges[mid])
        lo = mid;
      else
        hi = mid;
    }
    count[lo + 1] += w;
  }
  return count;
}

std::vector<double> hard_histogram(std::span<const double> values,
                                   std::span<const double> edges) {
  return hard_histogram_weighted(values, {}, edges);
}

void soft_histogram_value_grad(std::span<const double> values,
                               std::span<const double> weights,
                               std::span<const double> edges, double bandwidth,
                               std::span<const double> coef, std::span<double> out) {
  check_edges(edges, bandwidth);
  const std::size_t ne = edges.size();
  if (coef.size() != ne + 1) throw std::invalid_argument("soft_histogram_value_grad: coef size mismatch");
  const double inv_h = 1.0 / bandwidth;
  for (std::size_t j = 0; j < values.size(); ++j) {
    const double w = weights.empty() ? 1.0 : weights[j];
    if (w == 0.0) {
      out[j] = 0.0;
      continue;
    }
    const double v = values[j];
    // d mass/d v telescopes across edges: edge i moves mass between the bin
    // it closes (coef[i]) and the bin it opens (coef[i+1]).
    double acc = 0.0;
    for (std::size_t i = 0; i < ne; ++i) {
      const double pdf = normal_pdf((edges[i] - v) * inv_h);
      acc += pdf * inv_h * (coef[i + 1] - coef[i]);
    }
    out[j] = w * acc;
  }
}

}  // namespace advaudit
