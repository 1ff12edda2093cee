#pragma once

#include <span>
#include <vector>

namespace advaudit {

// Bin layout shared by the soft and hard histograms: for E = edges.size()
// ascending edges there are E-1 interior bins plus two guard bins catching
// mass below edges.front() and at/above edges.back(). Mass vectors therefore
// have size E+1 and always sum to the (weighted) sample count.

/// Gaussian-kernel histogram: mass_b = sum_j [Phi((e_hi - v_j)/h) - Phi((e_lo - v_j)/h)].
/// Differentiable in the values; bandwidth -> 0 recovers the hard histogram.
std::vector<double> soft_histogram(std::span<const double> values,
                                   std::span<const double> edges, double bandwidth);

/// Same with 0/1 row weights (used to drop padded track rows).
std::vector<double> soft_histogram_weighted(std::span<const double> values,
                                            std::span<const double> weights,
                                            std::span<const double> edges, double bandwidth);

std::vector<double> hard_histogram(std::span<const double> values,
                                   std::span<const double> edges);

std::vector<double> hard_histogram_weighted(std::span<const double> values,
                                            std::span<const double> weights,
                                            std::span<const double> edges);

/// d(mass)/d(value_j) contracted with per-bin coefficients: for each value j
/// returns sum_b coef_b * d mass_b / d v_j. coef has one entry per bin
/// (guards included).
void soft_histogram_value_grad(std::span<const double> values,
                               std::span<const double> weights,
                               std::span<const double> edges, double bandwidth,
                               std::span<const double> coef, std::span<double> out);

void check_edges(std::span<const double> edges, double bandwidth);

}  // namespace advaudit
