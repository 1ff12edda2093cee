#pragma once

#include <span>
#include <vector>

#include "advaudit/tensor.hpp"

namespace advaudit {

struct RocCurve {
  std::vector<double> fpr;  // monotone non-decreasing, starts at 0, ends at 1
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Trapezoidal AUC over all distinct thresholds; tied scores are grouped so
/// the result equals P(s_sig > s_bkg) + 0.5 P(s_sig == s_bkg).
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

struct WorkingPoint {
  double efficiency = 0.0;
  double threshold = 0.0;
};

/// Smallest threshold whose background rejection reaches the target; selection
/// is score > threshold. target 0 maps to threshold -inf and efficiency 1.
WorkingPoint efficiency_at_rejection(std::span<const double> scores, std::span<const int> labels,
                                     double target_rejection);

/// Efficiency and rejection of an already thresholded (0/1) classifier.
struct BinaryPerformance {
  double signal_efficiency = 0.0;
  double background_rejection = 0.0;
};
BinaryPerformance binary_performance(std::span<const double> predictions,
                                     std::span<const int> labels);

struct PearsonDelta {
  ad::Tensor nominal;      // [D, D]; NaN rows/cols for constant features
  ad::Tensor adversarial;
  double max_abs_delta = 0.0;
};

PearsonDelta pearson_delta(const ad::Tensor& nominal, const ad::Tensor& adversarial,
                           const std::vector<double>* row_mask = nullptr);

/// Two-sample histogram chi2/ndf per feature column. Binning comes from the
/// nominal range (plus guard bins); chi2 = sum (a-n)^2/(a+n) over populated
/// bins, ndf = populated - 1. Compatible same-distribution samples sit near 1.
std::vector<double> hist_chi2_hard(const ad::Tensor& nominal, const ad::Tensor& adversarial,
                                   std::size_t bins, const std::vector<double>* row_mask = nullptr);

double hist_chi2_hard_column(std::span<const double> nominal, std::span<const double> adversarial,
                             std::size_t bins);

struct ZStats {
  double mean = 0.0;
  double stddev = 0.0;    // sample (n-1)
  double skewness = 0.0;  // bias-corrected; 0 when stddev == 0
};
ZStats z_stats(std::span<const double> values);

/// One-sided Mann-Whitney p-value for H1: sample a is stochastically smaller
/// than sample b. Normal approximation with tie correction.
double rank_test_less(std::span<const double> a, std::span<const double> b);

double mean_of(std::span<const double> v);
double rms_of(std::span<const double> v);  // spread around the mean

}  // namespace advaudit
