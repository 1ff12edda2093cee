#include "advaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "advaudit/softhist.hpp"

namespace advaudit {

namespace {

void count_classes(std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
  pos = neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++pos;
    else
      ++neg;
  }
}

}  // namespace

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
  std::size_t n_pos, n_neg;
  count_classes(labels, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: single-class input");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  double auc = 0.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t gtp = 0, gfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1)
        ++gtp;
      else
        ++gfp;
      ++i;
    }
    const double fpr0 = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double tpr0 = static_cast<double>(tp) / static_cast<double>(n_pos);
    tp += gtp;
    fp += gfp;
    const double fpr1 = static_cast<double>(fp) / static_cast<double>(n_neg);
    const double tpr1 = static_cast<double>(tp) / static_cast<double>(n_pos);
    auc += (fpr1 - fpr0) * 0.5 * (tpr0 + tpr1);
    curve.fpr.push_back(fpr1);
    curve.tpr.push_back(tpr1);
  }
  curve.auc = auc;
  return curve;
}

WorkingPoint efficiency_at_rejection(std::span<const double> scores, std::span<const int> labels,
                                     double target_rejection) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("efficiency_at_rejection: length mismatch");
  if (!(target_rejection >= 0.0) || target_rejection > 1.0)
    throw std::invalid_argument("efficiency_at_rejection: target must be in [0, 1]");
  std::size_t n_pos, n_neg;
  count_classes(labels, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("efficiency_at_rejection: single-class input");

  WorkingPoint wp;
  if (target_rejection == 0.0) {
    wp.threshold = -std::numeric_limits<double>::infinity();
    wp.efficiency = 1.0;
    return wp;
  }

  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  for (double t : sorted) {
    std::size_t rejected = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (labels[i] != 1 && scores[i] <= t) ++rejected;
    const double rejection = static_cast<double>(rejected) / static_cast<double>(n_neg);
    if (rejection >= target_rejection) {
      std::size_t kept = 0;
      for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i] == 1 && scores[i] > t) ++kept;
      wp.threshold = t;
      wp.efficiency = static_cast<double>(kept) / static_cast<double>(n_pos);
      return wp;
    }
  }
  // rejection reaches 1 at the largest score, so this is unreachable for a
  // target in [0, 1]; keep a loud error for safety.
  throw std::runtime_error("efficiency_at_rejection: target rejection unachievable");
}

BinaryPerformance binary_performance(std::span<const double> predictions,
                                     std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("binary_performance: length mismatch");
  std::size_t n_pos, n_neg;
  count_classes(labels, n_pos, n_neg);
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("binary_performance: single-class input");
  std::size_t kept_sig = 0, rej_bkg = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool selected = predictions[i] > 0.5;
    if (labels[i] == 1 && selected) ++kept_sig;
    if (labels[i] != 1 && !selected) ++rej_bkg;
  }
  return {static_cast<double>(kept_sig) / static_cast<double>(n_pos),
          static_cast<double>(rej_bkg) / static_cast<double>(n_neg)};
}

namespace {

// Column means/stddevs over selected rows; stddev 0 marks constant columns.
struct ColumnMoments {
  std::vector<double> mean, sd;
  std::size_t rows = 0;
};

ColumnMoments column_moments(const ad::Tensor& x, const std::vector<double>* row_mask) {
  const std::size_t d = x.cols();
  ColumnMoments m;
  m.mean.assign(d, 0.0);
  m.sd.assign(d, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (row_mask && (*row_mask)[r] == 0.0) continue;
    ++m.rows;
    for (std::size_t c = 0; c < d; ++c) m.mean[c] += x.at(r, c);
  }
  if (m.rows < 2) throw std::invalid_argument("pearson: need at least 2 rows");
  for (std::size_t c = 0; c < d; ++c) m.mean[c] /= static_cast<double>(m.rows);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (row_mask && (*row_mask)[r] == 0.0) continue;
    for (std::size_t c = 0; c < d; ++c) {
      const double dvi = x.at(r, c) - m.mean[c];
      m.sd[c] += dvi * dvi;
    }
  }
  for (std::size_t c = 0; c < d; ++c) m.sd[c] = std::sqrt(m.sd[c]);
  return m;
}

ad::Tensor pearson_matrix(const ad::Tensor& x, const std::vector<double>* row_mask) {
  const std::size_t d = x.cols();
  const ColumnMoments m = column_moments(x, row_mask);
  ad::Tensor corr({d, d});
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double v;
      if (m.sd[a] == 0.0 || m.sd[b] == 0.0) {
        v = std::numeric_limits<double>::quiet_NaN();  // undefined on constant columns
      } else if (a == b) {
        v = 1.0;
      } else {
        double cov = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
          if (row_mask && (*row_mask)[r] == 0.0) continue;
          cov += (x.at(r, a) - m.mean[a]) * (x.at(r, b) - m.mean[b]);
        }
        v = cov / (m.sd[a] * m.sd[b]);
      }
      corr.at(a, b) = v;
      corr.at(b, a) = v;
    }
  }
  return corr;
}

}  // namespace

PearsonDelta pearson_delta(const ad::Tensor& nominal, const ad::Tensor& adversarial,
                           const std::vector<double>* row_mask) {
  if (nominal.cols() != adversarial.cols())
    throw std::invalid_argument("pearson_delta: feature count mismatch");
  PearsonDelta out;
  out.nominal = pearson_matrix(nominal, row_mask);
  out.adversarial = pearson_matrix(adversarial, row_mask);
  double max_delta = 0.0;
  for (std::size_t i = 0; i < out.nominal.size(); ++i) {
    const double a = out.nominal[i], b = out.adversarial[i];
    if (std::isnan(a) || std::isnan(b)) continue;
    max_delta = std::max(max_delta, std::abs(a - b));
  }
  out.max_abs_delta = max_delta;
  return out;
}

double hist_chi2_hard_column(std::span<const double> nominal, std::span<const double> adversarial,
                             std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("hist_chi2_hard: need at least 2 bins");
  if (nominal.empty() || adversarial.empty())
    throw std::invalid_argument("hist_chi2_hard: empty sample");
  double lo = nominal[0], hi = nominal[0];
  for (double v : nominal) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) throw std::invalid_argument("hist_chi2_hard: nominal range is degenerate");
  std::vector<double> edges(bins + 1);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + w * static_cast<double>(i);
  const std::vector<double> cn = hard_histogram(nominal, edges);
  const std::vector<double> ca = hard_histogram(adversarial, edges);
  double chi2 = 0.0;
  std::size_t populated = 0;
  for (std::size_t b = 0; b < cn.size(); ++b) {
    const double tot = cn[b] + ca[b];
    if (tot == 0.0) continue;
    ++populated;
    const double d = ca[b] - cn[b];
    chi2 += d * d / tot;
  }
  if (populated < 2) throw std::invalid_argument("hist_chi2_hard: fewer than 2 populated bins");
  return chi2 / static_cast<double>(populated - 1);
}

std::vector<double> hist_chi2_hard(const ad::Tensor& nominal, const ad::Tensor& adversarial,
                                   std::size_t bins, const std::vector<double>* row_mask) {
  if (nominal.cols() != adversarial.cols())
    throw std::invalid_argument("hist_chi2_hard: feature count mismatch");
  std::vector<double> out(nominal.cols());
  std::vector<double> coln, cola;
  for (std::size_t c = 0; c < nominal.cols(); ++c) {
    coln.clear();
    cola.clear();
    for (std::size_t r = 0; r < nominal.rows(); ++r)
      if (!row_mask || (*row_mask)[r] != 0.0) coln.push_back(nominal.at(r, c));
    for (std::size_t r = 0; r < adversarial.rows(); ++r)
      if (!row_mask || (*row_mask)[r] != 0.0) cola.push_back(adversarial.at(r, c));
    out[c] = hist_chi2_hard_column(coln, cola, bins);
  }
  return out;
}

ZStats z_stats(std::span<const double> values) {
  ZStats s;
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("z_stats: empty input");
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(n);
  if (n < 2) return s;
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  s.stddev = std::sqrt(m2 / static_cast<double>(n - 1));
  if (s.stddev == 0.0) return s;  // skewness 0 by convention
  const double nd = static_cast<double>(n);
  const double g1 = (m3 / nd) / std::pow(m2 / nd, 1.5);
  if (n > 2) s.skewness = g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
  return s;
}

double rank_test_less(std::span<const double> a, std::span<const double> b) {
  const std::size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("rank_test_less: empty sample");
  struct Entry {
    double v;
    bool from_a;
  };
  std::vector<Entry> all;
  all.reserve(n1 + n2);
  for (double v : a) all.push_back({v, true});
  for (double v : b) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Entry& x, const Entry& y) { return x.v < y.v; });

  const double n = static_cast<double>(n1 + n2);
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double t = static_cast<double>(j - i);
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (all[k].from_a) rank_sum_a += avg_rank;
    tie_term += t * t * t - t;
    i = j;
  }
  const double u_a = rank_sum_a - 0.5 * static_cast<double>(n1) * (static_cast<double>(n1) + 1.0);
  const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
  const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                     ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;  // all values tied
  const double z = (u_a - mu + 0.5) / std::sqrt(var);
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double mean_of(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean_of: empty input");
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double rms_of(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace advaudit
