#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "advaudit/metrics.hpp"
#include "advaudit/rng.hpp"

using namespace advaudit;

TEST_SUITE_BEGIN("eval-metrics");

namespace {

// brute-force pairwise oracle: P(s_sig > s_bkg) + 0.5 P(equal)
double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// exhaustive threshold scan oracle for efficiency_at_rejection
WorkingPoint scan_oracle(const std::vector<double>& scores, const std::vector<int>& labels,
                         double target) {
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.insert(thresholds.begin(), -std::numeric_limits<double>::infinity());
  std::size_t n_sig = 0, n_bkg = 0;
  for (int y : labels) (y == 1 ? n_sig : n_bkg)++;
  for (double t : thresholds) {
    std::size_t rej = 0, kept = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] != 1 && scores[i] <= t) ++rej;
      if (labels[i] == 1 && scores[i] > t) ++kept;
    }
    if (static_cast<double>(rej) / static_cast<double>(n_bkg) >= target)
      return {static_cast<double>(kept) / static_cast<double>(n_sig), t};
  }
  throw std::runtime_error("scan oracle: unachievable");
}

}  // namespace

TEST_CASE("perfect separation gives AUC 1, chance gives ~0.5") {
  std::vector<double> s{0.9, 0.8, 0.7, 0.2, 0.1, 0.05};
  std::vector<int> y{1, 1, 1, 0, 0, 0};
  CHECK(roc_auc(s, y).auc == doctest::Approx(1.0));

  RandomStream rng(3);
  std::vector<double> sr(20000);
  std::vector<int> yr(20000);
  for (std::size_t i = 0; i < sr.size(); ++i) {
    sr[i] = rng.uniform();
    yr[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  CHECK(roc_auc(sr, yr).auc == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("tied scores match the pairwise oracle exactly") {
  const std::vector<double> s{0.4, 0.4, 0.8, 0.1, 0.6, 0.4};
  const std::vector<int> y{1, 0, 1, 0, 0, 1};
  CHECK(roc_auc(s, y).auc == doctest::Approx(auc_pairwise(s, y)).epsilon(1e-12));
}

TEST_CASE("roc_auc equals the pairwise oracle on random instances") {
  RandomStream rng(11);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 10 + rng.index(200);
    std::vector<double> s(n);
    std::vector<int> y(n);
    y[0] = 1;
    y[1] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 20.0) / 20.0;  // force plenty of ties
      if (i > 1) y[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    CHECK(std::abs(roc_auc(s, y).auc - auc_pairwise(s, y)) < 1e-9);
  }
}

TEST_CASE("roc_auc is invariant under strictly monotone score transforms") {
  RandomStream rng(13);
  std::vector<double> s(300);
  std::vector<int> y(300);
  y[0] = 1;
  y[1] = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal(0.0, 2.0);
    if (i > 1) y[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::atan(3.0 * s[i]) + 7.0;
  CHECK(roc_auc(s, y).auc == doctest::Approx(roc_auc(t, y).auc).epsilon(1e-12));
}

TEST_CASE("roc_auc rejects single-class input") {
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("roc curve is monotone") {
  RandomStream rng(17);
  std::vector<double> s(500);
  std::vector<int> y(500);
  y[0] = 1;
  y[1] = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal(y[i], 1.0);
    if (i + 1 < s.size()) y[i + 1] = rng.uniform() < 0.5 ? 1 : 0;
  }
  const RocCurve c = roc_auc(s, y);
  for (std::size_t i = 1; i < c.fpr.size(); ++i) {
    CHECK(c.fpr[i] >= c.fpr[i - 1]);
    CHECK(c.tpr[i] >= c.tpr[i - 1]);
  }
  CHECK(c.fpr.back() == 1.0);
  CHECK(c.tpr.back() == 1.0);
}

TEST_CASE("efficiency at rejection handles the trivial targets") {
  const std::vector<double> s{0.1, 0.9, 0.2, 0.8};
  const std::vector<int> y{0, 1, 0, 1};
  const WorkingPoint zero = efficiency_at_rejection(s, y, 0.0);
  CHECK(zero.efficiency == 1.0);
  CHECK(std::isinf(zero.threshold));
  const WorkingPoint one = efficiency_at_rejection(s, y, 1.0);
  CHECK(one.efficiency == 1.0);  // separable sample keeps all signal
}

TEST_CASE("efficiency at rejection matches the exhaustive scan oracle") {
  RandomStream rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> s(200);
    std::vector<int> y(200);
    y[0] = 1;
    y[1] = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i > 1) y[i] = rng.uniform() < 0.5 ? 1 : 0;
      s[i] = std::round(rng.normal(y[i] * 0.8, 1.0) * 50.0) / 50.0;
    }
    for (double target : {0.1, 0.25, 0.5, 0.66, 0.9, 0.99}) {
      const WorkingPoint got = efficiency_at_rejection(s, y, target);
      const WorkingPoint want = scan_oracle(s, y, target);
      CHECK(got.efficiency == want.efficiency);
      CHECK(got.threshold == want.threshold);
    }
  }
}

TEST_CASE("efficiency at rejection is monotone in the target") {
  RandomStream rng(29);
  std::vector<double> s(400);
  std::vector<int> y(400);
  y[0] = 1;
  y[1] = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 1) y[i] = rng.uniform() < 0.5 ? 1 : 0;
    s[i] = rng.normal(y[i] * 1.0, 1.0);
  }
  double prev = 2.0;
  for (double target : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double eff = efficiency_at_rejection(s, y, target).efficiency;
    CHECK(eff <= prev);
    prev = eff;
  }
}

TEST_CASE("pearson delta is zero for identical inputs and exact 1 on the diagonal") {
  RandomStream rng(31);
  ad::Tensor x({200, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(0.0, 3.0);
  const PearsonDelta pd = pearson_delta(x, x);
  CHECK(pd.max_abs_delta == 0.0);
  for (std::size_t c = 0; c < 4; ++c) CHECK(pd.nominal.at(c, c) == 1.0);
}

TEST_CASE("duplicated column correlates exactly to 1") {
  RandomStream rng(37);
  ad::Tensor x({100, 2});
  for (std::size_t r = 0; r < 100; ++r) {
    x.at(r, 0) = rng.normal(0.0, 1.0);
    x.at(r, 1) = x.at(r, 0);
  }
  const PearsonDelta pd = pearson_delta(x, x);
  CHECK(pd.nominal.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("small independent jitter moves correlations by less than 0.02") {
  RandomStream rng(41);
  ad::Tensor x({10000, 3});
  for (std::size_t r = 0; r < 10000; ++r) {
    const double a = rng.normal(0.0, 1.0);
    x.at(r, 0) = a;
    x.at(r, 1) = 0.5 * a + rng.normal(0.0, 1.0);
    x.at(r, 2) = rng.normal(5.0, 2.0);
  }
  ad::Tensor jittered = x;
  for (std::size_t i = 0; i < jittered.size(); ++i) jittered[i] += rng.normal(0.0, 0.1);
  const PearsonDelta pd = pearson_delta(x, jittered);
  CHECK(pd.max_abs_delta < 0.02);
}

TEST_CASE("constant columns are excluded from the delta") {
  ad::Tensor a({50, 2});
  ad::Tensor b({50, 2});
  RandomStream rng(43);
  for (std::size_t r = 0; r < 50; ++r) {
    a.at(r, 0) = rng.normal(0.0, 1.0);
    b.at(r, 0) = rng.normal(0.0, 1.0);
    a.at(r, 1) = 7.0;
    b.at(r, 1) = 7.0;
  }
  const PearsonDelta pd = pearson_delta(a, b);
  CHECK(std::isnan(pd.nominal.at(1, 1)));
  CHECK(pd.max_abs_delta == 0.0);  // only defined entries count
}

TEST_CASE("hard chi2 is zero for identical samples and large for a coherent shift") {
  RandomStream rng(47);
  std::vector<double> nom(10000);
  for (double& v : nom) v = rng.normal(10.0, 2.0);
  CHECK(hist_chi2_hard_column(nom, nom, 32) == 0.0);

  std::vector<double> shifted(nom);
  for (double& v : shifted) v += 10.0;  // +5 sigma
  CHECK(hist_chi2_hard_column(nom, shifted, 32) > 10.0);
}

TEST_CASE("hard chi2 of independent same-distribution draws sits in [0.5, 2.0]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    RandomStream rng(derive_seed(seed, "chi2-draws"));
    std::vector<double> a(10000), b(10000);
    for (double& v : a) v = rng.normal(0.0, 1.0);
    for (double& v : b) v = rng.normal(0.0, 1.0);
    const double chi2 = hist_chi2_hard_column(a, b, 32);
    CHECK(chi2 >= 0.5);
    CHECK(chi2 <= 2.0);
  }
}

TEST_CASE("hard chi2 needs at least two populated bins") {
  const std::vector<double> flat(100, 1.0);
  CHECK_THROWS_AS(hist_chi2_hard_column(flat, flat, 16), std::invalid_argument);
}

TEST_CASE("z statistics match hand values") {
  const ZStats zero = z_stats(std::vector<double>(32, 0.0));
  CHECK(zero.mean == 0.0);
  CHECK(zero.stddev == 0.0);
  CHECK(zero.skewness == 0.0);

  std::vector<double> balanced;
  for (int i = 0; i < 500; ++i) {
    balanced.push_back(1.0);
    balanced.push_back(-1.0);
  }
  const ZStats pm = z_stats(balanced);
  CHECK(pm.mean == doctest::Approx(0.0));
  CHECK(pm.stddev == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(pm.skewness == doctest::Approx(0.0));
}

TEST_CASE("rank test flags a stochastically smaller sample") {
  RandomStream rng(53);
  std::vector<double> small(150), big(3000);
  for (double& v : small) v = std::abs(rng.normal(0.0, 0.1));
  for (double& v : big) v = std::abs(rng.normal(0.0, 0.5));
  CHECK(rank_test_less(small, big) < 0.05);
  CHECK(rank_test_less(big, small) > 0.5);
}

TEST_CASE("mean and rms aggregate as stated") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(mean_of(v) == doctest::Approx(2.5));
  CHECK(rms_of(v) == doctest::Approx(std::sqrt(1.25)));
}

TEST_SUITE_END();
