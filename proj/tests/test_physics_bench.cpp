#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "advaudit/bench.hpp"
#include "advaudit/metrics.hpp"

using namespace advaudit;
using namespace advaudit::bench;

TEST_SUITE_BEGIN("physics-bench");

TEST_CASE("event generation is bit-identical for equal seeds") {
  EventGenConfig cfg;
  cfg.events = 500;
  const Dataset a = gen_event_table(cfg, 42);
  const Dataset b = gen_event_table(cfg, 42);
  const Dataset c = gen_event_table(cfg, 43);
  CHECK(a.x.data() == b.x.data());
  CHECK(a.labels == b.labels);
  CHECK(a.x.data() != c.x.data());
}

TEST_CASE("event invariants hold") {
  EventGenConfig cfg;
  cfg.events = 2000;
  const Dataset ds = gen_event_table(cfg, 7);
  const auto idx = [&](const char* n) {
    return static_cast<std::size_t>(feature_index(ds.feature_names, n));
  };
  constexpr double pi = 3.141592653589793238462643383279502884;
  for (std::size_t e = 0; e < ds.examples(); ++e) {
    for (const char* n : {"lep_pt", "jet1_pt", "jet2_pt", "m_jj", "ht"})
      CHECK(ds.x.at(e, idx(n)) > 0.0);
    for (const char* n : {"lep_eta", "jet1_eta", "jet2_eta"})
      CHECK(std::abs(ds.x.at(e, idx(n))) <= 5.0);
    for (const char* n : {"lep_phi", "jet1_phi", "jet2_phi"}) {
      CHECK(ds.x.at(e, idx(n)) > -pi);
      CHECK(ds.x.at(e, idx(n)) <= pi);
    }
    const double nj = ds.x.at(e, idx("n_jets"));
    CHECK(nj >= 2.0);
    CHECK(nj == std::floor(nj));
    CHECK(ds.x.at(e, idx("jet1_pt")) > ds.x.at(e, idx("jet2_pt")));
  }
}

TEST_CASE("degenerate zero-variance configuration is rejected") {
  EventGenConfig cfg;
  cfg.sig_jet_pt_scale = 0.0;
  CHECK_THROWS_AS(gen_event_table(cfg, 1), std::invalid_argument);
  TrackGenConfig tcfg;
  tcfg.jet_pt_scale = 0.0;
  CHECK_THROWS_AS(gen_track_sets(tcfg, TrackTask::kQuarkGluon, 1), std::invalid_argument);
}

TEST_CASE("default generator puts the cut-baseline signal efficiency inside (0.2, 0.8)") {
  EventGenConfig cfg;  // frozen defaults, tuned once against this oracle
  cfg.events = 50000;
  const Dataset ds = gen_event_table(cfg, 1);
  const auto scores = cut_ttbar_scores(ds);
  const BinaryPerformance perf = binary_performance(scores, ds.labels);
  CHECK(perf.signal_efficiency > 0.2);
  CHECK(perf.signal_efficiency < 0.8);
}

TEST_CASE("ttbar cut follows the published thresholds strictly") {
  CHECK(cut_ttbar(3, 70.0, 50.0));
  CHECK_FALSE(cut_ttbar(2, 200.0, 150.0));  // needs more than two jets
  CHECK_FALSE(cut_ttbar(3, 60.0, 50.0));    // boundary fails, strict inequality
  CHECK_FALSE(cut_ttbar(3, 70.0, 40.0));
}

TEST_CASE("track sets honour the padding contract") {
  TrackGenConfig cfg;
  cfg.events = 300;
  for (const auto task : {TrackTask::kQuarkGluon, TrackTask::kEtmiss}) {
    const Dataset ds = gen_track_sets(cfg, task, 5);
    ds.check_consistent();
    for (std::size_t e = 0; e < ds.examples(); ++e) {
      std::size_t valid = 0;
      for (std::size_t t = 0; t < ds.group; ++t) {
        const std::size_t r = e * ds.group + t;
        if (ds.mask[r] != 0.0) {
          ++valid;
          continue;
        }
        for (std::size_t c = 0; c < ds.x.cols(); ++c) CHECK(ds.x.at(r, c) == 0.0);
      }
      CHECK(valid >= 1);
    }
  }
}

TEST_CASE("etmiss labels agree with the hidden truth vector") {
  TrackGenConfig cfg;
  cfg.events = 2000;
  EtmissTruth truth;
  const Dataset ds = gen_track_sets(cfg, TrackTask::kEtmiss, 11, &truth);
  for (std::size_t e = 0; e < ds.examples(); ++e) {
    const double met = std::hypot(truth.px[e], truth.py[e]);
    CHECK(ds.labels[e] == (met > cfg.met_threshold ? 1 : 0));
  }
}

TEST_CASE("gluon jets carry more tracks than quark jets") {
  TrackGenConfig cfg;
  cfg.events = 10000;
  const Dataset ds = gen_track_sets(cfg, TrackTask::kQuarkGluon, 3);
  double quark_tracks = 0.0, gluon_tracks = 0.0;
  std::size_t quarks = 0, gluons = 0;
  for (std::size_t e = 0; e < ds.examples(); ++e) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < ds.group; ++t) n += ds.mask[e * ds.group + t] != 0.0;
    if (ds.labels[e] == 1) {
      quark_tracks += static_cast<double>(n);
      ++quarks;
    } else {
      gluon_tracks += static_cast<double>(n);
      ++gluons;
    }
  }
  CHECK(gluon_tracks / static_cast<double>(gluons) >
        quark_tracks / static_cast<double>(quarks));
}

TEST_CASE("girth basics") {
  CHECK(girth(std::vector<double>{30.0}, std::vector<double>{1.0}, std::vector<double>{0.4}) ==
        0.0);

  // two equal-pt tracks at eta = +-0.1, same phi: axis at eta 0, girth 0.1
  const std::vector<double> pt{10.0, 10.0}, eta{0.1, -0.1}, phi{0.7, 0.7};
  CHECK(girth(pt, eta, phi) == doctest::Approx(0.1).epsilon(1e-12));

  // homogeneity degree zero in pt
  std::vector<double> pt10{100.0, 100.0};
  CHECK(girth(pt10, eta, phi) == doctest::Approx(girth(pt, eta, phi)).epsilon(1e-12));

  CHECK_THROWS_AS(
      girth(std::vector<double>{0.0}, std::vector<double>{0.0}, std::vector<double>{0.0}),
      std::domain_error);
}

TEST_CASE("girth handles the phi wrap") {
  constexpr double pi = 3.141592653589793238462643383279502884;
  const std::vector<double> pt{5.0, 5.0};
  const std::vector<double> eta{0.0, 0.0};
  const std::vector<double> phi{pi - 0.05, -pi + 0.05};  // 0.1 apart across the wrap
  CHECK(girth(pt, eta, phi) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("ptd matches the closed forms") {
  CHECK(ptd(std::vector<double>{42.0}) == doctest::Approx(1.0));
  const std::vector<double> four(4, 7.5);
  CHECK(ptd(four) == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<double> nine(9, 2.0);
  CHECK(ptd(nine) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(ptd(std::vector<double>{0.0, 0.0}), std::domain_error);
}

TEST_CASE("quark-gluon cut keeps the published clauses verbatim") {
  CHECK(cut_quark_gluon(2, 0.8, 0.3, {}));
  CHECK_FALSE(cut_quark_gluon(5, 0.8, 0.3, {}));   // multiplicity clause
  CHECK_FALSE(cut_quark_gluon(2, 0.9, 0.05, {}));  // girth clause
  // thresholds are configurable
  QuarkGluonCuts loose;
  loose.girth_lo = 0.01;
  CHECK(cut_quark_gluon(2, 0.9, 0.05, loose));
}

TEST_CASE("etmiss baseline matches the hand triangles") {
  {
    const auto [mag, label] =
        etmiss_baseline(std::vector<double>{3.0, -3.0}, std::vector<double>{4.0, -4.0});
    CHECK(mag == doctest::Approx(0.0));
    CHECK_FALSE(label);
  }
  {
    const auto [mag, label] = etmiss_baseline(std::vector<double>{30.0}, std::vector<double>{40.0});
    CHECK(mag == doctest::Approx(50.0));
    CHECK_FALSE(label);
  }
  {
    const auto [mag, label] = etmiss_baseline(std::vector<double>{60.0}, std::vector<double>{80.0});
    CHECK(mag == doctest::Approx(100.0));
    CHECK(label);
  }
}

TEST_CASE("observables are invariant under track permutation") {
  std::vector<double> pt{10.0, 20.0, 5.0}, eta{0.1, -0.2, 0.05}, phi{1.0, 1.1, 0.9};
  const double g0 = girth(pt, eta, phi);
  const double p0 = ptd(pt);
  const auto [m0, l0] = etmiss_baseline(pt, eta);
  std::swap(pt[0], pt[2]);
  std::swap(eta[0], eta[2]);
  std::swap(phi[0], phi[2]);
  CHECK(girth(pt, eta, phi) == doctest::Approx(g0).epsilon(1e-12));
  CHECK(ptd(pt) == doctest::Approx(p0).epsilon(1e-12));
  CHECK(etmiss_baseline(pt, eta).first == doctest::Approx(m0).epsilon(1e-12));
  (void)l0;
}

TEST_SUITE_END();
