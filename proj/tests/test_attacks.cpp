#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "advaudit/attacks.hpp"
#include "advaudit/bench.hpp"
#include "advaudit/metrics.hpp"
#include "advaudit/rng.hpp"
#include "helpers.hpp"

using namespace advaudit;
using namespace advaudit::testing;

TEST_SUITE_BEGIN("constrained-attacks");

namespace {

struct EventFixture {
  Dataset data;
  nn::Checkpoint model;
  UncertaintyModel unc;
};

const EventFixture& event_fixture() {
  static const EventFixture fx = [] {
    EventFixture f;
    bench::EventGenConfig gcfg;
    gcfg.events = 4000;
    f.data = bench::gen_event_table(gcfg, 2024);
    nn::assign_splits(f.data, 0.8, 0.1, 0.1, 2024);

    nn::ModelSpec spec;
    spec.family = nn::Family::kDense;
    spec.input_features = 12;
    spec.hidden = {16, 8};
    nn::TrainConfig tcfg;
    tcfg.max_epochs = 8;
    tcfg.patience = 3;
    tcfg.seed = 1;
    f.model = nn::train(nn::init(spec, 1), f.data.subset(Split::kTrain),
                        f.data.subset(Split::kVal), tcfg)
                  .checkpoint;

    UncertaintySpec us;
    us.widths = {{"lep_pt", 0.02},  {"lep_eta", 0.001},  {"lep_phi", 0.001},
                 {"jet1_pt", 0.02}, {"jet1_eta", 0.001}, {"jet1_phi", 0.001},
                 {"jet2_pt", 0.02}, {"jet2_eta", 0.001}, {"jet2_phi", 0.001},
                 {"m_jj", 0.02},    {"ht", 0.02}};
    us.masked = {"n_jets"};
    f.unc = resolve_uncertainty(us, f.data.feature_names);
    return f;
  }();
  return fx;
}

void check_box(const Dataset& nominal, const ad::Tensor& x_adv, const UncertaintyModel& unc,
               double slack = 1e-9) {
  const std::vector<double>* mask = nominal.has_mask() ? &nominal.mask : nullptr;
  const ad::Tensor sig = sigma(nominal.x, unc, mask);
  for (std::size_t i = 0; i < x_adv.size(); ++i) {
    const double delta = std::abs(x_adv[i] - nominal.x[i]);
    if (sig[i] == 0.0) {
      CHECK(std::memcmp(&x_adv.data()[i], &nominal.x.data()[i], sizeof(double)) == 0);
    } else {
      CHECK(delta <= unc.n_sigma * sig[i] + slack);
    }
  }
}

}  // namespace

TEST_CASE("soft histogram total mass equals the sample count") {
  RandomStream rng(5);
  std::vector<double> values(500);
  for (double& v : values) v = rng.normal(0.0, 2.0);
  const std::vector<double> edges{-2.0, -1.0, 0.0, 1.0, 2.0};
  for (double h : {0.05, 0.5, 3.0}) {
    const auto mass = soft_histogram(values, edges, h);
    double total = 0.0;
    for (double m : mass) total += m;
    CHECK(total == doctest::Approx(500.0).epsilon(1e-6));
  }
}

TEST_CASE("soft histogram converges to the hard histogram as bandwidth shrinks") {
  RandomStream rng(6);
  const std::size_t bins = 16;
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = static_cast<double>(i) / bins;
  const double width = 1.0 / bins;
  std::vector<double> values;
  while (values.size() < 1000) {
    const double v = rng.uniform();
    // keep draws away from the edges; convergence is pointwise off the edges
    const double frac = std::fmod(v, width) / width;
    if (frac > 0.05 && frac < 0.95 && v > 0.01 && v < 0.99) values.push_back(v);
  }
  const auto hard = hard_histogram(values, edges);
  const auto soft = soft_histogram(values, edges, width / 100.0);
  double l1 = 0.0;
  for (std::size_t b = 0; b < hard.size(); ++b) l1 += std::abs(hard[b] - soft[b]);
  CHECK(l1 < 1e-3);
}

TEST_CASE("a single value at a bin centre collapses into that bin") {
  const std::vector<double> edges{0.0, 1.0, 2.0};
  const auto mass = soft_histogram(std::vector<double>{0.5}, edges, 1e-3);
  CHECK(mass[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("non-monotone edges are rejected") {
  CHECK_THROWS_AS(soft_histogram(std::vector<double>{1.0}, std::vector<double>{0.0, 2.0, 1.0}, 0.1),
                  std::invalid_argument);
}

TEST_CASE("chi2_soft is zero on identical batches and insensitive to row order") {
  const EventFixture& fx = event_fixture();
  AttackConfig cfg;
  CHECK(chi2_soft(fx.data, fx.data, fx.unc, cfg) == doctest::Approx(0.0));

  Dataset jittered = fx.data;
  RandomStream rng(8);
  for (std::size_t i = 0; i < jittered.x.size(); ++i)
    jittered.x[i] *= 1.0 + 0.002 * rng.normal();
  const double base = chi2_soft(fx.data, jittered, fx.unc, cfg);

  std::vector<std::size_t> perm(jittered.examples());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  const Dataset reversed = jittered.select(perm);
  CHECK(chi2_soft(fx.data, reversed, fx.unc, cfg) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("coherent shifts cost more chi2 than zero-mean jitter of equal size") {
  const EventFixture& fx = event_fixture();
  AttackConfig cfg;
  std::vector<std::size_t> first;
  for (std::size_t i = 0; i < 1000; ++i) first.push_back(i);
  const Dataset batch = fx.data.select(first);
  const ad::Tensor sig = sigma(batch.x, fx.unc);
  const auto pt = static_cast<std::size_t>(feature_index(batch.feature_names, "jet1_pt"));

  Dataset coherent = batch;
  Dataset jitter = batch;
  RandomStream rng(9);
  for (std::size_t e = 0; e < batch.examples(); ++e) {
    const double step = 10.0 * sig.at(e, pt);
    coherent.x.at(e, pt) += step;
    jitter.x.at(e, pt) += (rng.uniform() < 0.5 ? 1.0 : -1.0) * step;
  }
  CHECK(chi2_soft(batch, coherent, fx.unc, cfg) > chi2_soft(batch, jitter, fx.unc, cfg));
}

TEST_CASE("prior loss closed forms") {
  CHECK(prior_loss(std::vector<double>(16, 0.0), AttackKind::kPgd) == 0.0);
  CHECK(prior_loss(std::vector<double>(16, 1.0), AttackKind::kPgd) == doctest::Approx(1.0));
  std::vector<double> alternating(16);
  for (std::size_t i = 0; i < alternating.size(); ++i) alternating[i] = i % 2 ? 1.0 : -1.0;
  CHECK(prior_loss(alternating, AttackKind::kCw) == doctest::Approx(1.0));
  CHECK(prior_loss(std::vector<double>(16, 1.0), AttackKind::kCw) == doctest::Approx(2.0));
}

TEST_CASE("both penalty terms pass the finite-difference check") {
  RandomStream rng(10);
  const std::size_t n = 48, d = 3;
  ad::Tensor nominal({n, d});
  for (std::size_t i = 0; i < nominal.size(); ++i) nominal[i] = rng.normal(10.0, 3.0);

  UncertaintySpec us;
  us.widths = {{"a", 0.05}, {"b", 0.05}, {"c", 0.05}};
  const UncertaintyModel unc = resolve_uncertainty(us, {"a", "b", "c"});
  AttackConfig cfg;
  cfg.histogram_bins = 8;

  // chi2 penalty
  {
    ad::Graph g;
    const int x = g.leaf("x", true);
    const int chi = g.soft_chi2(x, make_chi2_spec(nominal, unc, cfg, nullptr));
    ad::Bindings b;
    ad::Tensor adv = nominal;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += rng.normal(0.0, 0.2);
    b["x"] = adv;
    ad::Evaluation eval(g);
    eval.forward(b, chi);
    eval.backward(chi);
    CHECK(grads_close(eval.grad(x), fd_gradient(g, b, "x", chi, 1e-5)));
  }

  // gaussian prior, both variants
  for (const AttackKind kind : {AttackKind::kPgd, AttackKind::kCw}) {
    ad::Graph g;
    const int x = g.leaf("x", true);
    const ad::Tensor sig = sigma(nominal, unc);
    ad::Tensor neg_nom(nominal.shape()), inv_sig(nominal.shape());
    for (std::size_t i = 0; i < nominal.size(); ++i) {
      neg_nom[i] = -nominal[i];
      inv_sig[i] = sig[i] > 0.0 ? 1.0 / sig[i] : 0.0;
    }
    const int z = g.mul(g.add(x, g.constant(neg_nom)), g.constant(inv_sig));
    const double inv_n = 1.0 / static_cast<double>(n * d);
    int prior = g.mul(g.sum(g.square(z)), g.constant(ad::Tensor::scalar(inv_n)));
    if (kind == AttackKind::kCw) {
      const int mz = g.mul(g.sum(z), g.constant(ad::Tensor::scalar(inv_n)));
      prior = g.add(prior, g.square(mz));
    }
    ad::Bindings b;
    ad::Tensor adv = nominal;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += rng.normal(0.0, 0.3);
    b["x"] = adv;
    ad::Evaluation eval(g);
    eval.forward(b, prior);
    eval.backward(prior);
    CHECK(grads_close(eval.grad(x), fd_gradient(g, b, "x", prior, 1e-5)));
  }
}

TEST_CASE("a zero step size returns the input bit-exactly") {
  const EventFixture& fx = event_fixture();
  AttackConfig cfg;
  cfg.step_size = 0.0;
  cfg.iterations = 5;
  const AttackResult r = pgd_attack(fx.model, fx.data, fx.unc, cfg);
  CHECK(std::memcmp(r.x_adv.data().data(), fx.data.x.data().data(),
                    r.x_adv.size() * sizeof(double)) == 0);
  for (double z : r.z.data()) CHECK(z == 0.0);
}

TEST_CASE("pgd respects the box on every feature and fools some events") {
  const EventFixture& fx = event_fixture();
  AttackConfig cfg;  // published defaults: alpha 0.04, 20 steps, lambdas 0.5
  const AttackResult r = pgd_attack(fx.model, fx.data, fx.unc, cfg);
  check_box(fx.data, r.x_adv, fx.unc);

  Dataset adv = fx.data;
  adv.x = r.x_adv;
  const auto s_nom = nn::predict(fx.model, fx.data);
  const auto s_adv = nn::predict(fx.model, adv);
  const double fr = fooling_ratio(s_nom, s_adv);
  CHECK(fr > 0.0);

  // distributional damage stays below the two-sample noise scale
  const auto chi2 = hist_chi2_hard(fx.data.x, adv.x, 32);
  for (std::size_t c = 0; c < chi2.size(); ++c) {
    CAPTURE(fx.data.feature_names[c]);
    CHECK(chi2[c] < 2.0);
  }

  // objective trace was recorded and is finite everywhere
  CHECK(r.objective.size() ==
        static_cast<std::size_t>(cfg.iterations) * ((fx.data.examples() + 511) / 512));
  for (double v : r.objective) CHECK(std::isfinite(v));
}

TEST_CASE("pgd outputs are batch-permutation equivariant") {
  const EventFixture& fx = event_fixture();
  std::vector<std::size_t> head;
  for (std::size_t i = 0; i < 256; ++i) head.push_back(i);
  const Dataset batch = fx.data.select(head);

  std::vector<std::size_t> perm(head.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  const Dataset permuted = batch.select(perm);

  AttackConfig cfg;
  cfg.iterations = 8;
  const AttackResult a = pgd_attack(fx.model, batch, fx.unc, cfg);
  const AttackResult b = pgd_attack(fx.model, permuted, fx.unc, cfg);
  for (std::size_t e = 0; e < perm.size(); ++e)
    for (std::size_t c = 0; c < batch.x.cols(); ++c)
      CHECK(b.x_adv.at(e, c) ==
            doctest::Approx(a.x_adv.at(perm[e], c)).epsilon(1e-9));
}

TEST_CASE("cw with a tiny box collapses to the nominal sample") {
  const EventFixture& fx = event_fixture();
  std::vector<std::size_t> head;
  for (std::size_t i = 0; i < 200; ++i) head.push_back(i);
  const Dataset batch = fx.data.select(head);

  UncertaintyModel tiny = fx.unc;
  tiny.n_sigma = 1e-300;  // the allowed interval collapses
  AttackConfig cfg;
  cfg.kind = AttackKind::kCw;
  cfg.cw_kappa = 50.0;
  cfg.cw_search_steps = 3;
  cfg.cw_inner_iterations = 5;
  const AttackResult r = cw_attack(fx.model, batch, tiny, cfg);

  for (std::size_t i = 0; i < r.x_adv.size(); ++i)
    CHECK(r.x_adv[i] == doctest::Approx(batch.x[i]).epsilon(1e-12));
  Dataset adv = batch;
  adv.x = r.x_adv;
  CHECK(fooling_ratio(nn::predict(fx.model, batch), nn::predict(fx.model, adv)) == 0.0);
}

TEST_CASE("cw respects the box and reaches the margin on successful rows") {
  const EventFixture& fx = event_fixture();
  std::vector<std::size_t> head;
  for (std::size_t i = 0; i < 512; ++i) head.push_back(i);
  const Dataset batch = fx.data.select(head);

  AttackConfig cfg;
  cfg.kind = AttackKind::kCw;
  cfg.cw_kappa = 0.1;
  cfg.cw_search_steps = 4;
  cfg.cw_inner_iterations = 20;
  const AttackResult r = cw_attack(fx.model, batch, fx.unc, cfg);
  check_box(batch, r.x_adv, fx.unc);

  Dataset adv = batch;
  adv.x = r.x_adv;
  const auto logit_adv = nn::logits(fx.model, adv);
  std::size_t successes = 0;
  for (std::size_t e = 0; e < batch.examples(); ++e) {
    if (!r.success[e]) continue;
    ++successes;
    const double s = batch.labels[e] == 1 ? -1.0 : 1.0;
    CHECK(s * logit_adv[e] >= cfg.cw_kappa - 1e-9);
  }
  CHECK(successes > 0);
}

TEST_CASE("cw successes concentrate near the decision threshold") {
  const EventFixture& fx = event_fixture();
  std::vector<std::size_t> head;
  for (std::size_t i = 0; i < 1024; ++i) head.push_back(i);
  const Dataset batch = fx.data.select(head);

  AttackConfig cfg;
  cfg.kind = AttackKind::kCw;
  cfg.cw_kappa = 0.0;  // kappa 0: success is a plain decision flip
  cfg.cw_search_steps = 4;
  cfg.cw_inner_iterations = 25;
  const AttackResult r = cw_attack(fx.model, batch, fx.unc, cfg);

  Dataset adv = batch;
  adv.x = r.x_adv;
  const auto s_nom = nn::predict(fx.model, batch);
  const auto s_adv = nn::predict(fx.model, adv);

  std::vector<double> fooled, all;
  for (std::size_t e = 0; e < s_nom.size(); ++e) {
    all.push_back(std::abs(s_nom[e] - 0.5));
    const bool flipped = (s_nom[e] > 0.5) != (s_adv[e] > 0.5);
    if (flipped) fooled.push_back(std::abs(s_nom[e] - 0.5));
    if (flipped) CHECK((batch.labels[e] == 1 ? -1.0 : 1.0) * std::log(s_adv[e] / (1 - s_adv[e])) >=
                       -1e-9);
  }
  REQUIRE(!fooled.empty());
  std::sort(fooled.begin(), fooled.end());
  std::sort(all.begin(), all.end());
  CHECK(fooled[fooled.size() / 2] < all[all.size() / 2]);
}

TEST_CASE("fooling ratio counts threshold flips") {
  std::vector<double> a{0.9, 0.4, 0.6, 0.2};
  CHECK(fooling_ratio(a, a) == 0.0);
  const std::vector<double> flipped{0.1, 0.6, 0.4, 0.8};
  CHECK(fooling_ratio(a, flipped) == 1.0);
  std::vector<double> nom(100, 0.4), adv(100, 0.4);
  adv[3] = adv[50] = adv[97] = 0.7;
  CHECK(fooling_ratio(nom, adv) == doctest::Approx(0.03));
  CHECK_THROWS_AS(fooling_ratio(nom, std::vector<double>{0.1}), std::invalid_argument);
}

TEST_CASE("track-level attacks leave padding and masked features bit-identical") {
  bench::TrackGenConfig gcfg;
  gcfg.events = 256;
  Dataset data = bench::gen_track_sets(gcfg, bench::TrackTask::kQuarkGluon, 31);
  nn::assign_splits(data, 0.8, 0.1, 0.1, 31);

  nn::ModelSpec spec;
  spec.family = nn::Family::kPooledSet;
  spec.input_features = 6;
  spec.embed = {8, 8};
  spec.head = {8};
  spec.group_size = gcfg.max_tracks;
  const nn::Checkpoint model = nn::init(spec, 3);  // the box contract holds untrained

  UncertaintySpec us;
  us.widths = {{"pt", 0.02}, {"eta", 0.001}, {"phi", 0.001}, {"d0", 0.005}, {"z0", 0.005}};
  us.masked = {"charge"};
  const UncertaintyModel unc = resolve_uncertainty(us, data.feature_names);

  AttackConfig cfg;
  cfg.iterations = 6;
  const AttackResult r = pgd_attack(model, data, unc, cfg);
  check_box(data, r.x_adv, unc);

  const auto charge = static_cast<std::size_t>(feature_index(data.feature_names, "charge"));
  for (std::size_t row = 0; row < data.x.rows(); ++row) {
    CHECK(r.x_adv.at(row, charge) == data.x.at(row, charge));
    if (data.mask[row] == 0.0)
      for (std::size_t c = 0; c < data.x.cols(); ++c) CHECK(r.x_adv.at(row, c) == 0.0);
  }
}

TEST_SUITE_END();
