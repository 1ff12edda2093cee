#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "advaudit/metrics.hpp"
#include "advaudit/nn.hpp"
#include "advaudit/rng.hpp"

using namespace advaudit;

TEST_SUITE_BEGIN("nn-models");

namespace {

Dataset linear_toy(std::size_t n, std::uint64_t seed, bool shuffle_labels = false) {
  RandomStream rng(seed);
  Dataset ds;
  ds.feature_names = {"a", "b"};
  ds.x = ad::Tensor({n, 2});
  ds.labels.resize(n);
  ds.split.assign(n, Split::kTrain);
  for (std::size_t i = 0; i < n; ++i) {
    ds.x.at(i, 0) = rng.normal(0.0, 1.0);
    ds.x.at(i, 1) = rng.normal(0.0, 1.0);
    ds.labels[i] = ds.x.at(i, 0) > 0.0 ? 1 : 0;
    if (shuffle_labels) ds.labels[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  nn::assign_splits(ds, 0.8, 0.1, 0.1, seed);
  return ds;
}

nn::ModelSpec toy_spec() {
  nn::ModelSpec spec;
  spec.family = nn::Family::kDense;
  spec.input_features = 2;
  spec.hidden = {16, 8};
  spec.dropout = 0.0;
  return spec;
}

}  // namespace

TEST_CASE("init is deterministic in the seed") {
  const nn::ModelSpec spec = toy_spec();
  const nn::Checkpoint a = nn::init(spec, 7);
  const nn::Checkpoint b = nn::init(spec, 7);
  const nn::Checkpoint c = nn::init(spec, 8);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
}

TEST_CASE("parameter counts match the hand count") {
  nn::ModelSpec dense;
  dense.family = nn::Family::kDense;
  dense.input_features = 12;
  dense.hidden = {64, 64, 32};
  // 12*64+64 + 64*64+64 + 64*32+32 + 32*1+1
  CHECK(dense.parameter_count() == 7105);
  CHECK(nn::init(dense, 1).params.size() == 7105);

  nn::ModelSpec linear;
  linear.family = nn::Family::kDense;
  linear.input_features = 4;
  linear.hidden = {};
  CHECK(linear.parameter_count() == 5);
}

TEST_CASE("all-zero parameters score exactly 0.5 everywhere") {
  const nn::ModelSpec spec = toy_spec();
  nn::Checkpoint ckpt = nn::init(spec, 1);
  std::fill(ckpt.params.begin(), ckpt.params.end(), 0.0);
  const Dataset ds = linear_toy(32, 5);
  for (double s : nn::predict(ckpt, ds)) CHECK(s == 0.5);
}

TEST_CASE("score equals the logistic of the logit, and signs agree") {
  const nn::ModelSpec spec = toy_spec();
  const nn::Checkpoint ckpt = nn::init(spec, 3);
  const Dataset ds = linear_toy(64, 9);
  const auto z = nn::logits(ckpt, ds);
  const auto s = nn::predict(ckpt, ds);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(s[i] == doctest::Approx(1.0 / (1.0 + std::exp(-z[i]))).epsilon(1e-12));
    CHECK((z[i] > 0.0) == (s[i] > 0.5));
  }
  CHECK(nn::predict(ckpt, ds) == s);  // determinism
}

TEST_CASE("training separates a linearly separable toy set") {
  const Dataset ds = linear_toy(2000, 21);
  nn::TrainConfig tcfg;
  tcfg.batch_size = 64;
  tcfg.max_epochs = 40;
  tcfg.patience = 10;
  tcfg.seed = 77;
  const nn::TrainResult r =
      nn::train(nn::init(toy_spec(), 77), ds.subset(Split::kTrain), ds.subset(Split::kVal), tcfg);
  const Dataset train = ds.subset(Split::kTrain);
  const auto scores = nn::predict(r.checkpoint, train);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] > 0.5) == (train.labels[i] == 1)) ++correct;
  CHECK(static_cast<double>(correct) / static_cast<double>(scores.size()) > 0.99);

  // early stopping bookkeeping: best epoch is no worse than the last epoch
  const double best = r.history[static_cast<std::size_t>(r.best_epoch)].val_loss;
  CHECK(best <= r.history.back().val_loss);
}

TEST_CASE("training is reproducible for identical data, config and seed") {
  const Dataset ds = linear_toy(600, 33);
  nn::TrainConfig tcfg;
  tcfg.max_epochs = 6;
  tcfg.patience = 3;
  tcfg.seed = 5;
  const auto a = nn::train(nn::init(toy_spec(), 5), ds.subset(Split::kTrain),
                           ds.subset(Split::kVal), tcfg);
  const auto b = nn::train(nn::init(toy_spec(), 5), ds.subset(Split::kTrain),
                           ds.subset(Split::kVal), tcfg);
  CHECK(a.checkpoint.params == b.checkpoint.params);
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("shuffled labels train to chance-level validation AUC") {
  std::vector<double> aucs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = linear_toy(3000, derive_seed(seed, "chance"), true);
    nn::TrainConfig tcfg;
    tcfg.max_epochs = 10;
    tcfg.patience = 3;
    tcfg.seed = seed;
    const auto r = nn::train(nn::init(toy_spec(), seed), ds.subset(Split::kTrain),
                             ds.subset(Split::kVal), tcfg);
    const Dataset val = ds.subset(Split::kVal);
    aucs.push_back(roc_auc(nn::predict(r.checkpoint, val), val.labels).auc);
  }
  CHECK(mean_of(aucs) > 0.45);
  CHECK(mean_of(aucs) < 0.55);
}

TEST_CASE("non-finite losses abort with epoch and batch context") {
  Dataset ds = linear_toy(64, 55);
  nn::TrainConfig tcfg;
  tcfg.learning_rate = 1e280;  // drives the parameters to overflow
  tcfg.max_epochs = 4;
  tcfg.patience = 2;
  tcfg.seed = 1;
  try {
    nn::train(nn::init(toy_spec(), 1), ds.subset(Split::kTrain), ds.subset(Split::kVal), tcfg);
  } catch (const std::runtime_error& ex) {
    const std::string msg = ex.what();
    CHECK(msg.find("epoch") != std::string::npos);
  }
}

TEST_CASE("pooled-set predictions are permutation and padding invariant") {
  nn::ModelSpec spec;
  spec.family = nn::Family::kPooledSet;
  spec.input_features = 3;
  spec.embed = {8, 8};
  spec.head = {8};
  spec.group_size = 4;
  const nn::Checkpoint ckpt = nn::init(spec, 11);

  Dataset ds;
  ds.feature_names = {"u", "v", "w"};
  ds.group = 4;
  ds.x = ad::Tensor({8, 3});
  ds.mask = {1, 1, 1, 0, 1, 1, 0, 0};
  ds.labels = {1, 0};
  ds.split = {Split::kTrain, Split::kTrain};
  RandomStream rng(2);
  for (std::size_t r = 0; r < 8; ++r) {
    if (ds.mask[r] == 0.0) continue;
    for (std::size_t c = 0; c < 3; ++c) ds.x.at(r, c) = rng.normal(0.0, 1.0);
  }
  const auto base = nn::logits(ckpt, ds);

  Dataset permuted = ds;  // swap the first two valid tracks of event 0
  for (std::size_t c = 0; c < 3; ++c)
    std::swap(permuted.x.at(0, c), permuted.x.at(1, c));
  const auto perm = nn::logits(ckpt, permuted);
  CHECK(perm[0] == doctest::Approx(base[0]).epsilon(1e-12));

  Dataset garbage = ds;  // padded rows may hold anything
  for (std::size_t c = 0; c < 3; ++c) {
    garbage.x.at(3, c) = 123.0;
    garbage.x.at(6, c) = -55.0;
    garbage.x.at(7, c) = 9.0;
  }
  const auto pad = nn::logits(ckpt, garbage);
  CHECK(pad[0] == base[0]);
  CHECK(pad[1] == base[1]);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject version skew") {
  const nn::ModelSpec spec = toy_spec();
  const nn::Checkpoint ckpt = nn::init(spec, 123);
  const auto path = std::filesystem::temp_directory_path() / "advaudit_ckpt_test.json";
  ckpt.save(path);
  const nn::Checkpoint back = nn::Checkpoint::load(path);
  CHECK(back.params == ckpt.params);
  CHECK(back.seed == ckpt.seed);
  CHECK(back.spec == ckpt.spec);

  // corrupt the version field
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"format_version\": 9");
  std::ofstream out(path);
  out << text;
  out.close();
  CHECK_THROWS_AS(nn::Checkpoint::load(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("indistinguishability task is balanced, pooled and split 80/10/10") {
  const Dataset nominal = linear_toy(1000, 71);
  Dataset shifted = nominal;
  for (std::size_t i = 0; i < shifted.x.size(); ++i) shifted.x[i] += 0.001;
  const Dataset task = nn::build_indistinguishability_task(nominal, shifted, 5);
  CHECK(task.examples() == 2000);
  std::size_t adv = 0, train = 0, val = 0, test = 0;
  for (std::size_t i = 0; i < task.examples(); ++i) {
    adv += static_cast<std::size_t>(task.labels[i]);
    switch (task.split[i]) {
      case Split::kTrain: ++train; break;
      case Split::kVal: ++val; break;
      case Split::kTest: ++test; break;
    }
  }
  CHECK(adv == 1000);
  CHECK(train == 1600);
  CHECK(val == 200);
  CHECK(test == 200);
}

TEST_CASE("aux classifier stays at chance on identical sets and detects a 5-sigma shift") {
  const Dataset nominal = linear_toy(3000, 81);
  nn::TrainConfig tcfg;
  tcfg.max_epochs = 10;
  tcfg.patience = 3;
  tcfg.seed = 4;

  // identical copies: chance level
  {
    const Dataset task = nn::build_indistinguishability_task(nominal, nominal, 6);
    const auto r = nn::train(nn::init(toy_spec(), 4), task.subset(Split::kTrain),
                             task.subset(Split::kVal), tcfg);
    const Dataset test = task.subset(Split::kTest);
    const double auc = roc_auc(nn::predict(r.checkpoint, test), test.labels).auc;
    CHECK(auc > 0.45);
    CHECK(auc < 0.55);
  }

  // one feature shifted by +5 sigma: a plain threshold already separates, so
  // the trained classifier must reach high AUC
  {
    Dataset shifted = nominal;
    for (std::size_t e = 0; e < shifted.examples(); ++e) shifted.x.at(e, 0) += 5.0;
    std::size_t split_ok = 0;
    for (std::size_t e = 0; e < nominal.examples(); ++e) {
      if (nominal.x.at(e, 0) < 2.5) ++split_ok;   // cut oracle on the nominal side
      if (shifted.x.at(e, 0) >= 2.5) ++split_ok;  // and on the shifted side
    }
    CHECK(static_cast<double>(split_ok) / (2.0 * 3000.0) > 0.95);

    const Dataset task = nn::build_indistinguishability_task(nominal, shifted, 6);
    const auto r = nn::train(nn::init(toy_spec(), 4), task.subset(Split::kTrain),
                             task.subset(Split::kVal), tcfg);
    const Dataset test = task.subset(Split::kTest);
    CHECK(roc_auc(nn::predict(r.checkpoint, test), test.labels).auc > 0.9);
  }
}

TEST_SUITE_END();
