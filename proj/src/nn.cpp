#include "advaudit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "advaudit/rng.hpp"

namespace advaudit::nn {

const char* family_name(Family f) {
  return f == Family::kDense ? "dense" : "pooled_set";
}

Family family_from_name(const std::string& s) {
  if (s == "dense") return Family::kDense;
  if (s == "pooled_set") return Family::kPooledSet;
  throw std::invalid_argument("unknown model family '" + s + "'");
}

void ModelSpec::validate() const {
  if (input_features <= 0) throw std::invalid_argument("ModelSpec: input_features must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("ModelSpec: dropout must be in [0, 1)");
  const auto positive = [](const std::vector<int>& v, const char* what) {
    for (int w : v)
      if (w <= 0) throw std::invalid_argument(std::string("ModelSpec: ") + what + " widths must be positive");
  };
  positive(hidden, "hidden");
  positive(embed, "embed");
  positive(head, "head");
  if (family == Family::kPooledSet) {
    if (group_size == 0) throw std::invalid_argument("ModelSpec: pooled_set needs group_size");
    if (embed.empty()) throw std::invalid_argument("ModelSpec: pooled_set needs embed widths");
  }
}

namespace {

// layer widths in emission order: {in, out} pairs ending in the single logit
std::vector<std::pair<int, int>> layer_plan(const ModelSpec& spec) {
  std::vector<std::pair<int, int>> plan;
  if (spec.family == Family::kDense) {
    int in = spec.input_features;
    for (int w : spec.hidden) {
      plan.emplace_back(in, w);
      in = w;
    }
    plan.emplace_back(in, 1);
  } else {
    int in = spec.input_features;
    for (int w : spec.embed) {
      plan.emplace_back(in, w);
      in = w;
    }
    for (int w : spec.head) {
      plan.emplace_back(in, w);
      in = w;
    }
    plan.emplace_back(in, 1);
  }
  return plan;
}

}  // namespace

std::size_t ModelSpec::parameter_count() const {
  validate();
  std::size_t n = 0;
  for (const auto& [in, out] : layer_plan(*this))
    n += static_cast<std::size_t>(in) * static_cast<std::size_t>(out) +
         static_cast<std::size_t>(out);
  return n;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
}

Checkpoint init(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.seed = seed;
  ckpt.params.resize(spec.parameter_count());
  RandomStream rng(derive_seed(seed, "init"));
  std::size_t k = 0;
  for (const auto& [in, out] : layer_plan(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t n = static_cast<std::size_t>(in) * static_cast<std::size_t>(out) +
                          static_cast<std::size_t>(out);
    for (std::size_t i = 0; i < n; ++i) ckpt.params[k++] = rng.uniform(-bound, bound);
  }
  return ckpt;
}

EmittedModel emit_model(ad::Graph& g, const ModelSpec& spec, const EmitOptions& opt) {
  spec.validate();
  EmittedModel em;
  int x = g.leaf("x", opt.input_grad);
  int mask = -1;
  if (spec.family == Family::kPooledSet) mask = g.leaf("mask", false);

  const auto plan = layer_plan(spec);
  const std::size_t embed_layers =
      spec.family == Family::kPooledSet ? spec.embed.size() : plan.size();  // pool after these
  std::size_t offset = 0;
  int h = x;
  for (std::size_t li = 0; li < plan.size(); ++li) {
    const auto [in, out] = plan[li];
    const std::string wname = "w" + std::to_string(li);
    const std::string bname = "b" + std::to_string(li);
    const int w = g.leaf(wname, opt.param_grad);
    const int b = g.leaf(bname, opt.param_grad);
    em.param_names.push_back(wname);
    em.param_slices.emplace_back(offset, ad::Shape{static_cast<std::size_t>(in),
                                                   static_cast<std::size_t>(out)});
    offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    em.param_names.push_back(bname);
    em.param_slices.emplace_back(offset, ad::Shape{static_cast<std::size_t>(out)});
    offset += static_cast<std::size_t>(out);

    h = g.bias_add(g.matmul(h, w), b);
    const bool is_output = li + 1 == plan.size();
    if (!is_output) {
      h = g.relu(h);
      if (opt.train_dropout && spec.dropout > 0.0) {
        const std::string dname = "drop" + std::to_string(em.dropout_names.size());
        const int d = g.leaf(dname, false);
        em.dropout_names.push_back(dname);
        em.dropout_widths.push_back(static_cast<std::size_t>(out));
        h = g.mul(h, d);
      }
    }
    if (spec.family == Family::kPooledSet && li + 1 == embed_layers)
      h = g.masked_mean_pool(h, mask, spec.group_size);
  }
  em.logits = h;
  return em;
}

ModelGraph build_model_graph(const ModelSpec& spec, const EmitOptions& opt, bool with_loss) {
  ModelGraph mg;
  EmittedModel em = emit_model(mg.graph, spec, opt);
  mg.logits = em.logits;
  mg.param_names = std::move(em.param_names);
  mg.param_slices = std::move(em.param_slices);
  mg.dropout_names = std::move(em.dropout_names);
  mg.dropout_widths = std::move(em.dropout_widths);
  if (with_loss) {
    const int y = mg.graph.leaf("y", false);
    mg.loss = mg.graph.mean(mg.graph.bce_with_logits(mg.logits, y));
  }
  return mg;
}

namespace {

void bind_param_slices(const std::vector<std::string>& names,
                       const std::vector<std::pair<std::size_t, ad::Shape>>& slices,
                       const std::vector<double>& flat, ad::Bindings& b) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& [offset, shape] = slices[i];
    const std::size_t n = ad::shape_size(shape);
    if (offset + n > flat.size()) throw std::logic_error("bind_params: parameter vector too short");
    b[names[i]] =
        ad::Tensor(shape, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                              flat.begin() + static_cast<std::ptrdiff_t>(offset + n)));
  }
}

}  // namespace

void bind_params(const ModelGraph& mg, const std::vector<double>& flat, ad::Bindings& b) {
  bind_param_slices(mg.param_names, mg.param_slices, flat, b);
}

void bind_params_for_emitted(const EmittedModel& em, const std::vector<double>& flat,
                             ad::Bindings& b) {
  bind_param_slices(em.param_names, em.param_slices, flat, b);
}

namespace {

void check_data_matches(const ModelSpec& spec, const Dataset& ds, const char* what) {
  ds.check_consistent();
  if (ds.features() != static_cast<std::size_t>(spec.input_features))
    throw std::invalid_argument(std::string(what) + ": feature count " +
                                std::to_string(ds.features()) + " does not match model input " +
                                std::to_string(spec.input_features));
  const std::size_t expected_group = spec.family == Family::kPooledSet ? spec.group_size : 1;
  if (ds.group != expected_group)
    throw std::invalid_argument(std::string(what) + ": group size mismatch");
  for (int y : ds.labels)
    if (y != 0 && y != 1) throw std::invalid_argument(std::string(what) + ": labels must be binary");
}

ad::Tensor gather_x(const Dataset& ds, std::span<const std::size_t> examples) {
  const std::size_t cols = ds.x.cols();
  ad::Tensor out({examples.size() * ds.group, cols});
  for (std::size_t k = 0; k < examples.size(); ++k)
    for (std::size_t t = 0; t < ds.group; ++t) {
      const std::size_t src = examples[k] * ds.group + t;
      const std::size_t dst = k * ds.group + t;
      for (std::size_t c = 0; c < cols; ++c) out.at(dst, c) = ds.x.at(src, c);
    }
  return out;
}

ad::Tensor gather_mask(const Dataset& ds, std::span<const std::size_t> examples) {
  ad::Tensor out({examples.size() * ds.group});
  for (std::size_t k = 0; k < examples.size(); ++k)
    for (std::size_t t = 0; t < ds.group; ++t)
      out[k * ds.group + t] = ds.mask[examples[k] * ds.group + t];
  return out;
}

ad::Tensor gather_y(const Dataset& ds, std::span<const std::size_t> examples) {
  ad::Tensor out({examples.size(), 1});
  for (std::size_t k = 0; k < examples.size(); ++k)
    out[k] = static_cast<double>(ds.labels[examples[k]]);
  return out;
}

double dataset_loss(const ModelGraph& mg, const std::vector<double>& params, const Dataset& ds,
                    std::size_t chunk) {
  ad::Bindings b;
  bind_params(mg, params, b);
  ad::Evaluation eval(mg.graph);
  std::vector<std::size_t> ids(ds.examples());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  double acc = 0.0;
  for (std::size_t start = 0; start < ids.size(); start += chunk) {
    const std::size_t stop = std::min(ids.size(), start + chunk);
    const std::span<const std::size_t> part(ids.data() + start, stop - start);
    b["x"] = gather_x(ds, part);
    b["y"] = gather_y(ds, part);
    if (ds.has_mask()) b["mask"] = gather_mask(ds, part);
    const double mean_loss = eval.forward(b, mg.loss).item();
    acc += mean_loss * static_cast<double>(part.size());
  }
  return acc / static_cast<double>(ids.size());
}

}  // namespace

TrainResult train(const Checkpoint& start, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  check_data_matches(start.spec, train_set, "train");
  check_data_matches(start.spec, val_set, "train (validation set)");
  if (start.params.size() != start.spec.parameter_count())
    throw std::invalid_argument("train: parameter count does not match spec");
  if (train_set.examples() == 0 || val_set.examples() == 0)
    throw std::invalid_argument("train: empty split");

  const ModelSpec& spec = start.spec;
  EmitOptions train_opt{.input_grad = false, .param_grad = true, .train_dropout = true};
  EmitOptions eval_opt{};
  const ModelGraph mg_train = build_model_graph(spec, train_opt, true);
  const ModelGraph mg_eval = build_model_graph(spec, eval_opt, true);

  std::vector<double> params = start.params;
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  long adam_t = 0;

  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(train_set.examples());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = params;
  int stale = 0;

  ad::Bindings bindings;
  ad::Evaluation eval(mg_train.graph);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    RandomStream shuffle_rng(derive_seed(cfg.seed, "shuffle-epoch-" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);
    RandomStream dropout_rng(derive_seed(cfg.seed, "dropout-epoch-" + std::to_string(epoch)));

    double train_loss_acc = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const std::span<const std::size_t> part(order.data() + begin, end - begin);

      bindings.clear();
      bind_params(mg_train, params, bindings);
      bindings["x"] = gather_x(train_set, part);
      bindings["y"] = gather_y(train_set, part);
      if (train_set.has_mask()) bindings["mask"] = gather_mask(train_set, part);
      for (std::size_t di = 0; di < mg_train.dropout_names.size(); ++di) {
        const bool track_level =
            spec.family == Family::kPooledSet && di < spec.embed.size();
        const std::size_t rows = part.size() * (track_level ? spec.group_size : 1);
        ad::Tensor dmask({rows, mg_train.dropout_widths[di]});
        const double keep = 1.0 - spec.dropout;
        for (std::size_t i = 0; i < dmask.size(); ++i)
          dmask[i] = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
        bindings[mg_train.dropout_names[di]] = std::move(dmask);
      }

      const double loss = eval.forward(bindings, mg_train.loss).item();
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
      train_loss_acc += loss * static_cast<double>(part.size());

      eval.backward(mg_train.loss);
      for (std::size_t i = 0; i < mg_train.param_names.size(); ++i) {
        const auto& [offset, shape] = mg_train.param_slices[i];
        const ad::Tensor& g = eval.grad(mg_train.graph.leaf_id(mg_train.param_names[i]));
        std::copy(g.data().begin(), g.data().end(),
                  grad.begin() + static_cast<std::ptrdiff_t>(offset));
      }

      ++adam_t;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        params[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
      }
    }

    EpochStats stats;
    stats.train_loss = train_loss_acc / static_cast<double>(order.size());
    stats.val_loss = dataset_loss(mg_eval, params, val_set, 4096);
    if (!std::isfinite(stats.val_loss))
      throw std::runtime_error("train: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    result.history.push_back(stats);

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  result.checkpoint.format_version = kCheckpointVersion;
  result.checkpoint.spec = spec;
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.params = std::move(best_params);
  return result;
}

std::vector<double> logits_matrix(const Checkpoint& ckpt, const ad::Tensor& x,
                                  const std::vector<double>* mask) {
  ckpt.spec.validate();
  if (ckpt.params.size() != ckpt.spec.parameter_count())
    throw std::invalid_argument("logits: parameter count does not match spec");
  if (x.cols() != static_cast<std::size_t>(ckpt.spec.input_features))
    throw std::invalid_argument("logits: feature count mismatch");
  const std::size_t group = ckpt.spec.family == Family::kPooledSet ? ckpt.spec.group_size : 1;
  if (x.rows() % group != 0) throw std::invalid_argument("logits: rows not divisible by group");
  if (ckpt.spec.family == Family::kPooledSet && (!mask || mask->size() != x.rows()))
    throw std::invalid_argument("logits: pooled model needs a row mask");

  const ModelGraph mg = build_model_graph(ckpt.spec, EmitOptions{}, false);
  ad::Bindings b;
  bind_params(mg, ckpt.params, b);
  ad::Evaluation eval(mg.graph);

  const std::size_t examples = x.rows() / group;
  std::vector<double> out(examples);
  const std::size_t chunk = 4096;
  for (std::size_t start = 0; start < examples; start += chunk) {
    const std::size_t stop = std::min(examples, start + chunk);
    ad::Tensor xs({(stop - start) * group, x.cols()});
    for (std::size_t r = 0; r < xs.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) xs.at(r, c) = x.at(start * group + r, c);
    b["x"] = std::move(xs);
    if (mask) {
      ad::Tensor ms({(stop - start) * group});
      for (std::size_t r = 0; r < ms.size(); ++r) ms[r] = (*mask)[start * group + r];
      b["mask"] = std::move(ms);
    }
    const ad::Tensor& lg = eval.forward(b, mg.logits);
    for (std::size_t e = start; e < stop; ++e) out[e] = lg[e - start];
  }
  return out;
}

std::vector<double> logits(const Checkpoint& ckpt, const Dataset& data) {
  check_data_matches(ckpt.spec, data, "logits");
  return logits_matrix(ckpt, data.x, data.has_mask() ? &data.mask : nullptr);
}

std::vector<double> predict(const Checkpoint& ckpt, const Dataset& data) {
  std::vector<double> z = logits(ckpt, data);
  for (double& v : z) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return z;
}

Dataset build_indistinguishability_task(const Dataset& nominal, const Dataset& adversarial,
                                        std::uint64_t seed) {
  nominal.check_consistent();
  adversarial.check_consistent();
  if (!nominal.schema_equals(adversarial))
    throw std::invalid_argument("build_indistinguishability_task: schema mismatch");
  if (nominal.mask != adversarial.mask)
    throw std::invalid_argument("build_indistinguishability_task: validity masks differ");

  Dataset out;
  out.feature_names = nominal.feature_names;
  out.group = nominal.group;
  const std::size_t cols = nominal.x.cols();
  out.x = ad::Tensor({nominal.x.rows() + adversarial.x.rows(), cols});
  std::copy(nominal.x.data().begin(), nominal.x.data().end(), out.x.data().begin());
  std::copy(adversarial.x.data().begin(), adversarial.x.data().end(),
            out.x.data().begin() + static_cast<std::ptrdiff_t>(nominal.x.size()));
  if (nominal.has_mask()) {
    out.mask = nominal.mask;
    out.mask.insert(out.mask.end(), adversarial.mask.begin(), adversarial.mask.end());
  }
  out.labels.assign(nominal.examples(), 0);
  out.labels.insert(out.labels.end(), adversarial.examples(), 1);
  out.split.assign(out.labels.size(), Split::kTrain);
  assign_splits(out, 0.8, 0.1, 0.1, seed);
  return out;
}

void assign_splits(Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("assign_splits: fractions must sum to 1");
  if (train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0)
    throw std::invalid_argument("assign_splits: fractions must be non-negative");
  const std::size_t n = ds.examples();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  ds.split.assign(n, Split::kTest);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      ds.split[order[i]] = Split::kTrain;
    else if (i < n_train + n_val)
      ds.split[order[i]] = Split::kVal;
  }
}

namespace {

nlohmann::ordered_json spec_to_json(const ModelSpec& spec) {
  return nlohmann::ordered_json{{"family", family_name(spec.family)},
                                {"input_features", spec.input_features},
                                {"hidden", spec.hidden},
                                {"dropout", spec.dropout},
                                {"embed", spec.embed},
                                {"head", spec.head},
                                {"group_size", spec.group_size}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  spec.input_features = j.at("input_features").get<int>();
  spec.hidden = j.at("hidden").get<std::vector<int>>();
  spec.dropout = j.at("dropout").get<double>();
  spec.embed = j.at("embed").get<std::vector<int>>();
  spec.head = j.at("head").get<std::vector<int>>();
  spec.group_size = j.at("group_size").get<std::size_t>();
  return spec;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j{{"format_version", format_version},
                           {"spec", spec_to_json(spec)},
                           {"seed", seed},
                           {"parameters", params}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Checkpoint::save: cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("Checkpoint::save: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Checkpoint::load: cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  Checkpoint ckpt;
  ckpt.format_version = j.at("format_version").get<int>();
  if (ckpt.format_version != kCheckpointVersion)
    throw std::runtime_error("Checkpoint::load: format version " +
                             std::to_string(ckpt.format_version) + " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ") in " + path.string());
  ckpt.spec = spec_from_json(j.at("spec"));
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.params = j.at("parameters").get<std::vector<double>>();
  if (ckpt.params.size() != ckpt.spec.parameter_count())
    throw std::runtime_error("Checkpoint::load: parameter count does not match spec in " +
                             path.string());
  return ckpt;
}

}  // namespace advaudit::nn
