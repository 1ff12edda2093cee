#include "advaudit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace advaudit {

const char* attack_kind_name(AttackKind k) { return k == AttackKind::kPgd ? "pgd" : "cw"; }

AttackKind attack_kind_from_name(const std::string& s) {
  if (s == "pgd") return AttackKind::kPgd;
  if (s == "cw") return AttackKind::kCw;
  throw std::invalid_argument("unknown attack kind '" + s + "'");
}

void AttackConfig::validate() const {
  if (!(step_size >= 0.0)) throw std::invalid_argument("AttackConfig: step_size must be >= 0");
  if (iterations < 1) throw std::invalid_argument("AttackConfig: iterations must be >= 1");
  if (lambda_chi2 < 0.0 || lambda_prior < 0.0)
    throw std::invalid_argument("AttackConfig: penalty weights must be >= 0");
  if (histogram_bins < 2) throw std::invalid_argument("AttackConfig: histogram_bins must be >= 2");
  if (!(bandwidth_fraction > 0.0))
    throw std::invalid_argument("AttackConfig: bandwidth_fraction must be positive");
  if (batch_size < 1) throw std::invalid_argument("AttackConfig: batch_size must be >= 1");
  if (!(cw_c_lo > 0.0) || !(cw_c_hi >= cw_c_lo))
    throw std::invalid_argument("AttackConfig: c search range must be positive and ordered");
  if (cw_search_steps < 1 || cw_inner_iterations < 1)
    throw std::invalid_argument("AttackConfig: C&W step counts must be >= 1");
  if (!(cw_inner_step > 0.0)) throw std::invalid_argument("AttackConfig: cw_inner_step must be positive");
  if (cw_kappa < 0.0) throw std::invalid_argument("AttackConfig: kappa must be >= 0");
}

double fooling_ratio(std::span<const double> nominal_scores,
                     std::span<const double> adversarial_scores) {
  if (nominal_scores.size() != adversarial_scores.size())
    throw std::invalid_argument("fooling_ratio: length mismatch");
  if (nominal_scores.empty()) throw std::invalid_argument("fooling_ratio: empty input");
  std::size_t flips = 0;
  for (std::size_t i = 0; i < nominal_scores.size(); ++i)
    if ((nominal_scores[i] > 0.5) != (adversarial_scores[i] > 0.5)) ++flips;
  return static_cast<double>(flips) / static_cast<double>(nominal_scores.size());
}

double prior_loss(std::span<const double> z, AttackKind kind) {
  if (z.empty()) throw std::invalid_argument("prior_loss: empty input");
  double sum = 0.0, sum2 = 0.0;
  for (double v : z) {
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(z.size());
  const double mean_sq = sum2 / n;
  if (kind == AttackKind::kPgd) return mean_sq;
  const double mean = sum / n;
  return mean_sq + mean * mean;
}

ad::SoftChi2Spec make_chi2_spec(const ad::Tensor& x_nominal, const UncertaintyModel& unc,
                                const AttackConfig& cfg, const std::vector<double>* row_mask) {
  ad::SoftChi2Spec spec;
  if (row_mask) spec.row_weight = *row_mask;
  const std::size_t bins = static_cast<std::size_t>(cfg.histogram_bins);
  std::vector<double> column(x_nominal.rows());
  for (std::size_t c = 0; c < x_nominal.cols(); ++c) {
    if (!unc.perturbable(c)) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < x_nominal.rows(); ++r) {
      column[r] = x_nominal.at(r, c);
      if (row_mask && (*row_mask)[r] == 0.0) continue;
      lo = std::min(lo, column[r]);
      hi = std::max(hi, column[r]);
    }
    if (!(hi > lo)) continue;  // constant column, nothing to bin
    ad::SoftChi2Spec::Feature f;
    f.column = c;
    const double width = (hi - lo) / static_cast<double>(bins);
    f.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) f.edges[i] = lo + width * static_cast<double>(i);
    f.bandwidth = cfg.bandwidth_fraction * width;
    f.nominal_mass = soft_histogram_weighted(column, spec.row_weight, f.edges, f.bandwidth);
    spec.features.push_back(std::move(f));
  }
  return spec;
}

double chi2_soft(const Dataset& nominal, const Dataset& adversarial, const UncertaintyModel& unc,
                 const AttackConfig& cfg) {
  if (!nominal.schema_equals(adversarial) || !nominal.x.same_shape(adversarial.x))
    throw std::invalid_argument("chi2_soft: schema mismatch");
  if (nominal.examples() == 0) throw std::invalid_argument("chi2_soft: empty batch");
  const std::vector<double>* mask = nominal.has_mask() ? &nominal.mask : nullptr;
  const ad::SoftChi2Spec spec = make_chi2_spec(nominal.x, unc, cfg, mask);
  if (spec.features.empty()) return 0.0;
  std::vector<double> column(adversarial.x.rows());
  double total = 0.0;
  for (const auto& f : spec.features) {
    for (std::size_t r = 0; r < adversarial.x.rows(); ++r) column[r] = adversarial.x.at(r, f.column);
    const auto masses = soft_histogram_weighted(column, spec.row_weight, f.edges, f.bandwidth);
    for (std::size_t b = 0; b < masses.size(); ++b) {
      const double d = masses[b] - f.nominal_mass[b];
      total += d * d / (f.nominal_mass[b] + 1.0);
    }
  }
  return total / static_cast<double>(spec.features.size());
}

namespace {

struct BatchSlice {
  std::size_t example_begin = 0;
  std::size_t example_end = 0;
  ad::Tensor x_nom;
  ad::Tensor y;                    // [n, 1]
  std::vector<double> row_mask;    // empty for event data
  std::vector<int> labels;
};

BatchSlice slice_batch(const Dataset& data, std::size_t begin, std::size_t end) {
  BatchSlice s;
  s.example_begin = begin;
  s.example_end = end;
  const std::size_t g = data.group;
  const std::size_t cols = data.x.cols();
  s.x_nom = ad::Tensor({(end - begin) * g, cols});
  for (std::size_t r = 0; r < s.x_nom.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) s.x_nom.at(r, c) = data.x.at(begin * g + r, c);
  s.y = ad::Tensor({end - begin, 1});
  s.labels.resize(end - begin);
  for (std::size_t e = begin; e < end; ++e) {
    s.y[e - begin] = static_cast<double>(data.labels[e]);
    s.labels[e - begin] = data.labels[e];
  }
  if (data.has_mask())
    s.row_mask.assign(data.mask.begin() + static_cast<std::ptrdiff_t>(begin * g),
                      data.mask.begin() + static_cast<std::ptrdiff_t>(end * g));
  return s;
}

struct PenaltyNodes {
  int z = -1;
  int chi2 = -1;   // -1 when the term is absent
  int prior = -1;
};

// z = (x - x_nom) * invsigma and the two statistical penalties
PenaltyNodes emit_penalties(ad::Graph& g, int x, const BatchSlice& batch, const ad::Tensor& sig,
                            const UncertaintyModel& unc, const AttackConfig& cfg, AttackKind kind) {
  PenaltyNodes out;
  ad::Tensor neg_nom(batch.x_nom.shape());
  ad::Tensor inv_sigma(batch.x_nom.shape());
  std::size_t n_unmasked = 0;
  for (std::size_t i = 0; i < batch.x_nom.size(); ++i) {
    neg_nom[i] = -batch.x_nom[i];
    if (sig[i] > 0.0) {
      inv_sigma[i] = 1.0 / sig[i];
      ++n_unmasked;
    }
  }
  out.z = g.mul(g.add(x, g.constant(std::move(neg_nom))), g.constant(std::move(inv_sigma)));
  if (n_unmasked == 0) return out;

  if (cfg.lambda_chi2 > 0.0) {
    ad::SoftChi2Spec spec = make_chi2_spec(batch.x_nom, unc, cfg,
                                           batch.row_mask.empty() ? nullptr : &batch.row_mask);
    if (!spec.features.empty()) out.chi2 = g.soft_chi2(x, std::move(spec));
  }

  const double inv_n = 1.0 / static_cast<double>(n_unmasked);
  const int mean_z2 = g.mul(g.sum(g.square(out.z)), g.constant(ad::Tensor::scalar(inv_n)));
  if (kind == AttackKind::kPgd) {
    out.prior = mean_z2;
  } else {
    const int mean_z = g.mul(g.sum(out.z), g.constant(ad::Tensor::scalar(inv_n)));
    out.prior = g.add(mean_z2, g.square(mean_z));
  }
  return out;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite_grad(const ad::Tensor& g, const char* attack, int iteration) {
  if (!g.all_finite())
    throw std::runtime_error(std::string(attack) + ": non-finite gradient at iteration " +
                             std::to_string(iteration));
}

std::vector<std::uint8_t> decision_flips(const nn::Checkpoint& ckpt, const Dataset& data,
                                         const ad::Tensor& x_adv) {
  const std::vector<double>* mask = data.has_mask() ? &data.mask : nullptr;
  const std::vector<double> ln = nn::logits_matrix(ckpt, data.x, mask);
  const std::vector<double> la = nn::logits_matrix(ckpt, x_adv, mask);
  std::vector<std::uint8_t> flips(ln.size(), 0);
  for (std::size_t i = 0; i < ln.size(); ++i) flips[i] = (ln[i] > 0.0) != (la[i] > 0.0) ? 1 : 0;
  return flips;
}

}  // namespace

AttackResult pgd_attack(const nn::Checkpoint& ckpt, const Dataset& data,
                        const UncertaintyModel& unc, const AttackConfig& cfg) {
  cfg.validate();
  data.check_consistent();
  unc.validate(data.features());

  AttackResult result;
  result.x_adv = data.x;
  const std::vector<double>* full_mask = data.has_mask() ? &data.mask : nullptr;

  const std::size_t n = data.examples();
  for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
    const std::size_t end = std::min(n, begin + cfg.batch_size);
    BatchSlice batch = slice_batch(data, begin, end);
    const std::vector<double>* row_mask = batch.row_mask.empty() ? nullptr : &batch.row_mask;
    const ad::Tensor sig = sigma(batch.x_nom, unc, row_mask);

    ad::Graph g;
    nn::EmittedModel model = nn::emit_model(g, ckpt.spec, nn::EmitOptions{.input_grad = true});
    const int x = g.leaf_id("x");
    const int y = g.constant(batch.y);
    int loss = g.mean(g.bce_with_logits(model.logits, y));
    const PenaltyNodes pen = emit_penalties(g, x, batch, sig, unc, cfg, AttackKind::kPgd);
    if (pen.chi2 >= 0)
      loss = g.add(loss, g.mul(pen.chi2, g.constant(ad::Tensor::scalar(-cfg.lambda_chi2))));
    if (pen.prior >= 0 && cfg.lambda_prior > 0.0)
      loss = g.add(loss, g.mul(pen.prior, g.constant(ad::Tensor::scalar(-cfg.lambda_prior))));

    ad::Bindings bindings;
    nn::bind_params_for_emitted(model, ckpt.params, bindings);
    if (row_mask) {
      ad::Tensor m({batch.row_mask.size()});
      std::copy(batch.row_mask.begin(), batch.row_mask.end(), m.data().begin());
      bindings["mask"] = std::move(m);
    }

    ad::Tensor x_cur = batch.x_nom;
    ad::Evaluation eval(g);
    for (int it = 0; it < cfg.iterations; ++it) {
      bindings["x"] = x_cur;
      const double objective = eval.forward(bindings, loss).item();
      if (!std::isfinite(objective))
        throw std::runtime_error("pgd_attack: non-finite objective at iteration " +
                                 std::to_string(it));
      result.objective.push_back(objective);
      if (cfg.step_size == 0.0) continue;

      eval.backward(loss);
      const ad::Tensor& grad = eval.grad(x);
      check_finite_grad(grad, "pgd_attack", it);

      for (std::size_t i = 0; i < x_cur.size(); ++i) {
        if (sig[i] == 0.0) continue;
        const double z = (x_cur[i] - batch.x_nom[i]) / sig[i];
        const double w = std::exp(-0.5 * z * z);
        const double direction = sign_of(grad[i]);
        const double scale = cfg.step_in_sigma_units ? sig[i] : 1.0;
        x_cur[i] += cfg.step_size * scale * w * direction;
      }
      project(x_cur, batch.x_nom, unc, row_mask);
    }

    for (std::size_t r = 0; r < x_cur.rows(); ++r)
      for (std::size_t c = 0; c < x_cur.cols(); ++c)
        result.x_adv.at(begin * data.group + r, c) = x_cur.at(r, c);
  }

  result.z = standardize(result.x_adv, data.x, unc, full_mask).z;
  result.success = decision_flips(ckpt, data, result.x_adv);
  return result;
}

AttackResult cw_attack(const nn::Checkpoint& ckpt, const Dataset& data,
                       const UncertaintyModel& unc, const AttackConfig& cfg) {
  cfg.validate();
  data.check_consistent();
  unc.validate(data.features());

  AttackResult result;
  result.x_adv = data.x;
  result.success.assign(data.examples(), 0);
  const std::vector<double>* full_mask = data.has_mask() ? &data.mask : nullptr;

  const std::size_t n = data.examples();
  const std::size_t g_rows = data.group;
  for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
    const std::size_t end = std::min(n, begin + cfg.batch_size);
    const std::size_t nb = end - begin;
    BatchSlice batch = slice_batch(data, begin, end);
    const std::vector<double>* row_mask = batch.row_mask.empty() ? nullptr : &batch.row_mask;
    const ad::Tensor sig = sigma(batch.x_nom, unc, row_mask);

    // adversarial push direction: s = -1 for signal rows, +1 for background,
    // so f = 0 means "classified as the wrong class with margin kappa"
    std::vector<double> s_dir(nb);
    for (std::size_t e = 0; e < nb; ++e) s_dir[e] = batch.labels[e] == 1 ? -1.0 : 1.0;

    ad::Graph g;
    nn::EmittedModel model = nn::emit_model(g, ckpt.spec, nn::EmitOptions{.input_grad = true});
    const int x = g.leaf_id("x");
    const PenaltyNodes pen = emit_penalties(g, x, batch, sig, unc, cfg, AttackKind::kCw);

    ad::Tensor neg_s({nb, 1});
    for (std::size_t e = 0; e < nb; ++e) neg_s[e] = -s_dir[e];
    const int margin_in =
        g.add(g.constant(ad::Tensor::full({nb, 1}, cfg.cw_kappa)), g.mul(model.logits, g.constant(neg_s)));
    const int f_elem = g.relu(margin_in);
    const int c_leaf = g.leaf("c", false);
    int loss = g.add(g.sum(g.square(pen.z)), g.mul(c_leaf, g.sum(f_elem)));
    if (pen.chi2 >= 0)
      loss = g.add(loss, g.mul(pen.chi2, g.constant(ad::Tensor::scalar(cfg.lambda_chi2))));
    if (pen.prior >= 0 && cfg.lambda_prior > 0.0)
      loss = g.add(loss, g.mul(pen.prior, g.constant(ad::Tensor::scalar(cfg.lambda_prior))));

    ad::Bindings bindings;
    nn::bind_params_for_emitted(model, ckpt.params, bindings);
    if (row_mask) {
      ad::Tensor m({batch.row_mask.size()});
      std::copy(batch.row_mask.begin(), batch.row_mask.end(), m.data().begin());
      bindings["mask"] = std::move(m);
    }

    const std::size_t cols = batch.x_nom.cols();
    std::vector<double> best_norm(nb, std::numeric_limits<double>::infinity());
    ad::Tensor best_x = batch.x_nom;
    ad::Tensor fallback_x = batch.x_nom;
    double largest_c = -1.0;

    // per-event norm and feasibility of the iterate currently held in eval
    const auto score_iterate = [&](ad::Evaluation& eval, const ad::Tensor& x_cur) {
      const ad::Tensor& lg = eval.value(model.logits);
      for (std::size_t e = 0; e < nb; ++e) {
        const bool feasible = s_dir[e] * lg[e] >= cfg.cw_kappa;
        if (!feasible) continue;
        double norm = 0.0;
        for (std::size_t t = 0; t < g_rows; ++t) {
          const std::size_t r = e * g_rows + t;
          for (std::size_t c = 0; c < cols; ++c) {
            if (sig.at(r, c) == 0.0) continue;
            const double z = (x_cur.at(r, c) - batch.x_nom.at(r, c)) / sig.at(r, c);
            norm += z * z;
          }
        }
        if (norm < best_norm[e]) {
          best_norm[e] = norm;
          for (std::size_t t = 0; t < g_rows; ++t) {
            const std::size_t r = e * g_rows + t;
            for (std::size_t c = 0; c < cols; ++c) best_x.at(r, c) = x_cur.at(r, c);
          }
        }
      }
    };

    double c_lo = cfg.cw_c_lo, c_hi = cfg.cw_c_hi;
    ad::Evaluation eval(g);
    for (int branch = 0; branch < cfg.cw_search_steps; ++branch) {
      const double c = std::sqrt(c_lo * c_hi);
      bindings["c"] = ad::Tensor::scalar(c);
      ad::Tensor x_cur = batch.x_nom;

      for (int it = 0; it < cfg.cw_inner_iterations; ++it) {
        bindings["x"] = x_cur;
        const double objective = eval.forward(bindings, loss).item();
        if (!std::isfinite(objective))
          throw std::runtime_error("cw_attack: non-finite objective at iteration " +
                                   std::to_string(it));
        result.objective.push_back(objective);
        score_iterate(eval, x_cur);

        eval.backward(loss);
        const ad::Tensor& grad = eval.grad(x);
        check_finite_grad(grad, "cw_attack", it);
        // gradient descent in z space: x <- x - eta * sigma^2 * dL/dx
        for (std::size_t i = 0; i < x_cur.size(); ++i) {
          if (sig[i] == 0.0) continue;
          x_cur[i] -= cfg.cw_inner_step * sig[i] * sig[i] * grad[i];
        }
        project(x_cur, batch.x_nom, unc, row_mask);
      }

      // final iterate of the branch
      bindings["x"] = x_cur;
      eval.forward(bindings, loss);
      score_iterate(eval, x_cur);
      const ad::Tensor& lg = eval.value(model.logits);
      std::size_t feasible = 0;
      for (std::size_t e = 0; e < nb; ++e)
        if (s_dir[e] * lg[e] >= cfg.cw_kappa) ++feasible;

      if (c > largest_c) {
        largest_c = c;
        fallback_x = x_cur;
      }
      // batch-level search: a branch that fools at least half the batch can
      // afford a smaller margin weight
      if (static_cast<double>(feasible) >= 0.5 * static_cast<double>(nb))
        c_hi = c;
      else
        c_lo = c;
    }

    for (std::size_t e = 0; e < nb; ++e) {
      const bool found = std::isfinite(best_norm[e]);
      result.success[begin + e] = found ? 1 : 0;
      const ad::Tensor& src = found ? best_x : fallback_x;
      for (std::size_t t = 0; t < g_rows; ++t) {
        const std::size_t r = e * g_rows + t;
        for (std::size_t c = 0; c < cols; ++c)
          result.x_adv.at((begin + e) * g_rows + t, c) = src.at(r, c);
      }
    }
  }

  result.z = standardize(result.x_adv, data.x, unc, full_mask).z;
  return result;
}

}  // namespace advaudit
