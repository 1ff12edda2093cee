#include "advaudit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "advaudit/io.hpp"
#include "advaudit/metrics.hpp"
#include "advaudit/report.hpp"
#include "advaudit/rng.hpp"

namespace advaudit {

namespace {

const char* dataset_extension(Task t) { return t == Task::kEvent ? ".csv" : ".jsonl"; }

Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed) {
  Dataset ds;
  switch (cfg.task) {
    case Task::kEvent:
      ds = bench::gen_event_table(cfg.event_gen, seed);
      break;
    case Task::kQuarkGluon:
      ds = bench::gen_track_sets(cfg.track_gen, bench::TrackTask::kQuarkGluon, seed);
      break;
    case Task::kEtmiss:
      ds = bench::gen_track_sets(cfg.track_gen, bench::TrackTask::kEtmiss, seed);
      break;
  }
  nn::assign_splits(ds, cfg.split_train, cfg.split_val, cfg.split_test, seed);
  return ds;
}

Dataset load_dataset(const RunConfig& cfg, const std::filesystem::path& path) {
  if (cfg.task == Task::kEvent) return io::read_event_csv(path);
  return io::read_track_jsonl(path, cfg.track_gen.max_tracks);
}

void save_dataset(const RunConfig& cfg, const Dataset& ds, const std::filesystem::path& path) {
  if (cfg.task == Task::kEvent)
    io::write_event_csv(ds, path);
  else
    io::write_track_jsonl(ds, path);
}

nn::Checkpoint train_tagged(const RunConfig& cfg, const Dataset& train_set, const Dataset& val_set,
                            std::uint64_t seed, const std::string& tag) {
  const nn::Checkpoint start = nn::init(cfg.model, derive_seed(seed, "init-" + tag));
  nn::TrainConfig tcfg = cfg.train;
  tcfg.seed = derive_seed(seed, "train-" + tag);
  return nn::train(start, train_set, val_set, tcfg).checkpoint;
}

std::vector<double> baseline_scores(const RunConfig& cfg, const Dataset& ds) {
  switch (cfg.task) {
    case Task::kEvent: return bench::cut_ttbar_scores(ds);
    case Task::kQuarkGluon: return bench::cut_quark_gluon_scores(ds);
    case Task::kEtmiss: return bench::etmiss_baseline_scores(ds, cfg.track_gen.met_threshold);
  }
  throw std::logic_error("unreachable");
}

AttackResult run_attack(const RunConfig& cfg, const nn::Checkpoint& model, const Dataset& nominal,
                        const UncertaintyModel& unc) {
  if (cfg.attack.kind == AttackKind::kPgd) return pgd_attack(model, nominal, unc, cfg.attack);
  return cw_attack(model, nominal, unc, cfg.attack);
}

}  // namespace

std::filesystem::path run_dir(const RunConfig& cfg) {
  return resolve_output_dir(cfg) / config_hash_hex(cfg);
}

std::filesystem::path seed_dir(const RunConfig& cfg, std::uint64_t seed) {
  return run_dir(cfg) / ("seed" + std::to_string(seed));
}

SeedContext::SeedContext(const RunConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), dir_(seed_dir(cfg, seed)) {
  std::filesystem::create_directories(dir_);
  unc_ = resolve_uncertainty(cfg.uncertainty, cfg.feature_names());
}

std::filesystem::path SeedContext::dataset_path(const char* stem) const {
  return dir_ / (std::string(stem) + dataset_extension(cfg_.task));
}

bool SeedContext::dataset_on_disk() const {
  return std::filesystem::exists(dataset_path("nominal"));
}

const Dataset& SeedContext::nominal() {
  if (!nominal_) {
    const auto path = dataset_path("nominal");
    if (std::filesystem::exists(path)) {
      nominal_ = load_dataset(cfg_, path);
    } else {
      nominal_ = generate_dataset(cfg_, seed_);
      save_dataset(cfg_, *nominal_, path);
    }
  }
  return *nominal_;
}

const nn::Checkpoint& SeedContext::nominal_model() {
  if (!model_) {
    const auto path = dir_ / "model_nominal.json";
    if (std::filesystem::exists(path)) {
      model_ = nn::Checkpoint::load(path);
    } else {
      const Dataset& ds = nominal();
      model_ = train_tagged(cfg_, ds.subset(Split::kTrain), ds.subset(Split::kVal), seed_,
                            "nominal");
      model_->save(path);
    }
  }
  return *model_;
}

const Dataset& SeedContext::adversarial() {
  if (!adversarial_) {
    const auto path = dataset_path("adversarial");
    if (std::filesystem::exists(path)) {
      adversarial_ = load_dataset(cfg_, path);
    } else {
      const Dataset& nom = nominal();
      const AttackResult attack = run_attack(cfg_, nominal_model(), nom, unc_);
      Dataset adv = nom;  // splits, labels and masks are inherited
      adv.x = attack.x_adv;
      save_dataset(cfg_, adv, path);
      io::write_z_sidecar(adv, attack.z, dir_ / (std::string("z") + (cfg_.task == Task::kEvent
                                                                         ? ".csv"
                                                                         : ".jsonl")));
      adversarial_ = std::move(adv);
    }
  }
  return *adversarial_;
}

double validate_indistinguishability(const Dataset& nominal, const Dataset& adversarial,
                                     const nn::ModelSpec& spec, const nn::TrainConfig& tcfg,
                                     std::uint64_t seed) {
  const Dataset task = nn::build_indistinguishability_task(nominal, adversarial, seed);
  const nn::Checkpoint start = nn::init(spec, derive_seed(seed, "init-aux"));
  nn::TrainConfig t = tcfg;
  t.seed = derive_seed(seed, "train-aux");
  const nn::TrainResult trained = nn::train(start, task.subset(Split::kTrain),
                                            task.subset(Split::kVal), t);
  const Dataset test = task.subset(Split::kTest);
  const std::vector<double> scores = nn::predict(trained.checkpoint, test);
  return roc_auc(scores, test.labels).auc;
}

RetrainResult retrain_strategies(const Dataset& nominal, const Dataset& adversarial,
                                 const nn::ModelSpec& spec, const nn::TrainConfig& tcfg,
                                 std::uint64_t seed, const nn::Checkpoint* nominal_trained) {
  if (!nominal.schema_equals(adversarial) || nominal.split != adversarial.split)
    throw std::invalid_argument("retrain_strategies: datasets must be paired split-for-split");

  const auto train_one = [&](const Dataset& tr, const Dataset& va, const std::string& tag) {
    const nn::Checkpoint start = nn::init(spec, derive_seed(seed, "init-" + tag));
    nn::TrainConfig t = tcfg;
    t.seed = derive_seed(seed, "train-" + tag);
    return nn::train(start, tr, va, t).checkpoint;
  };

  RetrainResult out;
  if (nominal_trained)
    out.nominal_only = *nominal_trained;
  else
    out.nominal_only = train_one(nominal.subset(Split::kTrain), nominal.subset(Split::kVal),
                                 "nominal");
  out.adversarial_only = train_one(adversarial.subset(Split::kTrain),
                                   adversarial.subset(Split::kVal), "adversarial");
  out.combined = train_one(
      concat_datasets(nominal.subset(Split::kTrain), adversarial.subset(Split::kTrain)),
      concat_datasets(nominal.subset(Split::kVal), adversarial.subset(Split::kVal)), "combined");
  return out;
}

ValidationSummary validate_seed(const RunConfig& cfg, const Dataset& nominal,
                                const Dataset& adversarial, std::uint64_t seed) {
  const UncertaintyModel unc = resolve_uncertainty(cfg.uncertainty, cfg.feature_names());
  const std::vector<double>* mask = nominal.has_mask() ? &nominal.mask : nullptr;
  const ValidationConfig& vc = cfg.validation;

  ValidationSummary out;

  const Deviation dev = standardize(adversarial.x, nominal.x, unc, mask);
  const std::vector<double> zvals = unmasked_z(dev, unc, mask);
  const ZStats zs = z_stats(zvals);
  out.z_mean = zs.mean;
  out.z_std = zs.stddev;
  out.z_skewness = zs.skewness;

  // chi2 gate on disjoint event halves: nominal rows of even-indexed events
  // against adversarial rows of odd-indexed events, so the no-distortion
  // reference is the independent-draw level chi2/ndf ~ 1
  out.chi2_min = std::numeric_limits<double>::infinity();
  out.chi2_max = -std::numeric_limits<double>::infinity();
  std::vector<double> coln, cola;
  for (std::size_t c = 0; c < nominal.x.cols(); ++c) {
    if (!unc.perturbable(c)) continue;
    coln.clear();
    cola.clear();
    for (std::size_t e = 0; e < nominal.examples(); ++e) {
      const bool even = e % 2 == 0;
      for (std::size_t t = 0; t < nominal.group; ++t) {
        const std::size_t r = e * nominal.group + t;
        if (mask && (*mask)[r] == 0.0) continue;
        if (even)
          coln.push_back(nominal.x.at(r, c));
        else
          cola.push_back(adversarial.x.at(r, c));
      }
    }
    const double chi2 = hist_chi2_hard_column(coln, cola, vc.chi2_bins);
    out.chi2_per_feature[cfg.feature_names()[c]] = chi2;
    out.chi2_min = std::min(out.chi2_min, chi2);
    out.chi2_max = std::max(out.chi2_max, chi2);
  }

  const PearsonDelta pd = pearson_delta(nominal.x, adversarial.x, mask);
  out.pearson_delta_max = pd.max_abs_delta;

  out.aux_auc = validate_indistinguishability(nominal, adversarial, cfg.model, cfg.train,
                                              derive_seed(seed, "indistinguishability"));

  out.chi2_ok = out.chi2_min >= vc.chi2_lo && out.chi2_max <= vc.chi2_hi;
  out.pearson_ok = out.pearson_delta_max < vc.pearson_max;
  out.z_mean_ok = std::abs(out.z_mean) < vc.z_mean_max;
  out.z_skew_ok = std::abs(out.z_skewness) < vc.z_skew_max;
  return out;
}

namespace {

struct EvalBlock {
  double auc = 0.0;
  double efficiency = 0.0;
  double threshold = 0.0;
};

EvalBlock evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                          double target_rejection) {
  EvalBlock b;
  b.auc = roc_auc(scores, labels).auc;
  const WorkingPoint wp = efficiency_at_rejection(scores, labels, target_rejection);
  b.efficiency = wp.efficiency;
  b.threshold = wp.threshold;
  return b;
}

nlohmann::ordered_json eval_json(const EvalBlock& b) {
  return {{"auc", b.auc}, {"efficiency", b.efficiency}, {"threshold", b.threshold}};
}

nlohmann::ordered_json model_block(const nn::Checkpoint& model, const Dataset& nom_test,
                                   const Dataset& adv_test, double target_rejection) {
  const std::vector<double> s_nom = nn::predict(model, nom_test);
  const std::vector<double> s_adv = nn::predict(model, adv_test);
  const EvalBlock nom = evaluate_scores(s_nom, nom_test.labels, target_rejection);
  const EvalBlock adv = evaluate_scores(s_adv, adv_test.labels, target_rejection);
  return {{"nominal", eval_json(nom)},
          {"adversarial", eval_json(adv)},
          {"auc_difference", nom.auc - adv.auc},
          {"efficiency_difference", nom.efficiency - adv.efficiency}};
}

nlohmann::ordered_json config_echo(const RunConfig& cfg) {
  nlohmann::ordered_json obj = nlohmann::ordered_json::object();
  std::istringstream lines(canonical_config(cfg));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) obj[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return obj;
}

}  // namespace

nlohmann::ordered_json run_seed_audit(const RunConfig& cfg, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SeedContext ctx(cfg, seed);

  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["complete"] = true;
  j["diagnostic"] = "";

  const Dataset& nominal = ctx.nominal();
  const nn::Checkpoint& model = ctx.nominal_model();
  const Dataset& adversarial = ctx.adversarial();

  if (nominal.split != adversarial.split)
    throw std::runtime_error("audit: adversarial split tags do not pair with nominal");

  const ValidationSummary val = validate_seed(cfg, nominal, adversarial, seed);

  const auto test_idx = nominal.indices_of(Split::kTest);
  const Dataset nom_test = nominal.select(test_idx);
  const Dataset adv_test = adversarial.select(test_idx);

  // cut baseline fixes the working point for every neural evaluation
  const std::vector<double> base_nom = baseline_scores(cfg, nom_test);
  const std::vector<double> base_adv = baseline_scores(cfg, adv_test);
  const BinaryPerformance perf_nom = binary_performance(base_nom, nom_test.labels);
  const BinaryPerformance perf_adv = binary_performance(base_adv, adv_test.labels);
  const double target_rejection = perf_nom.background_rejection;

  j["working_point_rejection"] = target_rejection;
  j["baseline"] = {
      {"nominal",
       {{"auc", roc_auc(base_nom, nom_test.labels).auc},
        {"efficiency", perf_nom.signal_efficiency},
        {"background_rejection", perf_nom.background_rejection}}},
      {"adversarial",
       {{"auc", roc_auc(base_adv, adv_test.labels).auc},
        {"efficiency", perf_adv.signal_efficiency},
        {"background_rejection", perf_adv.background_rejection}}},
  };
  j["baseline"]["auc_difference"] = j["baseline"]["nominal"]["auc"].get<double>() -
                                    j["baseline"]["adversarial"]["auc"].get<double>();
  j["baseline"]["efficiency_difference"] =
      perf_nom.signal_efficiency - perf_adv.signal_efficiency;

  // nominal-trained model and the retraining strategies
  const RetrainResult retrained =
      retrain_strategies(nominal, adversarial, cfg.model, cfg.train, seed, &model);

  j["models"] = nlohmann::ordered_json::object();
  j["models"]["nominal"] = model_block(model, nom_test, adv_test, target_rejection);
  j["models"]["adversarial"] =
      model_block(retrained.adversarial_only, nom_test, adv_test, target_rejection);
  j["models"]["combined"] = model_block(retrained.combined, nom_test, adv_test, target_rejection);

  // fooling + boundary concentration on the test split
  const std::vector<double> s_nom = nn::predict(model, nom_test);
  const std::vector<double> s_adv = nn::predict(model, adv_test);
  j["fooling_ratio"] = fooling_ratio(s_nom, s_adv);

  std::vector<double> dist_all, dist_fooled;
  std::vector<io::ScoreRow> rows;
  for (std::size_t i = 0; i < s_nom.size(); ++i) {
    dist_all.push_back(std::abs(s_nom[i] - 0.5));
    if ((s_nom[i] > 0.5) != (s_adv[i] > 0.5)) dist_fooled.push_back(std::abs(s_nom[i] - 0.5));
    rows.push_back({test_idx[i], nom_test.labels[i], s_nom[i], s_adv[i]});
  }
  j["boundary_rank_p"] =
      dist_fooled.empty() ? 1.0 : rank_test_less(dist_fooled, dist_all);
  io::write_scores_csv(rows, ctx.dir() / "scores_test.csv");
  retrained.adversarial_only.save(ctx.dir() / "model_adversarial.json");
  retrained.combined.save(ctx.dir() / "model_combined.json");

  j["validation"] = {{"aux_auc", val.aux_auc},
                     {"chi2_ndf", val.chi2_per_feature},
                     {"chi2_ndf_min", val.chi2_min},
                     {"chi2_ndf_max", val.chi2_max},
                     {"pearson_delta_max", val.pearson_delta_max},
                     {"z_mean", val.z_mean},
                     {"z_std", val.z_std},
                     {"z_skewness", val.z_skewness},
                     {"gates",
                      {{"chi2", val.chi2_ok},
                       {"pearson", val.pearson_ok},
                       {"z_mean", val.z_mean_ok},
                       {"z_skewness", val.z_skew_ok}}}};

  const std::string ext = dataset_extension(cfg.task);
  j["artifacts"] = {{"nominal", "seed" + std::to_string(seed) + "/nominal" + ext},
                    {"adversarial", "seed" + std::to_string(seed) + "/adversarial" + ext},
                    {"z_sidecar", "seed" + std::to_string(seed) + "/z" +
                                      std::string(cfg.task == Task::kEvent ? ".csv" : ".jsonl")},
                    {"scores", "seed" + std::to_string(seed) + "/scores_test.csv"},
                    {"model_nominal", "seed" + std::to_string(seed) + "/model_nominal.json"},
                    {"model_adversarial",
                     "seed" + std::to_string(seed) + "/model_adversarial.json"},
                    {"model_combined", "seed" + std::to_string(seed) + "/model_combined.json"}};

  const auto t1 = std::chrono::steady_clock::now();
  j["timing"] = {{"elapsed_seconds",
                  std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0}};
  return j;
}

AuditOutcome run_audit(const RunConfig& cfg, int jobs) {
  cfg.validate();
  const auto dir = run_dir(cfg);
  std::filesystem::create_directories(dir);

  std::vector<nlohmann::ordered_json> seed_results(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      const std::uint64_t seed = cfg.seeds[i];
      try {
        seed_results[i] = run_seed_audit(cfg, seed);
      } catch (const std::exception& ex) {
        seed_results[i] = {{"seed", seed}, {"complete", false}, {"diagnostic", ex.what()}};
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // aggregate mean +- rms over complete seeds
  static const std::vector<std::vector<std::string>> kMetricPaths = {
      {"baseline", "nominal", "auc"},
      {"baseline", "adversarial", "auc"},
      {"baseline", "auc_difference"},
      {"baseline", "nominal", "efficiency"},
      {"baseline", "adversarial", "efficiency"},
      {"baseline", "efficiency_difference"},
      {"models", "nominal", "nominal", "auc"},
      {"models", "nominal", "adversarial", "auc"},
      {"models", "nominal", "auc_difference"},
      {"models", "nominal", "nominal", "efficiency"},
      {"models", "nominal", "adversarial", "efficiency"},
      {"models", "nominal", "efficiency_difference"},
      {"models", "adversarial", "nominal", "auc"},
      {"models", "adversarial", "adversarial", "auc"},
      {"models", "adversarial", "auc_difference"},
      {"models", "adversarial", "nominal", "efficiency"},
      {"models", "adversarial", "adversarial", "efficiency"},
      {"models", "adversarial", "efficiency_difference"},
      {"models", "combined", "nominal", "auc"},
      {"models", "combined", "adversarial", "auc"},
      {"models", "combined", "auc_difference"},
      {"models", "combined", "nominal", "efficiency"},
      {"models", "combined", "adversarial", "efficiency"},
      {"models", "combined", "efficiency_difference"},
      {"fooling_ratio"},
      {"boundary_rank_p"},
      {"working_point_rejection"},
      {"validation", "aux_auc"},
      {"validation", "chi2_ndf_min"},
      {"validation", "chi2_ndf_max"},
      {"validation", "pearson_delta_max"},
      {"validation", "z_mean"},
      {"validation", "z_std"},
      {"validation", "z_skewness"},
  };

  nlohmann::ordered_json aggregate;
  aggregate["seeds_used"] = nlohmann::ordered_json::array();
  std::vector<const nlohmann::ordered_json*> complete;
  for (const auto& s : seed_results)
    if (s["complete"].get<bool>()) {
      complete.push_back(&s);
      aggregate["seeds_used"].push_back(s["seed"]);
    }

  aggregate["metrics"] = nlohmann::ordered_json::object();
  for (const auto& path : kMetricPaths) {
    std::vector<double> values;
    for (const auto* s : complete) {
      const nlohmann::ordered_json* node = s;
      for (const auto& key : path) node = &(*node)[key];
      values.push_back(node->get<double>());
    }
    if (values.empty()) continue;
    std::string name;
    for (const auto& key : path) {
      if (!name.empty()) name += ".";
      name += key;
    }
    aggregate["metrics"][name] = {{"mean", mean_of(values)}, {"rms", rms_of(values)}};
  }

  // gates: aux-classifier AUC on the seed mean, the rest per seed
  const ValidationConfig& vc = cfg.validation;
  const bool all_complete = complete.size() == seed_results.size();
  bool chi2_ok = all_complete, pearson_ok = all_complete, z_mean_ok = all_complete,
       z_skew_ok = all_complete;
  for (const auto* s : complete) {
    const auto& gates = (*s)["validation"]["gates"];
    chi2_ok = chi2_ok && gates["chi2"].get<bool>();
    pearson_ok = pearson_ok && gates["pearson"].get<bool>();
    z_mean_ok = z_mean_ok && gates["z_mean"].get<bool>();
    z_skew_ok = z_skew_ok && gates["z_skewness"].get<bool>();
  }
  bool aux_ok = false;
  if (!complete.empty()) {
    const double aux_mean = aggregate["metrics"]["validation.aux_auc"]["mean"].get<double>();
    aux_ok = aux_mean >= vc.aux_auc_lo && aux_mean <= vc.aux_auc_hi;
  }

  nlohmann::ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = "advaudit";
  report["task"] = task_name(cfg.task);
  report["config_hash"] = config_hash_hex(cfg);
  report["created_utc"] = utc_timestamp();
  report["config"] = config_echo(cfg);
  report["seeds"] = seed_results;
  report["aggregate"] = aggregate;
  report["gates"] = {{"all_seeds_complete", all_complete},
                     {"aux_auc", aux_ok},
                     {"chi2", chi2_ok},
                     {"pearson", pearson_ok},
                     {"z_mean", z_mean_ok},
                     {"z_skewness", z_skew_ok}};
  const bool gates_passed =
      all_complete && aux_ok && chi2_ok && pearson_ok && z_mean_ok && z_skew_ok;
  report["gates_passed"] = gates_passed;

  AuditOutcome outcome;
  outcome.report_path = dir / "report.json";
  emit_report(report, outcome.report_path);
  outcome.report = std::move(report);
  outcome.gates_passed = gates_passed;
  outcome.all_complete = all_complete;
  return outcome;
}

}  // namespace advaudit
