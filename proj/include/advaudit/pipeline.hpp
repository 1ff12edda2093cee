#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "advaudit/attacks.hpp"
#include "advaudit/config.hpp"
#include "advaudit/data.hpp"
#include "advaudit/nn.hpp"

namespace advaudit {

std::filesystem::path run_dir(const RunConfig& cfg);
std::filesystem::path seed_dir(const RunConfig& cfg, std::uint64_t seed);

/// Lazy per-seed stage cache. Every stage is deterministic, loads its artifact
/// from the content-addressed directory when present and computes + persists
/// it otherwise, so CLI stages and the full audit share one code path.
class SeedContext {
 public:
  SeedContext(const RunConfig& cfg, std::uint64_t seed);

  const std::filesystem::path& dir() const { return dir_; }
  std::uint64_t seed() const { return seed_; }

  const Dataset& nominal();
  const nn::Checkpoint& nominal_model();
  const Dataset& adversarial();
  const UncertaintyModel& uncertainty() const { return unc_; }

  bool dataset_on_disk() const;

 private:
  std::filesystem::path dataset_path(const char* stem) const;

  const RunConfig& cfg_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  UncertaintyModel unc_;
  std::optional<Dataset> nominal_;
  std::optional<nn::Checkpoint> model_;
  std::optional<Dataset> adversarial_;
};

/// Auxiliary-classifier gate: trains a fresh model of the given architecture
/// on the nominal-vs-adversarial task (classes pooled) and returns its test
/// AUC.
double validate_indistinguishability(const Dataset& nominal, const Dataset& adversarial,
                                     const nn::ModelSpec& spec, const nn::TrainConfig& tcfg,
                                     std::uint64_t seed);

struct RetrainResult {
  nn::Checkpoint nominal_only;
  nn::Checkpoint adversarial_only;
  nn::Checkpoint combined;
};

/// The three training strategies; combined concatenates the two training
/// splits so every event appears once nominal and once perturbed. A
/// pre-trained nominal checkpoint may be passed to avoid retraining it.
RetrainResult retrain_strategies(const Dataset& nominal, const Dataset& adversarial,
                                 const nn::ModelSpec& spec, const nn::TrainConfig& tcfg,
                                 std::uint64_t seed,
                                 const nn::Checkpoint* nominal_trained = nullptr);

/// Indistinguishability measurements + gate evaluation for one seed.
struct ValidationSummary {
  double aux_auc = 0.0;
  std::map<std::string, double> chi2_per_feature;
  double chi2_min = 0.0;
  double chi2_max = 0.0;
  double pearson_delta_max = 0.0;
  double z_mean = 0.0;
  double z_std = 0.0;
  double z_skewness = 0.0;
  bool chi2_ok = false;
  bool pearson_ok = false;
  bool z_mean_ok = false;
  bool z_skew_ok = false;
};

ValidationSummary validate_seed(const RunConfig& cfg, const Dataset& nominal,
                                const Dataset& adversarial, std::uint64_t seed);

nlohmann::ordered_json run_seed_audit(const RunConfig& cfg, std::uint64_t seed);

struct AuditOutcome {
  nlohmann::ordered_json report;
  std::filesystem::path report_path;
  bool gates_passed = false;
  bool all_complete = false;
};

/// The full workflow per seed (generate, train, attack, validate, evaluate,
/// retrain), aggregated as mean +- rms over seeds. Seeds are independent jobs
/// and may run in parallel without changing the result.
AuditOutcome run_audit(const RunConfig& cfg, int jobs = 1);

}  // namespace advaudit
