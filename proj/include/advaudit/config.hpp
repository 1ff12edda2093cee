#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advaudit/attacks.hpp"
#include "advaudit/bench.hpp"
#include "advaudit/nn.hpp"
#include "advaudit/uncertainty.hpp"

namespace advaudit {

enum class Task { kEvent, kQuarkGluon, kEtmiss };

const char* task_name(Task t);
Task task_from_name(const std::string& s);

/// Indistinguishability gates applied by the audit. The chi2 gate compares
/// the nominal distribution of one event half against the adversarial
/// distribution of the other half, so compatible samples sit at chi2/ndf ~ 1
/// and coherent distortions push the statistic above the window.
struct ValidationConfig {
  std::size_t chi2_bins = 32;
  double aux_auc_lo = 0.47;
  double aux_auc_hi = 0.53;
  double chi2_lo = 0.5;
  double chi2_hi = 2.0;
  double pearson_max = 0.02;
  double z_mean_max = 0.05;
  double z_skew_max = 0.3;

  void validate() const;
};

struct RunConfig {
  Task task = Task::kEvent;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  std::string output_dir;  // empty -> $ADVAUDIT_OUT or ./runs

  bench::EventGenConfig event_gen;
  bench::TrackGenConfig track_gen;
  nn::ModelSpec model;
  nn::TrainConfig train;
  UncertaintySpec uncertainty;
  AttackConfig attack;
  ValidationConfig validation;

  static RunConfig defaults(Task t);
  void validate() const;
  const std::vector<std::string>& feature_names() const;
  std::size_t example_count() const;
};

/// Strict INI-style parser; unknown sections or keys are hard errors.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin);

/// Canonical flat dump of every field; two configs hash equal iff their
/// canonical dumps match.
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

std::filesystem::path resolve_output_dir(const RunConfig& cfg);

}  // namespace advaudit
