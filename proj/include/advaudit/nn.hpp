#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advaudit/data.hpp"
#include "advaudit/graph.hpp"

namespace advaudit::nn {

inline constexpr int kCheckpointVersion = 1;

enum class Family { kDense, kPooledSet };

const char* family_name(Family f);
Family family_from_name(const std::string& s);

struct ModelSpec {
  Family family = Family::kDense;
  int input_features = 0;
  std::vector<int> hidden = {64, 64, 32};  // dense body
  double dropout = 0.0;
  // pooled-set: per-track embedding -> masked mean pool -> head -> 1 logit
  std::vector<int> embed = {32, 32};
  std::vector<int> head = {32};
  std::size_t group_size = 1;  // padded tracks per example

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const ModelSpec&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int max_epochs = 40;
  int patience = 6;  // epochs without validation improvement
  std::uint64_t seed = 1;

  void validate() const;
};

struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> params;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Scaled uniform fan-in initialization, deterministic in the seed.
Checkpoint init(const ModelSpec& spec, std::uint64_t seed);

/// Model subgraph emitted onto an existing graph; used by training,
/// inference, and the attack objectives.
struct EmitOptions {
  bool input_grad = false;
  bool param_grad = false;
  bool train_dropout = false;  // adds per-layer dropout-mask leaves
};

struct ModelGraph {
  ad::Graph graph;
  int logits = -1;
  int loss = -1;  // mean BCE over the batch; -1 when not emitted
  std::vector<std::string> param_names;          // binding order
  std::vector<std::pair<std::size_t, ad::Shape>> param_slices;
  std::vector<std::string> dropout_names;        // one per hidden activation
  std::vector<std::size_t> dropout_widths;
};

struct EmittedModel {
  int logits = -1;
  std::vector<std::string> param_names;
  std::vector<std::pair<std::size_t, ad::Shape>> param_slices;
  std::vector<std::string> dropout_names;
  std::vector<std::size_t> dropout_widths;
};

/// Appends the model onto `g`, reading input leaf "x" (and "mask" for the
/// pooled family). Returns the logits node, one per example.
EmittedModel emit_model(ad::Graph& g, const ModelSpec& spec, const EmitOptions& opt);

ModelGraph build_model_graph(const ModelSpec& spec, const EmitOptions& opt, bool with_loss);

void bind_params(const ModelGraph& mg, const std::vector<double>& flat, ad::Bindings& b);
void bind_params_for_emitted(const EmittedModel& em, const std::vector<double>& flat,
                             ad::Bindings& b);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best-epoch parameters
  std::vector<EpochStats> history;
  int best_epoch = -1;    // 0-based index into history
};

/// Adam + early stopping on the validation loss; restores best-epoch
/// parameters. Reproducible for identical (data, config, seed).
TrainResult train(const Checkpoint& start, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

std::vector<double> logits(const Checkpoint& ckpt, const Dataset& data);
std::vector<double> predict(const Checkpoint& ckpt, const Dataset& data);

std::vector<double> logits_matrix(const Checkpoint& ckpt, const ad::Tensor& x,
                                  const std::vector<double>* mask);

/// Nominal-vs-adversarial discrimination task: label 1 marks adversarial
/// rows, classes are pooled, and the result is shuffled and re-split 80/10/10
/// with the seed-controlled splitter.
Dataset build_indistinguishability_task(const Dataset& nominal, const Dataset& adversarial,
                                        std::uint64_t seed);

/// Seeded shuffle split; fractions must sum to 1.
void assign_splits(Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

}  // namespace advaudit::nn
