#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advaudit/data.hpp"
#include "advaudit/nn.hpp"
#include "advaudit/softhist.hpp"
#include "advaudit/uncertainty.hpp"

namespace advaudit {

enum class AttackKind { kPgd, kCw };

const char* attack_kind_name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& s);

struct AttackConfig {
  AttackKind kind = AttackKind::kPgd;
  double step_size = 0.04;  // sigma units unless step_in_sigma_units is off
  int iterations = 20;
  double lambda_chi2 = 0.5;
  double lambda_prior = 0.5;  // lambda_Delta for PGD, lambda_prior for C&W
  int histogram_bins = 32;
  double bandwidth_fraction = 0.5;  // kernel bandwidth in units of bin width
  std::size_t batch_size = 512;
  bool step_in_sigma_units = true;
  // C&W hybrid objective
  double cw_kappa = 0.0;
  double cw_c_lo = 1e-2;
  double cw_c_hi = 1e2;
  int cw_search_steps = 8;
  int cw_inner_iterations = 50;
  double cw_inner_step = 0.01;  // gradient-descent step in z space
  std::uint64_t seed = 0;       // reserved; both attacks are deterministic

  void validate() const;
};

struct AttackResult {
  ad::Tensor x_adv;
  ad::Tensor z;                        // standardized deviations, 0 on masked entries
  std::vector<std::uint8_t> success;   // C&W: margin reached; PGD: decision flipped
  std::vector<double> objective;       // per-iteration objective trace (all batches)
};

/// Projected gradient ascent on L_CE - lambda_chi2 * chi2_soft - lambda_prior
/// * <z^2>, with the Gaussian step weight exp(-z^2/2) and per-step projection
/// onto the N_sigma envelope. chi2 histogram edges are frozen per batch from
/// the nominal values before iterating.
AttackResult pgd_attack(const nn::Checkpoint& ckpt, const Dataset& data,
                        const UncertaintyModel& unc, const AttackConfig& cfg);

/// Hybrid objective sum z^2 + c * max(kappa - s * logit, 0) + lambda_chi2 *
/// chi2_soft + lambda_prior * (mean z^2 + (mean z)^2), minimized by projected
/// gradient descent with a per-batch binary search over c. Events keep the
/// feasible iterate of smallest perturbation norm; events that never reach
/// the margin keep the final iterate of the largest-c branch.
AttackResult cw_attack(const nn::Checkpoint& ckpt, const Dataset& data,
                       const UncertaintyModel& unc, const AttackConfig& cfg);

double fooling_ratio(std::span<const double> nominal_scores,
                     std::span<const double> adversarial_scores);

/// Standalone soft-chi2 between two batches, matching the penalty inside the
/// attack objective (32-bin frozen nominal histograms, guard bins, mean over
/// perturbable features).
double chi2_soft(const Dataset& nominal, const Dataset& adversarial, const UncertaintyModel& unc,
                 const AttackConfig& cfg);

/// PGD prior: mean of z^2 over entries. C&W prior: mean z^2 + (mean z)^2.
double prior_loss(std::span<const double> z, AttackKind kind);

/// Frozen histogram spec for the differentiable chi2 penalty, built from a
/// nominal batch. Constant or fully masked features are skipped.
ad::SoftChi2Spec make_chi2_spec(const ad::Tensor& x_nominal, const UncertaintyModel& unc,
                                const AttackConfig& cfg, const std::vector<double>* row_mask);

}  // namespace advaudit
