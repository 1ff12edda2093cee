#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "advaudit/data.hpp"

namespace advaudit::bench {

/// Event-level benchmark: 12 kinematic columns separating a harder-spectrum,
/// higher-multiplicity signal category from a softer background category.
struct EventGenConfig {
  std::size_t events = 50000;
  double signal_fraction = 0.5;
  double sig_jet_pt_location = 4.70;  // log GeV
  double sig_jet_pt_scale = 0.40;
  double bkg_jet_pt_location = 4.32;
  double bkg_jet_pt_scale = 0.45;
  double sig_lep_pt_location = 3.81;
  double bkg_lep_pt_location = 3.69;
  double lep_pt_scale = 0.35;
  double sig_extra_jet_mean = 1.6;
  double bkg_extra_jet_mean = 0.55;
  double eta_width = 1.1;
  double eta_max = 2.5;
  double subleading_fraction_lo = 0.30;   // jet2_pt / jet1_pt lower bound
  double subleading_fraction_span = 0.55; // upper bound = lo + span
  double aux_smear = 0.05;                // resolution on the derived columns

  void validate() const;
};

/// Track-level benchmarks share one config; the task selects which fields
/// apply.
struct TrackGenConfig {
  std::size_t events = 20000;
  std::size_t max_tracks = 50;
  // quark-gluon tagging
  double quark_fraction = 0.5;
  double quark_track_mean = 3.0;   // extra tracks beyond the guaranteed one
  double gluon_track_mean = 8.0;
  double quark_angular_width = 0.10;
  double gluon_angular_width = 0.16;
  double quark_dirichlet_alpha = 0.4;  // pt sharing concentration
  double gluon_dirichlet_alpha = 1.2;
  double jet_pt_location = 4.38;       // log GeV, shared by both categories
  double jet_pt_scale = 0.35;
  double jet_eta_width = 1.0;
  double jet_eta_max = 2.2;
  double ip_spread = 5.0;              // d0/z0 spread, 0.1 mm units
  // missing transverse energy
  double met_location = 3.91;  // log GeV
  double met_scale = 0.60;
  double met_threshold = 60.0;
  double muon_smear = 6.0;
  double muon_z_spread = 30.0;
  double soft_track_mean = 14.0;
  double soft_xy_spread = 3.0;
  double soft_z_spread = 6.0;

  void validate() const;
};

enum class TrackTask { kQuarkGluon, kEtmiss };

const char* track_task_name(TrackTask t);

extern const std::vector<std::string> kEventFeatures;       // 12 columns
extern const std::vector<std::string> kQuarkGluonFeatures;  // pt eta phi charge d0 z0
extern const std::vector<std::string> kEtmissFeatures;      // px py pz d0

/// Deterministic in the seed; split tags are left as train for the caller's
/// splitter.
Dataset gen_event_table(const EventGenConfig& cfg, std::uint64_t seed);

/// Hidden truth behind the etmiss labels, exposed for label audits.
struct EtmissTruth {
  std::vector<double> px, py;
};

Dataset gen_track_sets(const TrackGenConfig& cfg, TrackTask task, std::uint64_t seed,
                       EtmissTruth* truth = nullptr);

// cut-based baselines; thresholds default to the published selections and
// all comparisons are strict
struct TtbarCuts {
  double min_jets = 2.0;  // pass requires n_jets > min_jets
  double jet1_pt = 60.0;
  double jet2_pt = 40.0;
};

bool cut_ttbar(double n_jets, double jet1_pt, double jet2_pt, const TtbarCuts& cuts = {});
std::vector<double> cut_ttbar_scores(const Dataset& events, const TtbarCuts& cuts = {});

/// pT-weighted mean angular distance from the jet axis (the axis is the
/// pT-weighted centroid of the jet's own tracks, phi handled modulo 2pi).
double girth(std::span<const double> pt, std::span<const double> eta,
             std::span<const double> phi);

/// sqrt(sum pt^2) / sum pt, in (0, 1]
double ptd(std::span<const double> pt);

struct QuarkGluonCuts {
  double max_tracks = 3.0;  // pass requires n_tracks <= max_tracks
  double ptd_max = 2.5;
  double girth_lo = 0.1;
  double girth_hi = 0.5;
};

bool cut_quark_gluon(std::size_t n_tracks, double ptd_value, double girth_value,
                     const QuarkGluonCuts& cuts = {});
std::vector<double> cut_quark_gluon_scores(const Dataset& jets, const QuarkGluonCuts& cuts = {});

/// Magnitude of -sum(px, py) over valid tracks plus the threshold label.
std::pair<double, bool> etmiss_baseline(std::span<const double> px, std::span<const double> py,
                                        double threshold = 60.0);
std::vector<double> etmiss_baseline_scores(const Dataset& events, double threshold = 60.0);

double wrap_phi(double phi);  // into (-pi, pi]

}  // namespace advaudit::bench
