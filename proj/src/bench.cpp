#include "advaudit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advaudit/rng.hpp"

namespace advaudit::bench {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string("generator config: ") + what +
                                              " must be positive");
}
}  // namespace

double wrap_phi(double phi) {
  double w = std::remainder(phi, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w = kPi;
  return w;
}

const std::vector<std::string> kEventFeatures = {
    "lep_pt", "lep_eta", "lep_phi", "jet1_pt", "jet1_eta", "jet1_phi",
    "jet2_pt", "jet2_eta", "jet2_phi", "n_jets", "m_jj", "ht"};

const std::vector<std::string> kQuarkGluonFeatures = {"pt", "eta", "phi", "charge", "d0", "z0"};

const std::vector<std::string> kEtmissFeatures = {"px", "py", "pz", "d0"};

const char* track_task_name(TrackTask t) {
  return t == TrackTask::kQuarkGluon ? "quark_gluon" : "etmiss";
}

void EventGenConfig::validate() const {
  if (events == 0) throw std::invalid_argument("generator config: events must be positive");
  if (!(signal_fraction > 0.0 && signal_fraction < 1.0))
    throw std::invalid_argument("generator config: signal_fraction must be in (0, 1)");
  require_positive(sig_jet_pt_scale, "sig_jet_pt_scale");
  require_positive(bkg_jet_pt_scale, "bkg_jet_pt_scale");
  require_positive(lep_pt_scale, "lep_pt_scale");
  require_positive(eta_width, "eta_width");
  require_positive(eta_max, "eta_max");
  require_positive(subleading_fraction_span, "subleading_fraction_span");
  require_positive(aux_smear, "aux_smear");
  if (!(subleading_fraction_lo > 0.0) ||
      subleading_fraction_lo + subleading_fraction_span >= 1.0)
    throw std::invalid_argument("generator config: subleading fraction window must sit inside (0, 1)");
  if (sig_extra_jet_mean < 0.0 || bkg_extra_jet_mean < 0.0)
    throw std::invalid_argument("generator config: extra jet means must be >= 0");
}

void TrackGenConfig::validate() const {
  if (events == 0) throw std::invalid_argument("generator config: events must be positive");
  if (max_tracks == 0) throw std::invalid_argument("generator config: max_tracks must be positive");
  if (!(quark_fraction > 0.0 && quark_fraction < 1.0))
    throw std::invalid_argument("generator config: quark_fraction must be in (0, 1)");
  require_positive(quark_angular_width, "quark_angular_width");
  require_positive(gluon_angular_width, "gluon_angular_width");
  require_positive(quark_dirichlet_alpha, "quark_dirichlet_alpha");
  require_positive(gluon_dirichlet_alpha, "gluon_dirichlet_alpha");
  require_positive(jet_pt_scale, "jet_pt_scale");
  require_positive(jet_eta_width, "jet_eta_width");
  require_positive(ip_spread, "ip_spread");
  require_positive(met_scale, "met_scale");
  require_positive(met_threshold, "met_threshold");
  require_positive(muon_smear, "muon_smear");
  require_positive(muon_z_spread, "muon_z_spread");
  require_positive(soft_xy_spread, "soft_xy_spread");
  require_positive(soft_z_spread, "soft_z_spread");
  if (quark_track_mean < 0.0 || gluon_track_mean < 0.0 || soft_track_mean < 0.0)
    throw std::invalid_argument("generator config: track multiplicity means must be >= 0");
}

Dataset gen_event_table(const EventGenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RandomStream rng(derive_seed(seed, "event-gen"));

  Dataset ds;
  ds.feature_names = kEventFeatures;
  ds.group = 1;
  ds.x = ad::Tensor({cfg.events, kEventFeatures.size()});
  ds.labels.resize(cfg.events);
  ds.split.assign(cfg.events, Split::kTrain);

  for (std::size_t e = 0; e < cfg.events; ++e) {
    const bool signal = rng.uniform() < cfg.signal_fraction;
    const double jet_loc = signal ? cfg.sig_jet_pt_location : cfg.bkg_jet_pt_location;
    const double jet_scale = signal ? cfg.sig_jet_pt_scale : cfg.bkg_jet_pt_scale;
    const double lep_loc = signal ? cfg.sig_lep_pt_location : cfg.bkg_lep_pt_location;
    const double extra_mean = signal ? cfg.sig_extra_jet_mean : cfg.bkg_extra_jet_mean;

    const double lep_pt = rng.lognormal(lep_loc, cfg.lep_pt_scale);
    const double lep_eta = rng.truncated_normal(0.0, cfg.eta_width, cfg.eta_max);
    const double lep_phi = rng.uniform_phi();

    const double jet1_pt = rng.lognormal(jet_loc, jet_scale);
    // jet2 keeps a guaranteed gap below jet1, so the leading-jet ordering can
    // never be inverted by in-envelope perturbations
    const double u = 1.0 / (1.0 + std::exp(-rng.normal(0.2, 0.9)));
    const double jet2_pt = jet1_pt * (cfg.subleading_fraction_lo + cfg.subleading_fraction_span * u);
    const double jet1_eta = rng.truncated_normal(0.0, cfg.eta_width, cfg.eta_max);
    const double jet1_phi = rng.uniform_phi();
    const double jet2_eta = rng.truncated_normal(0.0, cfg.eta_width, cfg.eta_max);
    const double jet2_phi = rng.uniform_phi();

    const int n_extra = rng.poisson(extra_mean);
    const double n_jets = 2.0 + static_cast<double>(n_extra);

    // derived columns carry their own resolution so they are not an exact
    // function of the other features
    const double mjj_core = std::sqrt(std::max(
        2.0 * jet1_pt * jet2_pt * (std::cosh(jet1_eta - jet2_eta) - std::cos(jet1_phi - jet2_phi)),
        1e-12));
    const double m_jj = mjj_core * std::max(1.0 + cfg.aux_smear * rng.normal(), 1e-3);
    const double ht_core = lep_pt + jet1_pt + jet2_pt + 15.0 * static_cast<double>(n_extra);
    const double ht = ht_core * std::max(1.0 + cfg.aux_smear * rng.normal(), 1e-3);

    double* row = ds.x.data().data() + e * kEventFeatures.size();
    row[0] = lep_pt;
    row[1] = lep_eta;
    row[2] = lep_phi;
    row[3] = jet1_pt;
    row[4] = jet1_eta;
    row[5] = jet1_phi;
    row[6] = jet2_pt;
    row[7] = jet2_eta;
    row[8] = jet2_phi;
    row[9] = n_jets;
    row[10] = m_jj;
    row[11] = ht;
    ds.labels[e] = signal ? 1 : 0;
  }
  return ds;
}

namespace {

struct JetDraw {
  std::vector<double> pt, deta, dphi;
};

// pt sharing via a symmetric Dirichlet; lower alpha concentrates pt in fewer
// tracks (the quark-like pattern)
JetDraw draw_jet(RandomStream& rng, std::size_t n_tracks, double total_pt, double alpha,
                 double angular_width) {
  JetDraw jet;
  jet.pt.resize(n_tracks);
  jet.deta.resize(n_tracks);
  jet.dphi.resize(n_tracks);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_tracks; ++i) {
    jet.pt[i] = rng.gamma(alpha);
    sum += jet.pt[i];
  }
  for (std::size_t i = 0; i < n_tracks; ++i) {
    jet.pt[i] = total_pt * jet.pt[i] / sum;
    jet.deta[i] = rng.normal(0.0, angular_width);
    jet.dphi[i] = rng.normal(0.0, angular_width);
  }
  return jet;
}

}  // namespace

Dataset gen_track_sets(const TrackGenConfig& cfg, TrackTask task, std::uint64_t seed,
                       EtmissTruth* truth) {
  cfg.validate();
  RandomStream rng(derive_seed(seed, task == TrackTask::kQuarkGluon ? "qg-gen" : "etmiss-gen"));

  Dataset ds;
  ds.feature_names = task == TrackTask::kQuarkGluon ? kQuarkGluonFeatures : kEtmissFeatures;
  ds.group = cfg.max_tracks;
  const std::size_t cols = ds.feature_names.size();
  ds.x = ad::Tensor({cfg.events * cfg.max_tracks, cols});
  ds.mask.assign(cfg.events * cfg.max_tracks, 0.0);
  ds.labels.resize(cfg.events);
  ds.split.assign(cfg.events, Split::kTrain);
  if (truth) {
    truth->px.assign(task == TrackTask::kEtmiss ? cfg.events : 0, 0.0);
    truth->py.assign(task == TrackTask::kEtmiss ? cfg.events : 0, 0.0);
  }

  struct Track {
    double f[6];
    double sort_key;
  };
  std::vector<Track> tracks;

  for (std::size_t e = 0; e < cfg.events; ++e) {
    tracks.clear();
    int label = 0;

    if (task == TrackTask::kQuarkGluon) {
      const bool quark = rng.uniform() < cfg.quark_fraction;
      label = quark ? 1 : 0;
      const double mean = quark ? cfg.quark_track_mean : cfg.gluon_track_mean;
      std::size_t n = 1 + static_cast<std::size_t>(rng.poisson(mean));
      n = std::min(n, cfg.max_tracks);
      const double total_pt = rng.lognormal(cfg.jet_pt_location, cfg.jet_pt_scale);
      const double width = quark ? cfg.quark_angular_width : cfg.gluon_angular_width;
      const double alpha = quark ? cfg.quark_dirichlet_alpha : cfg.gluon_dirichlet_alpha;
      const double jet_eta = rng.truncated_normal(0.0, cfg.jet_eta_width, cfg.jet_eta_max);
      const double jet_phi = rng.uniform_phi();
      const JetDraw jet = draw_jet(rng, n, total_pt, alpha, width);
      for (std::size_t i = 0; i < n; ++i) {
        Track t{};
        t.f[0] = jet.pt[i];
        t.f[1] = jet_eta + jet.deta[i];
        t.f[2] = wrap_phi(jet_phi + jet.dphi[i]);
        t.f[3] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        t.f[4] = rng.normal(0.0, cfg.ip_spread);
        t.f[5] = rng.normal(0.0, cfg.ip_spread);
        t.sort_key = t.f[0];
        tracks.push_back(t);
      }
    } else {
      const double met = rng.lognormal(cfg.met_location, cfg.met_scale);
      const double dir = rng.uniform_phi();
      const double nu_x = met * std::cos(dir);
      const double nu_y = met * std::sin(dir);
      label = met > cfg.met_threshold ? 1 : 0;
      if (truth) {
        truth->px[e] = nu_x;
        truth->py[e] = nu_y;
      }
      Track muon{};
      muon.f[0] = -nu_x + rng.normal(0.0, cfg.muon_smear);
      muon.f[1] = -nu_y + rng.normal(0.0, cfg.muon_smear);
      muon.f[2] = rng.normal(0.0, cfg.muon_z_spread);
      muon.f[3] = rng.normal(0.0, cfg.ip_spread);
      muon.sort_key = std::hypot(muon.f[0], muon.f[1]);
      tracks.push_back(muon);
      std::size_t n_soft = static_cast<std::size_t>(rng.poisson(cfg.soft_track_mean));
      n_soft = std::min(n_soft, cfg.max_tracks - 1);
      for (std::size_t i = 0; i < n_soft; ++i) {
        Track t{};
        t.f[0] = rng.normal(0.0, cfg.soft_xy_spread);
        t.f[1] = rng.normal(0.0, cfg.soft_xy_spread);
        t.f[2] = rng.normal(0.0, cfg.soft_z_spread);
        t.f[3] = rng.normal(0.0, cfg.ip_spread);
        t.sort_key = std::hypot(t.f[0], t.f[1]);
        tracks.push_back(t);
      }
    }

    std::stable_sort(tracks.begin(), tracks.end(),
                     [](const Track& a, const Track& b) { return a.sort_key > b.sort_key; });

    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const std::size_t r = e * cfg.max_tracks + i;
      ds.mask[r] = 1.0;
      for (std::size_t c = 0; c < cols; ++c) ds.x.at(r, c) = tracks[i].f[c];
    }
    ds.labels[e] = label;
  }
  return ds;
}

bool cut_ttbar(double n_jets, double jet1_pt, double jet2_pt, const TtbarCuts& cuts) {
  return n_jets > cuts.min_jets && jet1_pt > cuts.jet1_pt && jet2_pt > cuts.jet2_pt;
}

std::vector<double> cut_ttbar_scores(const Dataset& events, const TtbarCuts& cuts) {
  const int jn = feature_index(events.feature_names, "n_jets");
  const int j1 = feature_index(events.feature_names, "jet1_pt");
  const int j2 = feature_index(events.feature_names, "jet2_pt");
  std::vector<double> out(events.examples());
  for (std::size_t e = 0; e < events.examples(); ++e)
    out[e] = cut_ttbar(events.x.at(e, static_cast<std::size_t>(jn)),
                       events.x.at(e, static_cast<std::size_t>(j1)),
                       events.x.at(e, static_cast<std::size_t>(j2)), cuts)
                 ? 1.0
                 : 0.0;
  return out;
}

double girth(std::span<const double> pt, std::span<const double> eta,
             std::span<const double> phi) {
  if (pt.empty() || pt.size() != eta.size() || pt.size() != phi.size())
    throw std::invalid_argument("girth: need equal-length, non-empty track arrays");
  double total = 0.0;
  std::size_t lead = 0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    total += pt[i];
    if (pt[i] > pt[lead]) lead = i;
  }
  if (!(total > 0.0)) throw std::domain_error("girth: total track pt is zero");
  // pT-weighted centroid; phi is averaged relative to the leading track so the
  // wrap at +-pi cannot split the jet
  const double ref = phi[lead];
  double axis_eta = 0.0, axis_dphi = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    axis_eta += pt[i] * eta[i];
    axis_dphi += pt[i] * wrap_phi(phi[i] - ref);
  }
  axis_eta /= total;
  axis_dphi /= total;
  double g = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    const double de = eta[i] - axis_eta;
    const double dp = wrap_phi(wrap_phi(phi[i] - ref) - axis_dphi);
    g += pt[i] * std::sqrt(de * de + dp * dp);
  }
  return g / total;
}

double ptd(std::span<const double> pt) {
  if (pt.empty()) throw std::invalid_argument("ptd: need at least one track");
  double sum = 0.0, sum2 = 0.0;
  for (double v : pt) {
    sum += v;
    sum2 += v * v;
  }
  if (!(sum > 0.0)) throw std::domain_error("ptd: total track pt is zero");
  return std::sqrt(sum2) / sum;
}

bool cut_quark_gluon(std::size_t n_tracks, double ptd_value, double girth_value,
                     const QuarkGluonCuts& cuts) {
  // the girth disjunction is redundant as published; kept verbatim
  return static_cast<double>(n_tracks) <= cuts.max_tracks && ptd_value < cuts.ptd_max &&
         (girth_value > cuts.girth_lo || girth_value > cuts.girth_hi);
}

std::vector<double> cut_quark_gluon_scores(const Dataset& jets, const QuarkGluonCuts& cuts) {
  const auto ipt = static_cast<std::size_t>(feature_index(jets.feature_names, "pt"));
  const auto ieta = static_cast<std::size_t>(feature_index(jets.feature_names, "eta"));
  const auto iphi = static_cast<std::size_t>(feature_index(jets.feature_names, "phi"));
  std::vector<double> out(jets.examples());
  std::vector<double> pt, eta, phi;
  for (std::size_t e = 0; e < jets.examples(); ++e) {
    pt.clear();
    eta.clear();
    phi.clear();
    for (std::size_t t = 0; t < jets.group; ++t) {
      const std::size_t r = e * jets.group + t;
      if (jets.mask[r] == 0.0) continue;
      pt.push_back(jets.x.at(r, ipt));
      eta.push_back(jets.x.at(r, ieta));
      phi.push_back(jets.x.at(r, iphi));
    }
    out[e] = cut_quark_gluon(pt.size(), ptd(pt), girth(pt, eta, phi), cuts) ? 1.0 : 0.0;
  }
  return out;
}

std::pair<double, bool> etmiss_baseline(std::span<const double> px, std::span<const double> py,
                                        double threshold) {
  if (px.size() != py.size()) throw std::invalid_argument("etmiss_baseline: length mismatch");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    sx += px[i];
    sy += py[i];
  }
  const double mag = std::hypot(-sx, -sy);
  return {mag, mag > threshold};
}

std::vector<double> etmiss_baseline_scores(const Dataset& events, double threshold) {
  const auto ipx = static_cast<std::size_t>(feature_index(events.feature_names, "px"));
  const auto ipy = static_cast<std::size_t>(feature_index(events.feature_names, "py"));
  std::vector<double> out(events.examples());
  std::vector<double> px, py;
  for (std::size_t e = 0; e < events.examples(); ++e) {
    px.clear();
    py.clear();
    for (std::size_t t = 0; t < events.group; ++t) {
      const std::size_t r = e * events.group + t;
      if (events.mask[r] == 0.0) continue;
      px.push_back(events.x.at(r, ipx));
      py.push_back(events.x.at(r, ipy));
    }
    out[e] = etmiss_baseline(px, py, threshold).second ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace advaudit::bench
