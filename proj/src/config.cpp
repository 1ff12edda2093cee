#include "advaudit/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "advaudit/io.hpp"

namespace advaudit {

const char* task_name(Task t) {
  switch (t) {
    case Task::kEvent: return "event";
    case Task::kQuarkGluon: return "quark_gluon";
    case Task::kEtmiss: return "etmiss";
  }
  return "?";
}

Task task_from_name(const std::string& s) {
  if (s == "event") return Task::kEvent;
  if (s == "quark_gluon") return Task::kQuarkGluon;
  if (s == "etmiss") return Task::kEtmiss;
  throw std::invalid_argument("unknown task '" + s + "'");
}

void ValidationConfig::validate() const {
  if (chi2_bins < 2) throw std::invalid_argument("ValidationConfig: chi2_bins must be >= 2");
  if (!(aux_auc_lo < aux_auc_hi) || !(chi2_lo < chi2_hi))
    throw std::invalid_argument("ValidationConfig: gate windows must be ordered");
}

const std::vector<std::string>& RunConfig::feature_names() const {
  switch (task) {
    case Task::kEvent: return bench::kEventFeatures;
    case Task::kQuarkGluon: return bench::kQuarkGluonFeatures;
    case Task::kEtmiss: return bench::kEtmissFeatures;
  }
  throw std::logic_error("unreachable");
}

std::size_t RunConfig::example_count() const {
  return task == Task::kEvent ? event_gen.events : track_gen.events;
}

void RunConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("RunConfig: need at least one seed");
  if (std::abs(split_train + split_val + split_test - 1.0) > 1e-9)
    throw std::invalid_argument("RunConfig: split fractions must sum to 1");
  if (task == Task::kEvent)
    event_gen.validate();
  else
    track_gen.validate();
  model.validate();
  train.validate();
  attack.validate();
  validation.validate();
  resolve_uncertainty(uncertainty, feature_names());  // throws on unknown names
}

RunConfig RunConfig::defaults(Task t) {
  RunConfig cfg;
  cfg.task = t;
  switch (t) {
    case Task::kEvent: {
      cfg.model.family = nn::Family::kDense;
      cfg.model.input_features = 12;
      cfg.model.hidden = {64, 64, 32};
      cfg.model.dropout = 0.1;
      cfg.model.group_size = 1;
      cfg.attack.step_size = 0.04;
      cfg.attack.iterations = 20;
      cfg.uncertainty.widths = {{"lep_pt", 0.02},   {"lep_eta", 0.001}, {"lep_phi", 0.001},
                                {"jet1_pt", 0.02},  {"jet1_eta", 0.001}, {"jet1_phi", 0.001},
                                {"jet2_pt", 0.02},  {"jet2_eta", 0.001}, {"jet2_phi", 0.001},
                                {"m_jj", 0.02},     {"ht", 0.02}};
      cfg.uncertainty.masked = {"n_jets"};
      break;
    }
    case Task::kQuarkGluon: {
      cfg.model.family = nn::Family::kPooledSet;
      cfg.model.input_features = 6;
      cfg.model.dropout = 0.1;
      cfg.model.group_size = 50;
      cfg.attack.step_size = 0.04;
      cfg.attack.iterations = 20;
      cfg.uncertainty.widths = {{"pt", 0.02}, {"eta", 0.001}, {"phi", 0.001},
                                {"d0", 0.005}, {"z0", 0.005}};
      cfg.uncertainty.masked = {"charge"};
      break;
    }
    case Task::kEtmiss: {
      cfg.model.family = nn::Family::kPooledSet;
      cfg.model.input_features = 4;
      cfg.model.dropout = 0.1;
      cfg.model.group_size = 50;
      cfg.attack.step_size = 0.02;
      cfg.attack.iterations = 15;
      cfg.uncertainty.widths = {{"px", 0.04}, {"py", 0.001}, {"pz", 0.04}, {"d0", 0.002}};
      cfg.uncertainty.masked = {};
      break;
    }
  }
  return cfg;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("ADVAUDIT_OUT"); env && *env) return env;
  return "runs";
}

namespace {

struct FieldRef {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
  return v;
}

long long to_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("malformed integer '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("malformed boolean '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(cell.substr(b, e - b + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

template <typename Get, typename Set>
FieldRef make_field(Get get, Set set) {
  return FieldRef{
      [get](const RunConfig& c) { return get(c); },
      [set](RunConfig& c, const std::string& v) { set(c, v); },
  };
}

#define DBL_FIELD(expr)                                                        \
  make_field([](const RunConfig& c) { return io::format_double(c.expr); },    \
             [](RunConfig& c, const std::string& v) { c.expr = to_double(v); })
#define INT_FIELD(expr, type)                                                  \
  make_field([](const RunConfig& c) { return std::to_string(c.expr); },        \
             [](RunConfig& c, const std::string& v) { c.expr = static_cast<type>(to_int(v)); })
#define BOOL_FIELD(expr)                                                       \
  make_field([](const RunConfig& c) { return c.expr ? std::string("true") : std::string("false"); }, \
             [](RunConfig& c, const std::string& v) { c.expr = to_bool(v); })
#define INTLIST_FIELD(expr)                                                    \
  make_field(                                                                  \
      [](const RunConfig& c) {                                                 \
        std::vector<std::string> parts;                                        \
        for (int w : c.expr) parts.push_back(std::to_string(w));               \
        return join(parts);                                                    \
      },                                                                       \
      [](RunConfig& c, const std::string& v) {                                 \
        c.expr.clear();                                                        \
        for (const auto& p : split_list(v)) c.expr.push_back(static_cast<int>(to_int(p))); \
      })

// ordered so the canonical dump is stable
std::vector<std::pair<std::string, FieldRef>> field_table(Task task) {
  std::vector<std::pair<std::string, FieldRef>> t;
  t.emplace_back("run.task",
                 make_field([](const RunConfig& c) { return std::string(task_name(c.task)); },
                            [](RunConfig&, const std::string&) { /* handled in a pre-pass */ }));
  t.emplace_back("run.seeds",
                 make_field(
                     [](const RunConfig& c) {
                       std::vector<std::string> parts;
                       for (auto s : c.seeds) parts.push_back(std::to_string(s));
                       return join(parts);
                     },
                     [](RunConfig& c, const std::string& v) {
                       c.seeds.clear();
                       for (const auto& p : split_list(v))
                         c.seeds.push_back(static_cast<std::uint64_t>(to_int(p)));
                     }));
  t.emplace_back("run.split_fractions",
                 make_field(
                     [](const RunConfig& c) {
                       return io::format_double(c.split_train) + "," +
                              io::format_double(c.split_val) + "," +
                              io::format_double(c.split_test);
                     },
                     [](RunConfig& c, const std::string& v) {
                       const auto parts = split_list(v);
                       if (parts.size() != 3)
                         throw std::invalid_argument("split_fractions needs 3 values");
                       c.split_train = to_double(parts[0]);
                       c.split_val = to_double(parts[1]);
                       c.split_test = to_double(parts[2]);
                     }));

  if (task == Task::kEvent) {
    t.emplace_back("generator.events", INT_FIELD(event_gen.events, std::size_t));
    t.emplace_back("generator.signal_fraction", DBL_FIELD(event_gen.signal_fraction));
    t.emplace_back("generator.sig_jet_pt_location", DBL_FIELD(event_gen.sig_jet_pt_location));
    t.emplace_back("generator.sig_jet_pt_scale", DBL_FIELD(event_gen.sig_jet_pt_scale));
    t.emplace_back("generator.bkg_jet_pt_location", DBL_FIELD(event_gen.bkg_jet_pt_location));
    t.emplace_back("generator.bkg_jet_pt_scale", DBL_FIELD(event_gen.bkg_jet_pt_scale));
    t.emplace_back("generator.sig_lep_pt_location", DBL_FIELD(event_gen.sig_lep_pt_location));
    t.emplace_back("generator.bkg_lep_pt_location", DBL_FIELD(event_gen.bkg_lep_pt_location));
    t.emplace_back("generator.lep_pt_scale", DBL_FIELD(event_gen.lep_pt_scale));
    t.emplace_back("generator.sig_extra_jet_mean", DBL_FIELD(event_gen.sig_extra_jet_mean));
    t.emplace_back("generator.bkg_extra_jet_mean", DBL_FIELD(event_gen.bkg_extra_jet_mean));
    t.emplace_back("generator.eta_width", DBL_FIELD(event_gen.eta_width));
    t.emplace_back("generator.eta_max", DBL_FIELD(event_gen.eta_max));
    t.emplace_back("generator.subleading_fraction_lo", DBL_FIELD(event_gen.subleading_fraction_lo));
    t.emplace_back("generator.subleading_fraction_span",
                   DBL_FIELD(event_gen.subleading_fraction_span));
    t.emplace_back("generator.aux_smear", DBL_FIELD(event_gen.aux_smear));
  } else {
    t.emplace_back("generator.events", INT_FIELD(track_gen.events, std::size_t));
    t.emplace_back("generator.max_tracks", INT_FIELD(track_gen.max_tracks, std::size_t));
    if (task == Task::kQuarkGluon) {
      t.emplace_back("generator.quark_fraction", DBL_FIELD(track_gen.quark_fraction));
      t.emplace_back("generator.quark_track_mean", DBL_FIELD(track_gen.quark_track_mean));
      t.emplace_back("generator.gluon_track_mean", DBL_FIELD(track_gen.gluon_track_mean));
      t.emplace_back("generator.quark_angular_width", DBL_FIELD(track_gen.quark_angular_width));
      t.emplace_back("generator.gluon_angular_width", DBL_FIELD(track_gen.gluon_angular_width));
      t.emplace_back("generator.quark_dirichlet_alpha", DBL_FIELD(track_gen.quark_dirichlet_alpha));
      t.emplace_back("generator.gluon_dirichlet_alpha", DBL_FIELD(track_gen.gluon_dirichlet_alpha));
      t.emplace_back("generator.jet_pt_location", DBL_FIELD(track_gen.jet_pt_location));
      t.emplace_back("generator.jet_pt_scale", DBL_FIELD(track_gen.jet_pt_scale));
      t.emplace_back("generator.jet_eta_width", DBL_FIELD(track_gen.jet_eta_width));
      t.emplace_back("generator.jet_eta_max", DBL_FIELD(track_gen.jet_eta_max));
    } else {
      t.emplace_back("generator.met_location", DBL_FIELD(track_gen.met_location));
      t.emplace_back("generator.met_scale", DBL_FIELD(track_gen.met_scale));
      t.emplace_back("generator.met_threshold", DBL_FIELD(track_gen.met_threshold));
      t.emplace_back("generator.muon_smear", DBL_FIELD(track_gen.muon_smear));
      t.emplace_back("generator.muon_z_spread", DBL_FIELD(track_gen.muon_z_spread));
      t.emplace_back("generator.soft_track_mean", DBL_FIELD(track_gen.soft_track_mean));
      t.emplace_back("generator.soft_xy_spread", DBL_FIELD(track_gen.soft_xy_spread));
      t.emplace_back("generator.soft_z_spread", DBL_FIELD(track_gen.soft_z_spread));
    }
    t.emplace_back("generator.ip_spread", DBL_FIELD(track_gen.ip_spread));
  }

  t.emplace_back("model.family",
                 make_field(
                     [](const RunConfig& c) { return std::string(nn::family_name(c.model.family)); },
                     [](RunConfig& c, const std::string& v) {
                       c.model.family = nn::family_from_name(v);
                     }));
  t.emplace_back("model.input_features", INT_FIELD(model.input_features, int));
  t.emplace_back("model.hidden", INTLIST_FIELD(model.hidden));
  t.emplace_back("model.dropout", DBL_FIELD(model.dropout));
  t.emplace_back("model.embed", INTLIST_FIELD(model.embed));
  t.emplace_back("model.head", INTLIST_FIELD(model.head));
  t.emplace_back("model.group_size", INT_FIELD(model.group_size, std::size_t));

  t.emplace_back("train.learning_rate", DBL_FIELD(train.learning_rate));
  t.emplace_back("train.batch_size", INT_FIELD(train.batch_size, int));
  t.emplace_back("train.max_epochs", INT_FIELD(train.max_epochs, int));
  t.emplace_back("train.patience", INT_FIELD(train.patience, int));

  t.emplace_back("uncertainty.n_sigma", DBL_FIELD(uncertainty.n_sigma));
  t.emplace_back("uncertainty.floor", DBL_FIELD(uncertainty.floor));
  t.emplace_back("uncertainty.floor_enabled", BOOL_FIELD(uncertainty.floor_enabled));
  t.emplace_back("uncertainty.mask",
                 make_field(
                     [](const RunConfig& c) {
                       auto m = c.uncertainty.masked;
                       std::sort(m.begin(), m.end());
                       return join(m);
                     },
                     [](RunConfig& c, const std::string& v) { c.uncertainty.masked = split_list(v); }));

  t.emplace_back("attack.kind",
                 make_field(
                     [](const RunConfig& c) { return std::string(attack_kind_name(c.attack.kind)); },
                     [](RunConfig& c, const std::string& v) {
                       c.attack.kind = attack_kind_from_name(v);
                     }));
  t.emplace_back("attack.step_size", DBL_FIELD(attack.step_size));
  t.emplace_back("attack.iterations", INT_FIELD(attack.iterations, int));
  t.emplace_back("attack.lambda_chi2", DBL_FIELD(attack.lambda_chi2));
  t.emplace_back("attack.lambda_prior", DBL_FIELD(attack.lambda_prior));
  t.emplace_back("attack.histogram_bins", INT_FIELD(attack.histogram_bins, int));
  t.emplace_back("attack.bandwidth_fraction", DBL_FIELD(attack.bandwidth_fraction));
  t.emplace_back("attack.batch_size", INT_FIELD(attack.batch_size, std::size_t));
  t.emplace_back("attack.sigma_step_units", BOOL_FIELD(attack.step_in_sigma_units));
  t.emplace_back("attack.cw_kappa", DBL_FIELD(attack.cw_kappa));
  t.emplace_back("attack.cw_c_lo", DBL_FIELD(attack.cw_c_lo));
  t.emplace_back("attack.cw_c_hi", DBL_FIELD(attack.cw_c_hi));
  t.emplace_back("attack.cw_search_steps", INT_FIELD(attack.cw_search_steps, int));
  t.emplace_back("attack.cw_inner_iterations", INT_FIELD(attack.cw_inner_iterations, int));
  t.emplace_back("attack.cw_inner_step", DBL_FIELD(attack.cw_inner_step));
  t.emplace_back("attack.seed", INT_FIELD(attack.seed, std::uint64_t));

  t.emplace_back("validation.chi2_bins", INT_FIELD(validation.chi2_bins, std::size_t));
  t.emplace_back("validation.aux_auc_lo", DBL_FIELD(validation.aux_auc_lo));
  t.emplace_back("validation.aux_auc_hi", DBL_FIELD(validation.aux_auc_hi));
  t.emplace_back("validation.chi2_lo", DBL_FIELD(validation.chi2_lo));
  t.emplace_back("validation.chi2_hi", DBL_FIELD(validation.chi2_hi));
  t.emplace_back("validation.pearson_max", DBL_FIELD(validation.pearson_max));
  t.emplace_back("validation.z_mean_max", DBL_FIELD(validation.z_mean_max));
  t.emplace_back("validation.z_skew_max", DBL_FIELD(validation.z_skew_max));
  return t;
}

#undef DBL_FIELD
#undef INT_FIELD
#undef BOOL_FIELD
#undef INTLIST_FIELD

struct RawConfig {
  // section -> key -> value, in file order for error reporting
  std::vector<std::tuple<std::string, std::string, std::string>> entries;
};

RawConfig parse_ini(const std::string& text, const std::string& origin) {
  RawConfig raw;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::string s = line.substr(b, e - b + 1);
    if (s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": malformed section");
      section = s.substr(1, s.size() - 2);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = s.substr(0, eq);
    std::string value = s.substr(eq + 1);
    const auto kb = key.find_first_not_of(" \t");
    const auto ke = key.find_last_not_of(" \t");
    key = kb == std::string::npos ? "" : key.substr(kb, ke - kb + 1);
    const auto vb = value.find_first_not_of(" \t");
    const auto ve = value.find_last_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb, ve - vb + 1);
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": key outside a section");
    raw.entries.emplace_back(section, key, value);
  }
  return raw;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  const RawConfig raw = parse_ini(text, origin);

  // the task key steers defaults and the set of valid generator keys
  Task task = Task::kEvent;
  for (const auto& [section, key, value] : raw.entries)
    if (section == "run" && key == "task") task = task_from_name(value);

  RunConfig cfg = RunConfig::defaults(task);
  const auto table = field_table(task);
  std::map<std::string, const FieldRef*> lookup;
  for (const auto& [name, ref] : table) lookup[name] = &ref;

  const auto& names = cfg.feature_names();
  for (const auto& [section, key, value] : raw.entries) {
    const std::string full = section + "." + key;
    if (full == "run.task") continue;
    if (full == "run.output_dir") {
      cfg.output_dir = value;
      continue;
    }
    if (section == "uncertainty" && key.starts_with("width.")) {
      const std::string feature = key.substr(6);
      feature_index(names, feature);  // throws on unknown names
      cfg.uncertainty.widths[feature] = to_double(value);
      continue;
    }
    if (section == "uncertainty" && key.starts_with("floor.")) {
      const std::string feature = key.substr(6);
      feature_index(names, feature);
      cfg.uncertainty.floor_overrides[feature] = to_double(value);
      continue;
    }
    const auto it = lookup.find(full);
    if (it == lookup.end())
      throw std::invalid_argument(origin + ": unknown configuration key '" + full + "'");
    try {
      it->second->set(cfg, value);
    } catch (const std::exception& ex) {
      throw std::invalid_argument(origin + ": key '" + full + "': " + ex.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open configuration file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, ref] : field_table(cfg.task)) {
    out += name;
    out += "=";
    out += ref.get(cfg);
    out += "\n";
  }
  // dynamic per-feature entries, sorted by key
  std::map<std::string, double> widths(cfg.uncertainty.widths.begin(),
                                       cfg.uncertainty.widths.end());
  for (const auto& [k, v] : widths) out += "uncertainty.width." + k + "=" + io::format_double(v) + "\n";
  std::map<std::string, double> floors(cfg.uncertainty.floor_overrides.begin(),
                                       cfg.uncertainty.floor_overrides.end());
  for (const auto& [k, v] : floors) out += "uncertainty.floor." + k + "=" + io::format_double(v) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string canon = canonical_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canon) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

}  // namespace advaudit
