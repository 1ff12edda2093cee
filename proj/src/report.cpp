#include "advaudit/report.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

namespace advaudit {

void emit_report(const nlohmann::ordered_json& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path.string());
  out << report.dump(2) << "\n";
  if (!out) throw std::runtime_error("emit_report: write failed for " + path.string());
}

nlohmann::ordered_json load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_report: cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const std::exception& ex) {
    throw std::runtime_error("load_report: " + path.string() + ": " + ex.what());
  }
}

nlohmann::ordered_json strip_volatile(const nlohmann::ordered_json& report) {
  nlohmann::ordered_json out = report;
  out.erase("created_utc");
  if (out.contains("seeds"))
    for (auto& seed : out["seeds"]) seed.erase("timing");
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void eval_block(std::ostringstream& out, const char* name, const nlohmann::ordered_json& block) {
  out << "  " << name << "\n";
  out << "    nominal eval:      auc " << fmt(block["nominal"]["auc"].get<double>())
      << "  efficiency " << fmt(block["nominal"]["efficiency"].get<double>()) << "\n";
  out << "    adversarial eval:  auc " << fmt(block["adversarial"]["auc"].get<double>())
      << "  efficiency " << fmt(block["adversarial"]["efficiency"].get<double>()) << "\n";
  out << "    difference:        auc " << fmt(block["auc_difference"].get<double>())
      << "  efficiency " << fmt(block["efficiency_difference"].get<double>()) << "\n";
}

}  // namespace

std::string render_report_text(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out << "advaudit report (schema " << report["schema_version"] << ")\n";
  out << "task: " << report["task"].get<std::string>() << "   config "
      << report["config_hash"].get<std::string>() << "   created "
      << report.value("created_utc", std::string("?")) << "\n";
  out << "gates passed: " << (report["gates_passed"].get<bool>() ? "yes" : "no") << "\n\n";

  for (const auto& seed : report["seeds"]) {
    out << "seed " << seed["seed"] << (seed["complete"].get<bool>() ? "" : "  [INCOMPLETE]")
        << "\n";
    if (!seed["complete"].get<bool>()) {
      out << "  diagnostic: " << seed["diagnostic"].get<std::string>() << "\n\n";
      continue;
    }
    out << "  fooling ratio " << fmt(seed["fooling_ratio"].get<double>()) << "   aux auc "
        << fmt(seed["validation"]["aux_auc"].get<double>()) << "   max |dPearson| "
        << fmt(seed["validation"]["pearson_delta_max"].get<double>()) << "\n";
    eval_block(out, "cut baseline", seed["baseline"]);
    eval_block(out, "model (nominal training)", seed["models"]["nominal"]);
    eval_block(out, "model (adversarial training)", seed["models"]["adversarial"]);
    eval_block(out, "model (combined training)", seed["models"]["combined"]);
    out << "\n";
  }

  out << "aggregate over " << report["aggregate"]["seeds_used"].size() << " seeds (mean +- rms)\n";
  for (const auto& [key, val] : report["aggregate"]["metrics"].items())
    out << "  " << key << ": " << fmt(val["mean"].get<double>()) << " +- "
        << fmt(val["rms"].get<double>()) << "\n";
  return out.str();
}

}  // namespace advaudit
