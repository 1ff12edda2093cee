#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace advaudit {

inline constexpr int kReportSchemaVersion = 1;

/// Reports are ordered JSON documents; emit -> load -> emit is byte-stable.
void emit_report(const nlohmann::ordered_json& report, const std::filesystem::path& path);
nlohmann::ordered_json load_report(const std::filesystem::path& path);

/// Copy with timing metadata removed (top-level created_utc and per-seed
/// timing blocks); two runs of the same configuration agree on this view.
nlohmann::ordered_json strip_volatile(const nlohmann::ordered_json& report);

/// Human-readable summary table for the CLI.
std::string render_report_text(const nlohmann::ordered_json& report);

std::string utc_timestamp();

}  // namespace advaudit
