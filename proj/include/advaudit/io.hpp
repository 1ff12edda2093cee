#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advaudit/data.hpp"

namespace advaudit::io {

/// Event tables travel as delimited text with a header row; every double is
/// written in shortest round-trip form so load(save(x)) == x bitwise.
void write_event_csv(const Dataset& events, const std::filesystem::path& path);
Dataset read_event_csv(const std::filesystem::path& path);

/// Track sets travel as one JSON record per line: {"mask": [...], "tracks":
/// [[...], ...], "label": 0/1, "split": "..."} where tracks lists only the
/// mask-valid rows (padded rows are identically zero by construction).
void write_track_jsonl(const Dataset& tracks, const std::filesystem::path& path);
Dataset read_track_jsonl(const std::filesystem::path& path, std::size_t max_tracks);

/// z sidecars reuse the dataset layouts with z values in place of features.
void write_z_sidecar(const Dataset& shape_like, const ad::Tensor& z,
                     const std::filesystem::path& path);

struct ScoreRow {
  std::size_t index = 0;
  int label = 0;
  double score_nominal = 0.0;
  double score_adversarial = 0.0;
};

void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

std::string format_double(double v);  // shortest round-trip

}  // namespace advaudit::io
