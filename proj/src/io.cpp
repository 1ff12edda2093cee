#include "advaudit/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace advaudit::io {

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(what + ": " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open for reading");
  return in;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') io_fail(path, "malformed number '" + s + "' in");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_event_csv(const Dataset& events, const std::filesystem::path& path) {
  events.check_consistent();
  if (events.group != 1) throw std::invalid_argument("write_event_csv: expected event-level data");
  auto out = open_out(path);
  for (std::size_t c = 0; c < events.feature_names.size(); ++c)
    out << events.feature_names[c] << ",";
  out << "label,split\n";
  for (std::size_t e = 0; e < events.examples(); ++e) {
    for (std::size_t c = 0; c < events.x.cols(); ++c) out << format_double(events.x.at(e, c)) << ",";
    out << events.labels[e] << "," << split_name(events.split[e]) << "\n";
  }
  if (!out) io_fail(path, "write failed for");
}

Dataset read_event_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) io_fail(path, "missing header in");
  auto header = split_csv(line);
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "split")
    io_fail(path, "unexpected header in");
  Dataset ds;
  ds.feature_names.assign(header.begin(), header.end() - 2);
  ds.group = 1;
  const std::size_t cols = ds.feature_names.size();
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols + 2) io_fail(path, "wrong column count in");
    for (std::size_t c = 0; c < cols; ++c) values.push_back(parse_double(cells[c], path));
    ds.labels.push_back(static_cast<int>(parse_double(cells[cols], path)));
    ds.split.push_back(split_from_name(cells[cols + 1]));
  }
  ds.x = ad::Tensor({ds.labels.size(), cols}, std::move(values));
  ds.check_consistent();
  return ds;
}

namespace {

void write_track_like(const Dataset& shape_like, const ad::Tensor& values,
                      const std::filesystem::path& path) {
  shape_like.check_consistent();
  if (!shape_like.has_mask())
    throw std::invalid_argument("write_track_jsonl: expected track-level data");
  auto out = open_out(path);
  nlohmann::ordered_json meta{{"features", shape_like.feature_names},
                              {"max_tracks", shape_like.group}};
  out << meta.dump() << "\n";
  for (std::size_t e = 0; e < shape_like.examples(); ++e) {
    auto mask = nlohmann::ordered_json::array();
    auto tracks = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < shape_like.group; ++t) {
      const std::size_t r = e * shape_like.group + t;
      const int valid = shape_like.mask[r] != 0.0 ? 1 : 0;
      mask.push_back(valid);
      if (!valid) continue;
      auto row = nlohmann::ordered_json::array();
      for (std::size_t c = 0; c < values.cols(); ++c) row.push_back(values.at(r, c));
      tracks.push_back(std::move(row));
    }
    nlohmann::ordered_json rec;
    rec["mask"] = std::move(mask);
    rec["tracks"] = std::move(tracks);
    rec["label"] = shape_like.labels[e];
    rec["split"] = split_name(shape_like.split[e]);
    out << rec.dump() << "\n";
  }
  if (!out) io_fail(path, "write failed for");
}

}  // namespace

void write_track_jsonl(const Dataset& tracks, const std::filesystem::path& path) {
  write_track_like(tracks, tracks.x, path);
}

Dataset read_track_jsonl(const std::filesystem::path& path, std::size_t max_tracks) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) io_fail(path, "missing metadata line in");
  const nlohmann::json meta = nlohmann::json::parse(line);
  Dataset ds;
  ds.feature_names = meta.at("features").get<std::vector<std::string>>();
  ds.group = meta.at("max_tracks").get<std::size_t>();
  if (max_tracks != 0 && ds.group != max_tracks)
    io_fail(path, "max_tracks mismatch in");
  const std::size_t cols = ds.feature_names.size();

  std::vector<double> values;
  std::vector<double> mask;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json rec = nlohmann::json::parse(line);
    const auto& jmask = rec.at("mask");
    const auto& jtracks = rec.at("tracks");
    if (jmask.size() != ds.group) io_fail(path, "mask length mismatch in");
    std::size_t next_track = 0;
    for (std::size_t t = 0; t < ds.group; ++t) {
      const int valid = jmask[t].get<int>();
      mask.push_back(valid ? 1.0 : 0.0);
      if (valid) {
        const auto& row = jtracks.at(next_track++);
        if (row.size() != cols) io_fail(path, "track width mismatch in");
        for (std::size_t c = 0; c < cols; ++c) values.push_back(row[c].get<double>());
      } else {
        values.insert(values.end(), cols, 0.0);
      }
    }
    if (next_track != jtracks.size()) io_fail(path, "track count mismatch in");
    ds.labels.push_back(rec.at("label").get<int>());
    ds.split.push_back(split_from_name(rec.at("split").get<std::string>()));
  }
  ds.x = ad::Tensor({ds.labels.size() * ds.group, cols}, std::move(values));
  ds.mask = std::move(mask);
  ds.check_consistent();
  return ds;
}

void write_z_sidecar(const Dataset& shape_like, const ad::Tensor& z,
                     const std::filesystem::path& path) {
  if (!z.same_shape(shape_like.x))
    throw std::invalid_argument("write_z_sidecar: z shape does not match dataset");
  if (shape_like.has_mask()) {
    write_track_like(shape_like, z, path);
    return;
  }
  auto out = open_out(path);
  for (std::size_t c = 0; c < shape_like.feature_names.size(); ++c) {
    if (c) out << ",";
    out << shape_like.feature_names[c];
  }
  out << "\n";
  for (std::size_t e = 0; e < shape_like.examples(); ++e) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      if (c) out << ",";
      out << format_double(z.at(e, c));
    }
    out << "\n";
  }
  if (!out) io_fail(path, "write failed for");
}

void write_scores_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "index,label,score_nominal,score_adversarial\n";
  for (const auto& r : rows)
    out << r.index << "," << r.label << "," << format_double(r.score_nominal) << ","
        << format_double(r.score_adversarial) << "\n";
  if (!out) io_fail(path, "write failed for");
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) io_fail(path, "missing header in");
  std::vector<ScoreRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) io_fail(path, "wrong column count in");
    ScoreRow r;
    r.index = static_cast<std::size_t>(parse_double(cells[0], path));
    r.label = static_cast<int>(parse_double(cells[1], path));
    r.score_nominal = parse_double(cells[2], path);
    r.score_adversarial = parse_double(cells[3], path);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace advaudit::io
