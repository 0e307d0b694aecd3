#include "vokit/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vokit/error.hpp"

namespace vokit::io {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Data rows of a CSV file with the given column count; the header is checked.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) fail(ErrorCode::ParseError, path.string() + ": expected header '" + header + "'");
  const std::size_t cols = split(header).size();
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != cols) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, path.string() + ": not a number: '" + s + "'");
  }
}

int to_int(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, path.string() + ": not an integer: '" + s + "'");
  }
}

constexpr const char* kCorrHeader = "id,x1,y1,x2,y2,depth";
constexpr const char* kLabelHeader = "id,label,mover";
constexpr const char* kTrackHeader = "feature_id,x1,y1,x2,y2,score,converged";

}  // namespace

void write_correspondences(const std::filesystem::path& path, std::span<const ego::Correspondence> corrs) {
  auto out = open_out(path);
  out << kCorrHeader << '\n';
  for (const auto& c : corrs) {
    out << c.id << ',' << fmt(c.x_t.x) << ',' << fmt(c.x_t.y) << ',' << fmt(c.x_next.x) << ',' << fmt(c.x_next.y)
        << ',' << (c.depth_t ? fmt(*c.depth_t) : std::string()) << '\n';
  }
  finish(out, path);
}

std::vector<ego::Correspondence> read_correspondences(const std::filesystem::path& path) {
  std::vector<ego::Correspondence> out;
  for (const auto& r : read_rows(path, kCorrHeader)) {
    ego::Correspondence c;
    c.id = to_int(r[0], path);
    c.x_t = {to_double(r[1], path), to_double(r[2], path)};
    c.x_next = {to_double(r[3], path), to_double(r[4], path)};
    if (!r[5].empty()) c.depth_t = to_double(r[5], path);
    out.push_back(c);
  }
  return out;
}

std::string to_string(sim::Label label) {
  switch (label) {
    case sim::Label::Static:
      return "static";
    case sim::Label::Mover:
      return "mover";
    case sim::Label::Outlier:
      return "outlier";
  }
  return "unknown";
}

void write_labels(const std::filesystem::path& path, std::span<const LabelRow> rows) {
  auto out = open_out(path);
  out << kLabelHeader << '\n';
  for (const auto& r : rows) out << r.id << ',' << to_string(r.label) << ',' << r.mover << '\n';
  finish(out, path);
}

std::vector<LabelRow> read_labels(const std::filesystem::path& path) {
  std::vector<LabelRow> out;
  for (const auto& r : read_rows(path, kLabelHeader)) {
    LabelRow row;
    row.id = to_int(r[0], path);
    if (r[1] == "static") {
      row.label = sim::Label::Static;
    } else if (r[1] == "mover") {
      row.label = sim::Label::Mover;
    } else if (r[1] == "outlier") {
      row.label = sim::Label::Outlier;
    } else {
      fail(ErrorCode::ParseError, path.string() + ": unknown label '" + r[1] + "'");
    }
    row.mover = to_int(r[2], path);
    out.push_back(row);
  }
  return out;
}

void write_tracks(const std::filesystem::path& path, std::span<const TrackRow> rows) {
  auto out = open_out(path);
  out << kTrackHeader << '\n';
  for (const auto& r : rows) {
    out << r.feature_id << ',' << fmt(r.p1.x) << ',' << fmt(r.p1.y) << ',' << fmt(r.p2.x) << ',' << fmt(r.p2.y)
        << ',' << fmt(r.score) << ',' << (r.converged ? 1 : 0) << '\n';
  }
  finish(out, path);
}

std::vector<TrackRow> read_tracks(const std::filesystem::path& path) {
  std::vector<TrackRow> out;
  for (const auto& r : read_rows(path, kTrackHeader)) {
    TrackRow t;
    t.feature_id = to_int(r[0], path);
    t.p1 = {to_double(r[1], path), to_double(r[2], path)};
    t.p2 = {to_double(r[3], path), to_double(r[4], path)};
    t.score = to_double(r[5], path);
    t.converged = to_int(r[6], path) != 0;
    out.push_back(t);
  }
  return out;
}

void write_verdicts(const std::filesystem::path& path, std::span<const VerdictRow> rows) {
  auto out = open_out(path);
  out << "feature_id,verdict,residual\n";
  for (const auto& r : rows) out << r.feature_id << ',' << robust::to_string(r.verdict) << ',' << fmt(r.residual) << '\n';
  finish(out, path);
}

void write_segments(const std::filesystem::path& path, std::span<const SegmentRow> rows) {
  auto out = open_out(path);
  out << "feature_id,segment_id\n";
  for (const auto& r : rows) out << r.feature_id << ',' << r.segment_id << '\n';
  finish(out, path);
}

void write_poses(const std::filesystem::path& path, std::span<const Pose> poses) {
  auto out = open_out(path);
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << fmt(p.R(r, c)) << ' ';
      out << fmt(p.T(r)) << (r == 2 ? '\n' : ' ');
    }
  }
  finish(out, path);
}

std::vector<Pose> read_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Pose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) v.push_back(to_double(tok, path));
    if (v.empty()) continue;
    if (v.size() != 12) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected 12 values");
    }
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.R(r, c) = v[static_cast<std::size_t>(4 * r + c)];
      p.T(r) = v[static_cast<std::size_t>(4 * r + 3)];
    }
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

Config Config::load(const std::filesystem::path& path) {
  Config cfg;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), cfg.tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  return cfg;
}

void Config::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    boost::property_tree::ini_parser::write_ini(path.string(), tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::IoError, e.what());
  }
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail(ErrorCode::ParseError, "expected section.key=value: " + assignment);
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void Config::set(const std::string& key, const std::string& value) { tree_.put(key, value); }

bool Config::has(const std::string& key) const { return static_cast<bool>(tree_.get_child_optional(key)); }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return tree_.get<std::string>(key, fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  return to_double(tree_.get<std::string>(key), "config key " + key);
}

int Config::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  return to_int(tree_.get<std::string>(key), "config key " + key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = tree_.get<std::string>(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(ErrorCode::ParseError, "config key " + key + ": not a boolean: '" + v + "'");
}

}  // namespace vokit::io
