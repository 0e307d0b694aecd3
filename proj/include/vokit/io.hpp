#pragma once

// File formats: correspondence / label / track / verdict / segment CSV,
// pose trajectories (12 reals per line, row-major [R | t], camera-to-world),
// and the sectioned key-value pipeline configuration.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "vokit/egomotion.hpp"
#include "vokit/robust.hpp"
#include "vokit/sim.hpp"

namespace vokit::io {

/// id,x1,y1,x2,y2,depth in normalized coordinates; depth may be empty.
void write_correspondences(const std::filesystem::path& path, std::span<const ego::Correspondence> corrs);
std::vector<ego::Correspondence> read_correspondences(const std::filesystem::path& path);

struct LabelRow {
  int id = 0;
  sim::Label label = sim::Label::Static;
  int mover = -1;
};
/// id,label,mover with label one of static|mover|outlier.
void write_labels(const std::filesystem::path& path, std::span<const LabelRow> rows);
std::vector<LabelRow> read_labels(const std::filesystem::path& path);
std::string to_string(sim::Label label);

struct TrackRow {
  int feature_id = 0;
  PixelPoint p1;
  PixelPoint p2;
  double score = 0.0;
  bool converged = false;
};
/// feature_id,x1,y1,x2,y2,score,converged in pixels.
void write_tracks(const std::filesystem::path& path, std::span<const TrackRow> rows);
std::vector<TrackRow> read_tracks(const std::filesystem::path& path);

struct VerdictRow {
  int feature_id = 0;
  robust::Verdict verdict = robust::Verdict::Undecided;
  double residual = 0.0;
};
/// feature_id,verdict,residual.
void write_verdicts(const std::filesystem::path& path, std::span<const VerdictRow> rows);

struct SegmentRow {
  int feature_id = 0;
  int segment_id = -1;  ///< -1 for residue
};
/// feature_id,segment_id.
void write_segments(const std::filesystem::path& path, std::span<const SegmentRow> rows);

/// Camera-to-world poses, one frame per line.
void write_poses(const std::filesystem::path& path, std::span<const Pose> poses);
std::vector<Pose> read_poses(const std::filesystem::path& path);

/// Sectioned key-value configuration ("[section]" headers, "key = value"
/// lines). Keys are addressed as "section.key".
class Config {
 public:
  Config() = default;
  static Config load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Parses "section.key=value".
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const;

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key, int fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;

 private:
  boost::property_tree::ptree tree_;
};

}  // namespace vokit::io
