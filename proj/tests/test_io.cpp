#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include "vokit/error.hpp"
#include "vokit/io.hpp"

using namespace vokit;
using namespace vokit::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("vokit_io_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("correspondence CSV") {
  TempDir tmp;
  std::vector<ego::Correspondence> corrs(3);
  corrs[0] = {7, {0.1, -0.2}, {std::numbers::pi / 10.0, 1e-17}, 12.5};
  corrs[1] = {8, {-0.3, 0.25}, {-0.31, 0.26}, std::nullopt};
  corrs[2] = {9, {0.0, 0.0}, {1.0 / 3.0, -2.0 / 3.0}, 1e-3};
  const fs::path p = tmp.path / "sub" / "corr.csv";
  write_correspondences(p, corrs);
  const auto back = read_correspondences(p);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == corrs[i].id);
    CHECK(back[i].x_t.x == corrs[i].x_t.x);
    CHECK(back[i].x_t.y == corrs[i].x_t.y);
    CHECK(back[i].x_next.x == corrs[i].x_next.x);
    CHECK(back[i].x_next.y == corrs[i].x_next.y);
    CHECK(back[i].depth_t == corrs[i].depth_t);
  }

  write_text(tmp.path / "bad_header.csv", "a,b,c\n1,2,3\n");
  CHECK(code_of([&] { (void)read_correspondences(tmp.path / "bad_header.csv"); }) == ErrorCode::ParseError);
  write_text(tmp.path / "short.csv", "id,x1,y1,x2,y2,depth\n1,0.1,0.2,0.3\n");
  CHECK(code_of([&] { (void)read_correspondences(tmp.path / "short.csv"); }) == ErrorCode::ParseError);
  write_text(tmp.path / "nan.csv", "id,x1,y1,x2,y2,depth\n1,0.1,zero,0.3,0.4,\n");
  CHECK(code_of([&] { (void)read_correspondences(tmp.path / "nan.csv"); }) == ErrorCode::ParseError);
  write_text(tmp.path / "empty.csv", "");
  CHECK(code_of([&] { (void)read_correspondences(tmp.path / "empty.csv"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { (void)read_correspondences(tmp.path / "missing.csv"); }) == ErrorCode::IoError);

  write_text(tmp.path / "crlf.csv", "id,x1,y1,x2,y2,depth\r\n4,0.5,0.5,0.5,0.5,2\r\n\r\n");
  const auto crlf = read_correspondences(tmp.path / "crlf.csv");
  REQUIRE(crlf.size() == 1);
  CHECK(crlf[0].depth_t == 2.0);
}

TEST_CASE("label CSV") {
  TempDir tmp;
  const std::vector<LabelRow> rows{{0, sim::Label::Static, -1}, {1, sim::Label::Mover, 2}, {2, sim::Label::Outlier, -1}};
  write_labels(tmp.path / "labels.csv", rows);
  const auto back = read_labels(tmp.path / "labels.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].mover == rows[i].mover);
  }
  CHECK(to_string(sim::Label::Outlier) == "outlier");
  write_text(tmp.path / "odd.csv", "id,label,mover\n0,parked,-1\n");
  CHECK(code_of([&] { (void)read_labels(tmp.path / "odd.csv"); }) == ErrorCode::ParseError);
}

TEST_CASE("track CSV") {
  TempDir tmp;
  const std::vector<TrackRow> rows{{3, {10.25, 20.5}, {11.125, 19.75}, 0.004, true},
                                   {4, {300.0, 200.0}, {0.0, 0.0}, 1e-6, false}};
  write_tracks(tmp.path / "tracks.csv", rows);
  const auto back = read_tracks(tmp.path / "tracks.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].feature_id == rows[i].feature_id);
    CHECK(back[i].p1.x == rows[i].p1.x);
    CHECK(back[i].p2.y == rows[i].p2.y);
    CHECK(back[i].score == rows[i].score);
    CHECK(back[i].converged == rows[i].converged);
  }
}

TEST_CASE("verdict and segment CSV") {
  TempDir tmp;
  const std::vector<VerdictRow> verdicts{{1, robust::Verdict::Moving, -0.5}, {2, robust::Verdict::Static, 3.0}};
  write_verdicts(tmp.path / "v.csv", verdicts);
  std::ifstream vin(tmp.path / "v.csv");
  std::string line;
  std::getline(vin, line);
  CHECK(line == "feature_id,verdict,residual");
  std::getline(vin, line);
  CHECK(line == "1,MOVING,-0.5");

  write_segments(tmp.path / "s.csv", std::vector<SegmentRow>{{5, 0}, {6, -1}});
  std::ifstream sin(tmp.path / "s.csv");
  std::getline(sin, line);
  CHECK(line == "feature_id,segment_id");
  std::getline(sin, line);
  std::getline(sin, line);
  CHECK(line == "6,-1");
}

TEST_CASE("pose files") {
  TempDir tmp;
  std::vector<Pose> poses(2);
  poses[1].R = exp_rotation(Vec3(0.1, -0.2, 0.3));
  poses[1].T = Vec3(1.5, -2.0, 1.0 / 7.0);
  write_poses(tmp.path / "poses.txt", poses);
  const auto back = read_poses(tmp.path / "poses.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[1].R == poses[1].R);
  CHECK(back[1].T == poses[1].T);

  std::ifstream in(tmp.path / "poses.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "1 0 0 0 0 1 0 0 0 0 1 0");

  write_text(tmp.path / "eleven.txt", "1 0 0 0 0 1 0 0 0 0 1\n");
  CHECK(code_of([&] { (void)read_poses(tmp.path / "eleven.txt"); }) == ErrorCode::ParseError);
}

TEST_CASE("config") {
  TempDir tmp;
  write_text(tmp.path / "run.ini",
             "[flow]\nwindow = 15\nlevels = 4\n\n[odometry]\nouter = 0.25\nba = yes\noutlier = ransac\n");
  Config cfg = Config::load(tmp.path / "run.ini");
  CHECK(cfg.get_int("flow.window", 0) == 15);
  CHECK(cfg.get_double("odometry.outer", 0.0) == 0.25);
  CHECK(cfg.get_bool("odometry.ba", false));
  CHECK(cfg.get_string("odometry.outlier", "") == "ransac");
  CHECK(cfg.get_int("flow.missing", 7) == 7);
  CHECK_FALSE(cfg.has("nope.key"));

  cfg.set_assignment("odometry.ba=off");
  CHECK_FALSE(cfg.get_bool("odometry.ba", true));
  cfg.set_assignment("sim.seed=42");
  CHECK(cfg.get_int("sim.seed", 0) == 42);
  CHECK(code_of([&] { cfg.set_assignment("no_equals_sign"); }) == ErrorCode::ParseError);
  cfg.set("flow.window", "wide");
  CHECK(code_of([&] { (void)cfg.get_int("flow.window", 0); }) == ErrorCode::ParseError);
  cfg.set("odometry.ba", "perhaps");
  CHECK(code_of([&] { (void)cfg.get_bool("odometry.ba", false); }) == ErrorCode::ParseError);

  cfg.set("odometry.ba", "true");
  cfg.save(tmp.path / "out" / "saved.ini");
  const Config again = Config::load(tmp.path / "out" / "saved.ini");
  CHECK(again.get_int("sim.seed", 0) == 42);
  CHECK(again.get_bool("odometry.ba", false));

  write_text(tmp.path / "broken.ini", "[flow\nwindow = 3\n");
  CHECK(code_of([&] { (void)Config::load(tmp.path / "broken.ini"); }) == ErrorCode::ParseError);
}
