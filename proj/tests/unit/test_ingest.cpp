#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "gazespiral/ingest.hpp"
#include "test_support.hpp"

using namespace gazespiral;
using testsupport::Gaze;

namespace {

std::vector<GazeSample> parse(const std::string& body, int frames, GazeCsvOptions opts = {}) {
  std::istringstream in("frame_index,timestamp_ms,x_norm,y_norm,valid\n" + body);
  return parse_gaze_csv(in, frames, opts);
}

// Direct count of invalid runs used as the reference for data_quality.
DataQualityReport count_quality(const std::vector<GazeSample>& g) {
  DataQualityReport r;
  r.total_samples = g.size();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].valid) continue;
    ++r.invalid_samples;
    if (i == 0 || g[i - 1].valid)
      r.invalid_runs.emplace_back(static_cast<int>(i), static_cast<int>(i));
    else
      r.invalid_runs.back().second = static_cast<int>(i);
  }
  for (auto [s, e] : r.invalid_runs) r.longest_invalid_run_frames = std::max(r.longest_invalid_run_frames, e - s + 1);
  r.loss_fraction = static_cast<double>(r.invalid_samples) / static_cast<double>(r.total_samples);
  return r;
}

}  // namespace

TEST(GazeCsv, CompleteFileGivesOneValidSamplePerFrame) {
  std::string body;
  for (int i = 0; i < 10; ++i) body += std::to_string(i) + "," + std::to_string(i * 40) + ",0.5,0.25,1\n";
  const auto g = parse(body, 10);
  ASSERT_EQ(g.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_TRUE(g[i].valid);
    EXPECT_EQ(g[i].frame_index, i);
    EXPECT_EQ(g[i].timestamp_ms, i * 40);
    EXPECT_DOUBLE_EQ(g[i].x_norm, 0.5);
  }
}

TEST(GazeCsv, AbsentFramesBecomeInvalid) {
  const auto g = parse("0,0,0.1,0.1,1\n1,40,0.1,0.1,1\n2,80,0.1,0.1,1\n", 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_TRUE(g[2].valid);
  EXPECT_FALSE(g[3].valid);
  EXPECT_FALSE(g[4].valid);
}

TEST(GazeCsv, DuplicateRowsAreAveraged) {
  const auto g = parse("2,80,0.2,0.2,1\n2,85,0.4,0.4,1\n", 3);
  EXPECT_TRUE(g[2].valid);
  EXPECT_NEAR(g[2].x_norm, 0.3, 1e-12);
  EXPECT_NEAR(g[2].y_norm, 0.3, 1e-12);
}

TEST(GazeCsv, InvalidDuplicatesDoNotContribute) {
  const auto g = parse("0,0,0.9,0.9,0\n0,1,0.2,0.6,1\n1,40,0.5,0.5,0\n", 2);
  EXPECT_TRUE(g[0].valid);
  EXPECT_DOUBLE_EQ(g[0].x_norm, 0.2);
  EXPECT_FALSE(g[1].valid);
}

TEST(GazeCsv, ClampsSmallOvershootAndRejectsLargeOnes) {
  const auto g = parse("0,0,-0.05,1.08,1\n", 1);
  EXPECT_DOUBLE_EQ(g[0].x_norm, 0.0);
  EXPECT_DOUBLE_EQ(g[0].y_norm, 1.0);
  EXPECT_THROW(parse("0,0,1.2,0.5,1\n", 1), ParseError);
  EXPECT_THROW(parse("0,0,0.5,-0.11,1\n", 1), ParseError);
}

TEST(GazeCsv, MalformedRowsReportTheirLine) {
  try {
    parse("0,0,0.5,0.5,1\n1,40,abc,0.5,1\n", 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse("0,0,0.5,0.5\n", 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream no_header("");
  EXPECT_THROW(parse_gaze_csv(no_header, 1), ParseError);
}

TEST(GazeCsv, PixelSpaceIsNormalizedByFrameSize) {
  GazeCsvOptions opts;
  opts.space = GazeSpace::Pixels;
  opts.frame_width = 101;
  opts.frame_height = 51;
  const auto g = parse("0,0,50,25,1\n", 1, opts);
  EXPECT_DOUBLE_EQ(g[0].x_norm, 0.5);
  EXPECT_DOUBLE_EQ(g[0].y_norm, 0.5);
}

TEST(GazeCsv, RowOrderDoesNotMatter) {
  std::vector<std::string> rows;
  for (int i = 0; i < 30; ++i)
    rows.push_back(std::to_string(i) + "," + std::to_string(i * 40) + "," + std::to_string(i / 30.0) + ",0.5," +
                   (i % 7 == 3 ? "0" : "1") + "\n");
  auto join = [&] {
    std::string s;
    for (auto& r : rows) s += r;
    return s;
  };
  const auto reference = parse(join(), 32);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_EQ(parse(join(), 32), reference);
  }
}

TEST(GazeCsv, WriteThenLoadRoundTrips) {
  testsupport::TempDir dir;
  auto g = testsupport::gaze_samples({Gaze{0.25, 0.75}, std::nullopt, Gaze{0.5, 0.125}});
  write_gaze_csv(dir / "g.csv", g);
  const auto back = load_gaze_csv(dir / "g.csv", 3);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_TRUE(back[0].valid);
  EXPECT_DOUBLE_EQ(back[0].x_norm, 0.25);
  EXPECT_FALSE(back[1].valid);
  EXPECT_DOUBLE_EQ(back[2].y_norm, 0.125);
  EXPECT_THROW(load_gaze_csv(dir / "missing.csv", 3), IngestError);
}

TEST(DataQuality, NoLoss) {
  const auto r = data_quality(testsupport::gaze_samples(std::vector<std::optional<Gaze>>(10, Gaze{0.5, 0.5})));
  EXPECT_EQ(r.total_samples, 10u);
  EXPECT_DOUBLE_EQ(r.loss_fraction, 0.0);
  EXPECT_EQ(r.longest_invalid_run_frames, 0);
  EXPECT_TRUE(r.invalid_runs.empty());
}

TEST(DataQuality, SingleRun) {
  std::vector<std::optional<Gaze>> pts(10, Gaze{0.5, 0.5});
  for (int i = 4; i <= 6; ++i) pts[i].reset();
  const auto r = data_quality(testsupport::gaze_samples(pts));
  EXPECT_DOUBLE_EQ(r.loss_fraction, 0.3);
  EXPECT_EQ(r.longest_invalid_run_frames, 3);
  ASSERT_EQ(r.invalid_runs.size(), 1u);
  EXPECT_EQ(r.invalid_runs[0], std::make_pair(4, 6));
}

TEST(DataQuality, AlternatingMatchesDirectCount) {
  std::vector<std::optional<Gaze>> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(i % 2 ? std::optional<Gaze>{} : Gaze{0.5, 0.5});
  const auto g = testsupport::gaze_samples(pts);
  const auto r = data_quality(g);
  EXPECT_EQ(r, count_quality(g));
  EXPECT_DOUBLE_EQ(r.loss_fraction, 0.5);
  EXPECT_EQ(r.longest_invalid_run_frames, 1);
  EXPECT_EQ(r.invalid_runs.size(), 4u);
}

TEST(DataQuality, RandomValidityMatchesDirectCountAndRunsCoverInvalid) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::optional<Gaze>> pts;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) pts.push_back(rng() % 3 == 0 ? std::optional<Gaze>{} : Gaze{0.5, 0.5});
    const auto g = testsupport::gaze_samples(pts);
    const auto r = data_quality(g);
    EXPECT_EQ(r, count_quality(g));
    std::size_t covered = 0;
    for (auto [s, e] : r.invalid_runs) covered += static_cast<std::size_t>(e - s + 1);
    EXPECT_EQ(covered, r.invalid_samples);
  }
}

TEST(DataQuality, EmptyRecordingIsAnError) {
  std::vector<GazeSample> none;
  try {
    data_quality(none);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty recording");
  }
}

TEST(DataQuality, JsonRoundTrip) {
  std::vector<std::optional<Gaze>> pts(12, Gaze{0.1, 0.2});
  pts[0].reset();
  pts[7].reset();
  pts[8].reset();
  const auto r = data_quality(testsupport::gaze_samples(pts));
  EXPECT_EQ(data_quality_from_json(data_quality_to_json(r)), r);
}

TEST(FrameSources, RawStreamAndManifest) {
  testsupport::TempDir dir;
  const auto rec = testsupport::make_recording(
      "r1", testsupport::gaze_samples({Gaze{0.1, 0.1}, Gaze{0.2, 0.2}, std::nullopt, Gaze{0.4, 0.4}}), 8, 6);
  write_raw_stream(dir / "r1.rgb", rec.frames);
  write_gaze_csv(dir / "r1.csv", rec.gaze);
  write_manifest(dir / "r1.json", ManifestInfo{"r1", FrameSourceKind::RawStream, "r1.rgb", 8, 6, 25.0, 4, "r1.csv"});

  const Recording back = load_recording(dir / "r1.json");
  EXPECT_EQ(back.id, "r1");
  EXPECT_EQ(back.frames.kind(), FrameSourceKind::RawStream);
  EXPECT_EQ(back.frames.frame_count(), 4);
  EXPECT_EQ(back.gaze.size(), 4u);
  EXPECT_FALSE(back.gaze[2].valid);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(back.frames.frame(i), rec.frames.frame(i));
  EXPECT_THROW(back.frames.frame(4), ParameterError);

  const Recording raw = load_raw_recording("r1", dir / "r1.rgb", dir / "r1.csv", 8, 6, 25.0);
  EXPECT_EQ(raw.frames.frame_count(), 4);
  // Dimensions that do not divide the stream size are rejected.
  EXPECT_THROW(load_raw_recording("r1", dir / "r1.rgb", dir / "r1.csv", 7, 6, 25.0), IngestError);
}

TEST(FrameSources, ImageDirectoryOrdersByNumber) {
  testsupport::TempDir dir;
  std::filesystem::create_directories(dir / "frames");
  for (int i : {10, 2, 0, 1}) {
    Image img(4, 3, Rgb{static_cast<std::uint8_t>(i), 0, 0});
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.png", i);
    write_png(dir.path() / "frames" / name, img);
  }
  const auto src = FrameSource::open_image_directory(dir / "frames", 4, 3, 25.0);
  ASSERT_EQ(src.frame_count(), 4);
  EXPECT_EQ(src.frame(0).at(0, 0).r, 0);
  EXPECT_EQ(src.frame(2).at(0, 0).r, 2);
  EXPECT_EQ(src.frame(3).at(0, 0).r, 10);
  const auto wrong = FrameSource::open_image_directory(dir / "frames", 5, 3, 25.0);
  EXPECT_THROW(wrong.frame(0), IngestError);
  EXPECT_THROW(FrameSource::open_image_directory(dir / "nope", 4, 3, 25.0), IngestError);
}

TEST(Manifest, BrokenInputsAreIngestErrors) {
  testsupport::TempDir dir;
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_recording(dir / "bad.json"), IngestError);
  EXPECT_THROW(load_recording(dir / "absent.json"), IngestError);
  std::ofstream(dir / "kind.json")
      << R"({"id":"x","frames":{"kind":"video","path":"a","width":2,"height":2,"fps":25},"gaze_csv":"g.csv"})";
  EXPECT_THROW(load_recording(dir / "kind.json"), std::exception);
}
