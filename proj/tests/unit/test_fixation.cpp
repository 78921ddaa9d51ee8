#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "gazespiral/fixation.hpp"
#include "gazespiral/metrics.hpp"
#include "test_support.hpp"

using namespace gazespiral;
using testsupport::Gaze;

namespace {

// Longest all-valid span from `start` whose dispersion, recomputed from scratch
// for every candidate end, stays within the threshold; spans tile the stream.
std::vector<std::pair<int, int>> oracle_spans(const std::vector<GazeSample>& g, double fps, double thr,
                                              double min_ms) {
  auto dispersion = [&](int s, int e) {
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    for (int i = s; i <= e; ++i) {
      x0 = std::min(x0, g[i].x_norm), x1 = std::max(x1, g[i].x_norm);
      y0 = std::min(y0, g[i].y_norm), y1 = std::max(y1, g[i].y_norm);
    }
    return (x1 - x0) + (y1 - y0);
  };
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(g.size());
  int s = 0;
  while (s < n) {
    if (!g[s].valid) {
      ++s;
      continue;
    }
    int best = s;
    for (int e = s + 1; e < n && g[e].valid; ++e) {
      if (dispersion(s, e) > thr) break;
      best = e;
    }
    if ((best - s + 1) * 1000.0 / fps >= min_ms) out.emplace_back(s, best);
    s = best + 1;
  }
  return out;
}

std::vector<std::pair<int, int>> spans_of(const std::vector<Fixation>& fx) {
  std::vector<std::pair<int, int>> out;
  for (const auto& f : fx) out.emplace_back(f.start_frame, f.end_frame);
  return out;
}

Image solid(int w, int h, Rgb c) { return Image(w, h, c); }

}  // namespace

TEST(DetectFixations, ConstantGazeIsOneFixation) {
  const auto g = testsupport::gaze_samples(std::vector<std::optional<Gaze>>(10, Gaze{0.5, 0.5}));
  const auto fx = detect_fixation_spans(g, 25.0);
  ASSERT_EQ(fx.size(), 1u);
  EXPECT_EQ(fx[0].start_frame, 0);
  EXPECT_EQ(fx[0].end_frame, 9);
  EXPECT_DOUBLE_EQ(fx[0].centroid_x, 0.5);
  EXPECT_DOUBLE_EQ(fx[0].centroid_y, 0.5);
  EXPECT_DOUBLE_EQ(fx[0].duration_ms, 400.0);
  EXPECT_EQ(fx[0].middle_frame(), 4);
}

TEST(DetectFixations, AlternatingGazeHasNoFixations) {
  std::vector<std::optional<Gaze>> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(i % 2 ? Gaze{0.9, 0.9} : Gaze{0.1, 0.1});
  EXPECT_TRUE(detect_fixation_spans(testsupport::gaze_samples(pts), 25.0).empty());
}

TEST(DetectFixations, TwoDwellsMatchOracle) {
  std::vector<std::optional<Gaze>> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(Gaze{0.2, 0.2});
  pts.push_back(Gaze{0.4, 0.4});
  pts.push_back(Gaze{0.6, 0.6});
  for (int i = 0; i < 10; ++i) pts.push_back(Gaze{0.8, 0.8});
  const auto g = testsupport::gaze_samples(pts);
  const auto spans = spans_of(detect_fixation_spans(g, 25.0));
  EXPECT_EQ(spans, (std::vector<std::pair<int, int>>{{0, 7}, {10, 19}}));
  EXPECT_EQ(spans, oracle_spans(g, 25.0, 0.05, 100.0));
}

TEST(DetectFixations, RandomWalksMatchOracleAndRespectInvariants) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> step(-0.02, 0.02);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::optional<Gaze>> pts;
    double x = 0.5, y = 0.5;
    for (int i = 0; i < 150; ++i) {
      if (rng() % 25 == 0) x = (rng() % 100) / 100.0, y = (rng() % 100) / 100.0;
      x = std::clamp(x + step(rng), 0.0, 1.0);
      y = std::clamp(y + step(rng), 0.0, 1.0);
      pts.push_back(rng() % 20 == 0 ? std::optional<Gaze>{} : Gaze{x, y});
    }
    const auto g = testsupport::gaze_samples(pts);
    const auto fx = detect_fixation_spans(g, 25.0);
    EXPECT_EQ(spans_of(fx), oracle_spans(g, 25.0, 0.05, 100.0));
    int prev_end = -1;
    for (const auto& f : fx) {
      EXPECT_GT(f.start_frame, prev_end);
      prev_end = f.end_frame;
      for (int i = f.start_frame; i <= f.end_frame; ++i) EXPECT_TRUE(g[i].valid);
      EXPECT_DOUBLE_EQ(f.duration_ms, (f.end_frame - f.start_frame + 1) * 40.0);
    }
  }
}

TEST(DetectFixations, LoweringMinDurationOnlyAddsFixations) {
  std::mt19937_64 rng(3);
  std::vector<std::optional<Gaze>> pts;
  double x = 0.5, y = 0.5;
  for (int i = 0; i < 400; ++i) {
    if (rng() % 8 == 0) x = (rng() % 100) / 100.0, y = (rng() % 100) / 100.0;
    pts.push_back(Gaze{x + (rng() % 10) / 1000.0, y});
  }
  const auto g = testsupport::gaze_samples(pts);
  std::vector<std::pair<int, int>> previous;
  for (double min_ms : {300.0, 200.0, 120.0, 80.0, 40.0}) {
    const auto now = spans_of(detect_fixation_spans(g, 25.0, FixationParams{0.05, min_ms}));
    for (const auto& span : previous) EXPECT_NE(std::find(now.begin(), now.end(), span), now.end());
    EXPECT_GE(now.size(), previous.size());
    previous = now;
  }
}

TEST(DetectFixations, RejectsNonPositiveParameters) {
  const auto g = testsupport::gaze_samples({Gaze{0.5, 0.5}});
  EXPECT_THROW(detect_fixation_spans(g, 25.0, FixationParams{0.0, 100.0}), ParameterError);
  EXPECT_THROW(detect_fixation_spans(g, 25.0, FixationParams{0.05, 0.0}), ParameterError);
}

TEST(Features, UniformGrayHasOneColourBinAndNoGradient) {
  const auto f = extract_feature(solid(80, 60, Rgb{128, 128, 128}), 0.5, 0.5, 64);
  ASSERT_EQ(f.size(), static_cast<std::size_t>(kFeatureDim));
  const int bin = (128 >> 6) * 16 + (128 >> 6) * 4 + (128 >> 6);
  EXPECT_DOUBLE_EQ(f.values[bin], 1.0);
  for (int i = kColorBins; i < kFeatureDim; ++i) EXPECT_EQ(f.values[i], 0.0);
}

TEST(Features, RedAndBlueAreOrthogonal) {
  const auto red = extract_feature(solid(64, 64, Rgb{255, 0, 0}), 0.5, 0.5);
  const auto blue = extract_feature(solid(64, 64, Rgb{0, 0, 255}), 0.5, 0.5);
  EXPECT_DOUBLE_EQ(cosine_distance(red, blue), 1.0);
  EXPECT_DOUBLE_EQ(testsupport::ref_cosine(red.values, blue.values), 1.0);
}

TEST(Features, VerticalStepEdgePutsMassInHorizontalBin) {
  Image img(64, 64, colors::kBlack);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) img.at(x, y) = colors::kWhite;
  const auto f = extract_feature(img, 0.5, 0.5);
  // Luminance rises along +x: the whole gradient block sits in the 0 degree bin.
  EXPECT_NEAR(f.values[kColorBins + 0], 1.0, 1e-12);
  EXPECT_NEAR(f.values[0], 0.5, 1e-12);
  EXPECT_NEAR(f.values[kColorBins - 1], 0.5, 1e-12);
}

TEST(Features, BlockSumsAndTranslationInvariance) {
  std::mt19937 rng(7);
  Image patch(32, 32);
  for (auto& p : patch.pixels())
    p = Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
  const FeatureVector ref = patch_descriptor(patch);
  const double color = std::accumulate(ref.values.begin(), ref.values.begin() + kColorBins, 0.0);
  const double grad = std::accumulate(ref.values.begin() + kColorBins, ref.values.end(), 0.0);
  EXPECT_NEAR(color, 1.0, 1e-9);
  EXPECT_NEAR(grad, 1.0, 1e-9);

  for (auto [ox, oy] : {std::pair{0, 0}, {40, 10}, {17, 50}}) {
    Image frame(100, 90, Rgb{10, 200, 30});
    blit(frame, patch, ox, oy);
    const double cx = (ox + 16) / 99.0, cy = (oy + 16) / 89.0;
    const FeatureVector f = extract_feature(frame, cx, cy, 32);
    for (int i = 0; i < kFeatureDim; ++i) EXPECT_NEAR(f.values[i], ref.values[i], 1e-12);
  }
  EXPECT_THROW(extract_feature(patch, 0.5, 0.5, 7), ParameterError);
  EXPECT_THROW(extract_feature(patch, 0.5, 0.5, 6), ParameterError);
}

TEST(Thumbnails, CentredCornerAndIdentity) {
  Image frame(128, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 128; ++x) frame.at(x, y) = Rgb{static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y), 0};
  const Thumbnail centre = make_thumbnail(frame, 0.5, 0.5, 64);
  EXPECT_EQ(centre.pixels.width(), 64);
  EXPECT_EQ(centre.pixels, crop_clamped(frame, 64 - 32, 48 - 32, 64, 64));

  const Thumbnail corner = make_thumbnail(frame, 0.0, 0.0, 64);
  EXPECT_EQ(corner.pixels, crop_clamped(frame, 0, 0, 64, 64));

  const Image small = crop_clamped(frame, 0, 0, 64, 64);
  EXPECT_EQ(make_thumbnail(small, 0.5, 0.5, 64).pixels, small);
}

TEST(Thumbnails, RecordingThumbnailUsesMiddleFrame) {
  const auto rec = testsupport::make_recording(
      "t", testsupport::gaze_samples(std::vector<std::optional<Gaze>>(10, Gaze{0.5, 0.5})), 64, 48);
  const auto fx = detect_fixations(rec);
  ASSERT_EQ(fx.size(), 1u);
  const Thumbnail t = make_thumbnail(rec, fx, 0, 32);
  EXPECT_EQ(t.source_frame, 4);
  EXPECT_EQ(t.fixation_index, 0);
  EXPECT_EQ(t.pixels.at(0, 0).b, (4 * 37) % 256);
  EXPECT_THROW(make_thumbnail(rec, fx, 1, 32), ParameterError);
}

TEST(FixationJson, RoundTrip) {
  const auto rec = testsupport::make_recording(
      "t", testsupport::gaze_samples(std::vector<std::optional<Gaze>>(12, Gaze{0.3, 0.7})), 64, 48);
  const auto fx = detect_fixations(rec);
  const auto back = fixations_from_json(fixations_to_json(fx));
  ASSERT_EQ(back.size(), fx.size());
  EXPECT_EQ(back[0].start_frame, fx[0].start_frame);
  EXPECT_EQ(back[0].end_frame, fx[0].end_frame);
  EXPECT_DOUBLE_EQ(back[0].centroid_x, fx[0].centroid_x);
  EXPECT_DOUBLE_EQ(back[0].duration_ms, fx[0].duration_ms);
  EXPECT_EQ(back[0].feature, fx[0].feature);
}
