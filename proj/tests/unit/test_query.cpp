#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "gazespiral/query.hpp"
#include "gazespiral/synthetic.hpp"
#include "test_support.hpp"

using namespace gazespiral;
using testsupport::Gaze;

namespace {

FeatureVector basis(std::size_t dim, std::size_t i, double w = 1.0) {
  FeatureVector v;
  v.values.assign(dim, 0.0);
  v.values[i] = w;
  return v;
}

// Fixations whose frames intersect [s, e].
std::pair<int, int> fixation_span(const std::vector<Fixation>& fx, std::pair<int, int> frames) {
  int first = -1, last = -1;
  for (std::size_t i = 0; i < fx.size(); ++i)
    if (fx[i].end_frame >= frames.first && fx[i].start_frame <= frames.second) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  return {first, last};
}

double oracle_similarity(const FeatureSequence& q, const FeatureSequence& t, std::size_t off) {
  double s = 0;
  for (std::size_t p = 0; p < q.size(); ++p) s += testsupport::ref_cosine(q.items[p].values, t.items[off + p].values);
  return 1.0 - s / static_cast<double>(q.size());
}

struct EventFixture {
  synth::SyntheticRecording syn;
  std::vector<Fixation> fixations;
  FeatureSequence features;
  std::pair<int, int> first, second;

  EventFixture() : syn(synth::event_recording("E", synth::SceneOptions{})) {
    fixations = detect_fixations(syn.recording);
    features = feature_sequence("E", fixations);
    first = fixation_span(fixations, syn.planted_spans[0]);
    second = fixation_span(fixations, syn.planted_spans[1]);
  }
};

const EventFixture& event_fixture() {
  static const EventFixture f;
  return f;
}

}  // namespace

TEST(Query, SelfMatchIsTopWithSimilarityOne) {
  const auto& f = event_fixture();
  ASSERT_EQ(f.first.second - f.first.first + 1, 3);
  const QuerySpan q{"E", f.first.first, f.first.second};
  const auto results = find_similar_spans(q, std::span<const FeatureSequence>(&f.features, 1));
  ASSERT_FALSE(results.empty());
  EXPECT_EQ(results[0].span, q);
  EXPECT_EQ(results[0].similarity, 1.0);
  EXPECT_EQ(results[0].rank, 1);
}

TEST(Query, PlantedPatternIsFoundExactlyTwice) {
  const auto& f = event_fixture();
  const QuerySpan q{"E", f.first.first, f.first.second};
  const auto results = find_similar_spans(q, std::span<const FeatureSequence>(&f.features, 1), QueryOptions{0.8, 10});
  ASSERT_EQ(results.size(), 2u);
  std::vector<std::pair<int, int>> spans{{results[0].span.start_fixation, results[0].span.end_fixation},
                                         {results[1].span.start_fixation, results[1].span.end_fixation}};
  std::sort(spans.begin(), spans.end());
  EXPECT_EQ(spans[0], f.first);
  EXPECT_EQ(spans[1], f.second);

  // Exhaustive scan: reported similarities match, and every window at or above
  // the threshold intersects a reported span.
  const FeatureSequence query{{f.features.items.begin() + q.start_fixation,
                               f.features.items.begin() + q.end_fixation + 1}, "E"};
  for (const auto& r : results)
    EXPECT_NEAR(r.similarity, oracle_similarity(query, f.features, r.span.start_fixation), 1e-12);
  for (std::size_t off = 0; off + 3 <= f.features.size(); ++off) {
    if (oracle_similarity(query, f.features, off) < 0.8) continue;
    const int s = static_cast<int>(off), e = s + 2;
    EXPECT_TRUE(std::any_of(results.begin(), results.end(), [&](const QueryResult& r) {
      return r.span.start_fixation <= e && s <= r.span.end_fixation;
    })) << off;
  }
}

TEST(Query, OrthogonalTargetYieldsNothing) {
  FeatureSequence source{{basis(4, 0), basis(4, 1)}, "S"};
  FeatureSequence target{{basis(4, 2), basis(4, 3), basis(4, 2, 5.0)}, "T"};
  const std::vector<FeatureVector> query = source.items;
  for (double threshold : {0.01, 0.5, 1.0})
    EXPECT_TRUE(find_similar_spans(query, std::span<const FeatureSequence>(&target, 1), {threshold, 10}).empty());
  FeatureSequence shorter{{basis(4, 0)}, "U"};
  EXPECT_TRUE(find_similar_spans(query, std::span<const FeatureSequence>(&shorter, 1), {0.0, 10}).empty());
}

TEST(Query, ThresholdIsAntiMonotoneAndSpansDoNotOverlap) {
  const auto& f = event_fixture();
  const QuerySpan q{"E", f.second.first, f.second.second};
  std::vector<QueryResult> looser;
  for (double t : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
    const auto now = find_similar_spans(q, std::span<const FeatureSequence>(&f.features, 1), {t, 100});
    ASSERT_LE(now.size(), looser.empty() ? now.size() : looser.size());
    for (std::size_t i = 0; i < now.size(); ++i) {
      if (!looser.empty()) EXPECT_EQ(now[i].span, looser[i].span);
      EXPECT_GE(now[i].similarity, t);
      if (i) EXPECT_GE(now[i - 1].similarity, now[i].similarity);
      for (std::size_t j = 0; j < i; ++j)
        EXPECT_TRUE(now[i].span.end_fixation < now[j].span.start_fixation ||
                    now[j].span.end_fixation < now[i].span.start_fixation);
    }
    looser = now;
  }
}

TEST(Query, MultipleTargetsRankedGloballyAndCappedPerTarget) {
  const std::vector<FeatureSequence> targets{
      {{basis(3, 0), basis(3, 1), basis(3, 0), basis(3, 0)}, "A"},
      {{basis(3, 2), basis(3, 0), basis(3, 0, 2.0)}, "B"},
  };
  const std::vector<FeatureVector> query{basis(3, 0)};
  const auto all = find_similar_spans(query, targets, {0.5, 10});
  ASSERT_EQ(all.size(), 5u);
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(all[i].rank, static_cast<int>(i) + 1);
    EXPECT_EQ(all[i].similarity, 1.0);
  }
  EXPECT_EQ(all[0].recording_id, "A");
  EXPECT_EQ(all[3].recording_id, "B");
  const auto capped = find_similar_spans(query, targets, {0.5, 1});
  ASSERT_EQ(capped.size(), 2u);
  EXPECT_EQ(capped[0].recording_id, "A");
  EXPECT_EQ(capped[1].recording_id, "B");
  EXPECT_EQ(find_similar_spans(query, targets, {0.5, 10}).size(), all.size());  // deterministic
}

TEST(Query, ParameterErrors) {
  const std::vector<FeatureSequence> targets{{{basis(2, 0)}, "A"}};
  EXPECT_THROW(find_similar_spans(QuerySpan{"missing", 0, 0}, targets), ParameterError);
  EXPECT_THROW(find_similar_spans(QuerySpan{"A", 0, 1}, targets), ParameterError);
  EXPECT_THROW(find_similar_spans(QuerySpan{"A", 0, 0}, targets, {1.5, 10}), ParameterError);
  EXPECT_THROW(find_similar_spans(std::vector<FeatureVector>{}, targets), ParameterError);
}

TEST(CandidateFixations, UniqueFixationFindsItself) {
  const FeatureSequence rec{{basis(4, 0), basis(4, 1), basis(4, 2), basis(4, 3)}, "R"};
  const auto r = candidate_fixations(QuerySpan{"R", 2, 2}, rec, {0.5, 10});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].span, (QuerySpan{"R", 2, 2}));
  EXPECT_THROW(candidate_fixations(QuerySpan{"R", 1, 2}, rec), ParameterError);
}

TEST(CandidateFixations, ThresholdZeroReturnsEverythingRanked) {
  const auto& f = event_fixture();
  const auto r = candidate_fixations(QuerySpan{"E", 4, 4}, f.features, {0.0, 1000});
  EXPECT_EQ(r.size(), f.features.size());
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r[i - 1].similarity, r[i].similarity);
  EXPECT_EQ(candidate_fixations(QuerySpan{"E", 4, 4}, f.features, {0.0, 5}).size(), 5u);
}

TEST(CandidateFixations, IdenticalPatchesAreBothRecommended) {
  // Two copies of a striped patch on a plain frame; gaze dwells on each, then on the wall.
  auto paint = [](int) {
    Image img(200, 100, Rgb{128, 128, 128});
    for (int y = 20; y < 80; ++y)
      for (int x = 0; x < 60; ++x) {
        const Rgb c = (x / 6) % 2 ? Rgb{255, 0, 0} : Rgb{0, 0, 255};
        img.at(20 + x, y) = c;
        img.at(120 + x, y) = c;
      }
    return img;
  };
  std::vector<std::optional<Gaze>> pts;
  const double lx = 50.0 / 199, rx = 150.0 / 199, cy = 49.5 / 99;
  for (int i = 0; i < 10; ++i) pts.push_back(Gaze{lx, cy});
  for (int i = 0; i < 3; ++i) pts.push_back(Gaze{0.5, 0.9 - i * 0.1});
  for (int i = 0; i < 10; ++i) pts.push_back(Gaze{rx, cy});
  for (int i = 0; i < 3; ++i) pts.push_back(Gaze{0.7, 0.1 + i * 0.1});
  for (int i = 0; i < 10; ++i) pts.push_back(Gaze{0.98, 0.05});
  const auto rec = testsupport::make_recording("D", testsupport::gaze_samples(pts), 200, 100, 25.0, paint);
  const auto fx = detect_fixations(rec, FixationParams{0.05, 100.0}, HistogramFeatureExtractor(32));
  ASSERT_EQ(fx.size(), 3u);
  const auto seq = feature_sequence("D", fx);
  const auto r = candidate_fixations(QuerySpan{"D", 0, 0}, seq, {0.9, 10});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].span.start_fixation, 0);
  EXPECT_EQ(r[1].span.start_fixation, 1);
  EXPECT_GE(r[1].similarity, 0.9);
}

TEST(QueryJson, RoundTrip) {
  const std::vector<FeatureSequence> targets{{{basis(2, 0), basis(2, 0)}, "A"}};
  const auto results = find_similar_spans(std::vector<FeatureVector>{basis(2, 0)}, targets, {0.5, 10});
  const std::string text = query_results_to_json(results);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j[0]["recording_id"], "A");
  EXPECT_EQ(j[0]["similarity"], 1.0);
  const auto back = query_results_from_json(text);
  ASSERT_EQ(back.size(), results.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].span, results[i].span);
    EXPECT_EQ(back[i].rank, results[i].rank);
  }
  EXPECT_THROW(query_results_from_json("[{\"recording_id\":1}]"), ParseError);
}
