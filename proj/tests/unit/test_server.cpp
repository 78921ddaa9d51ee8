#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "gazespiral/server.hpp"
#include "gazespiral/spiral.hpp"
#include "gazespiral/synthetic.hpp"
#include "test_support.hpp"

using namespace gazespiral;
using nlohmann::json;

namespace {

struct Recordings {
  std::vector<Recording> recs;
  std::vector<std::pair<int, int>> planted;  // frame spans in "E"
};

const Recordings& recordings() {
  static const Recordings r = [] {
    Recordings out;
    auto e = synth::event_recording("E", synth::SceneOptions{});
    out.planted = e.planted_spans;
    out.recs.push_back(e.recording);
    synth::SceneOptions o;
    o.seed = 9;
    o.frame_count = 150;
    out.recs.push_back(synth::drift_recording("D", o, {{20, 29}}).recording);
    return out;
  }();
  return r;
}

LabelScheme two_labels() {
  LabelScheme s;
  s.labels = {{"A", Rgb{230, 25, 75}}, {"B", Rgb{60, 180, 75}}};
  return s;
}

std::unique_ptr<Session> make_session(ProjectConfig config = {}) {
  auto s = std::make_unique<Session>(std::move(config), recordings().recs);
  HttpRequest put{"PUT", "/api/labels", {}, {}, label_scheme_to_json(two_labels())};
  EXPECT_EQ(s->handle(put).status, 200);
  return s;
}

HttpResponse get(Session& s, const std::string& path, std::multimap<std::string, std::string> params = {},
                 std::map<std::string, std::string> headers = {}) {
  return s.handle(HttpRequest{"GET", path, std::move(params), std::move(headers), ""});
}

HttpResponse send(Session& s, const std::string& method, const std::string& path, const std::string& body,
                  std::map<std::string, std::string> headers = {}) {
  return s.handle(HttpRequest{method, path, {}, std::move(headers), body});
}

Image png(const HttpResponse& r) {
  return decode_png(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()));
}

std::pair<int, int> fixation_span(const std::vector<Fixation>& fx, std::pair<int, int> frames) {
  int first = -1, last = -1;
  for (std::size_t i = 0; i < fx.size(); ++i)
    if (fx[i].end_frame >= frames.first && fx[i].start_frame <= frames.second) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  return {first, last};
}

std::vector<Fixation> fixations_of(const Recording& rec) {
  return detect_fixations(rec, FixationParams{}, HistogramFeatureExtractor(kDefaultPatchPx));
}

std::string annotation_body(int s, int e, const std::string& label) {
  return json{{"start_fixation", s}, {"end_fixation", e}, {"label", label}, {"author", "t"}}.dump();
}

}  // namespace

TEST(Server, ListsRecordingsAndSummaries) {
  auto s = make_session();
  const auto r = get(*s, "/api/recordings");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/json");
  const auto j = json::parse(r.body);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["id"], "E");
  EXPECT_EQ(j[1]["id"], "D");
  EXPECT_EQ(j[0]["fixation_count"], fixations_of(recordings().recs[0]).size());
  EXPECT_EQ(j[1]["frame_count"], 150);
  EXPECT_EQ(j[1]["annotation_count"], 0);

  const auto one = json::parse(get(*s, "/api/recordings/D").body);
  EXPECT_EQ(one["frames"]["kind"], "generated");
  EXPECT_EQ(one["frames"]["width"], 160);
  EXPECT_EQ(one["annotation_revision"], 0);
  EXPECT_EQ(s->recording_ids(), (std::vector<std::string>{"E", "D"}));
}

TEST(Server, RoutingErrors) {
  auto s = make_session();
  EXPECT_EQ(get(*s, "/api/recordings/nope").status, 404);
  EXPECT_EQ(get(*s, "/api/recordings/nope/fixations").status, 404);
  EXPECT_EQ(get(*s, "/api/unknown").status, 404);
  EXPECT_EQ(get(*s, "/index.html").status, 404);
  EXPECT_EQ(send(*s, "DELETE", "/api/labels", "").status, 405);
  const auto r = send(*s, "POST", "/api/query", "{broken");
  EXPECT_EQ(r.status, 400);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["status"], 400);
  EXPECT_TRUE(j["error"].get<std::string>().find("malformed") != std::string::npos);
  EXPECT_EQ(send(*s, "POST", "/api/query", "[1, 2]").status, 400);
}

TEST(Server, QualityAndFixationsMirrorModuleExports) {
  auto s = make_session();
  const Recording& d = recordings().recs[1];
  EXPECT_EQ(get(*s, "/api/recordings/D/quality").body, data_quality_to_json(data_quality(d)));
  EXPECT_EQ(get(*s, "/api/recordings/D/fixations").body, fixations_to_json(fixations_of(d)));
  const auto q = json::parse(get(*s, "/api/recordings/D/quality").body);
  EXPECT_DOUBLE_EQ(q["loss_fraction"].get<double>(), 10.0 / 150.0);
}

TEST(Server, EmptyRecordingQualityIs422) {
  // Frames without any gaze samples.
  Recording z = testsupport::make_recording("Z", testsupport::gaze_samples({testsupport::Gaze{0.5, 0.5}}));
  z.gaze.clear();
  std::vector<Recording> recs{z};
  Session s(ProjectConfig{}, std::move(recs));
  EXPECT_EQ(get(s, "/api/recordings/Z/quality").status, 422);
  const auto list = json::parse(get(s, "/api/recordings").body);
  EXPECT_TRUE(list[0]["loss_fraction"].is_null());
}

TEST(Server, ThumbnailPngWithValidator) {
  auto s = make_session();
  const auto r = get(*s, "/api/recordings/E/thumbnail/2");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const auto fx = fixations_of(recordings().recs[0]);
  EXPECT_EQ(png(r), make_thumbnail(recordings().recs[0], fx, 2).pixels);
  const std::string tag = r.headers.at("ETag");
  EXPECT_EQ(tag, etag_for(r.body));
  const auto again = get(*s, "/api/recordings/E/thumbnail/2", {}, {{"if-none-match", tag}});
  EXPECT_EQ(again.status, 304);
  EXPECT_TRUE(again.body.empty());
  EXPECT_EQ(png(get(*s, "/api/recordings/E/thumbnail/2", {{"size", "32"}})).width(), 32);
  EXPECT_EQ(get(*s, "/api/recordings/E/thumbnail/9999").status, 404);
  EXPECT_EQ(get(*s, "/api/recordings/E/thumbnail/x").status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/E/thumbnail/1", {{"size", "0"}}).status, 400);
}

TEST(Server, SpiralMatchesDirectRenderAndIsByteStable) {
  auto s = make_session();
  const Recording& d = recordings().recs[1];
  const auto fx = fixations_of(d);
  const auto r = get(*s, "/api/recordings/D/spiral", {{"stride", "2"}, {"highlights", "1-2"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");

  const ProjectConfig defaults;
  SpiralParams p = defaults.spiral;
  p.stride = 2;
  const auto seq = extract_sequence(d, defaults.slitscan.mode, defaults.slitscan.height, 2);
  const std::vector<QuerySpan> hl{{"D", 1, 2}};
  const auto overlay = make_overlay(fx, {}, two_labels(), hl, 2, seq.size());
  EXPECT_EQ(png(r), render_spiral(seq, p, overlay));

  // A fresh session renders the same bytes.
  auto other = make_session();
  EXPECT_EQ(get(*other, "/api/recordings/D/spiral", {{"stride", "2"}, {"highlights", "1-2"}}).body, r.body);
  EXPECT_NE(get(*s, "/api/recordings/D/spiral", {{"stride", "2"}}).body, r.body);
}

TEST(Server, SpiralParameterValidation) {
  auto s = make_session();
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"stride", "0"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"a", "abc"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"a", "-1"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"k", "0"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"h", "1000"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"highlights", "3-1"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"highlights", "0-9999"}}).status, 400);
  EXPECT_EQ(get(*s, "/api/recordings/D/spiral", {{"a", "4"}, {"k", "0.9"}, {"h", "4"}}).status, 200);
}

TEST(Server, SpiralReflectsAnnotationsAndLabelChanges) {
  auto s = make_session();
  const auto before = get(*s, "/api/recordings/D/spiral").body;
  ASSERT_EQ(send(*s, "POST", "/api/recordings/D/annotations", annotation_body(0, 1, "A")).status, 201);
  const auto annotated = get(*s, "/api/recordings/D/spiral").body;
  EXPECT_NE(annotated, before);
  LabelScheme recoloured = two_labels();
  recoloured.labels[0].color = Rgb{0, 0, 255};
  ASSERT_EQ(send(*s, "PUT", "/api/labels", label_scheme_to_json(recoloured)).status, 200);
  EXPECT_NE(get(*s, "/api/recordings/D/spiral").body, annotated);
}

TEST(Server, ConcurrentSpiralRequestsAgree) {
  auto s = make_session();
  std::vector<std::string> bodies(6);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    threads.emplace_back([&, i] { bodies[i] = get(*s, "/api/recordings/E/spiral", {{"stride", "3"}}).body; });
  for (auto& t : threads) t.join();
  ASSERT_FALSE(bodies[0].empty());
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
}

TEST(Server, ScarfPng) {
  auto s = make_session();
  ASSERT_EQ(send(*s, "POST", "/api/recordings/D/annotations", annotation_body(0, 0, "B")).status, 201);
  const auto r = get(*s, "/api/recordings/D/scarf");
  ASSERT_EQ(r.status, 200);
  const Image img = png(r);
  EXPECT_EQ(img.width(), 150);
  EXPECT_EQ(img.height(), 24);
  const auto fx = fixations_of(recordings().recs[1]);
  EXPECT_EQ(img.at(fx[0].start_frame, 0), (Rgb{60, 180, 75}));
  EXPECT_EQ(png(get(*s, "/api/recordings/D/scarf", {{"width", "300"}, {"height", "5"}})).width(), 300);
  EXPECT_EQ(get(*s, "/api/recordings/D/scarf", {{"width", "0"}}).status, 400);
}

TEST(Server, AnnotationLifecycle) {
  auto s = make_session();
  auto r = send(*s, "POST", "/api/recordings/E/annotations", annotation_body(1, 3, "A"));
  ASSERT_EQ(r.status, 201);
  auto j = json::parse(r.body);
  const auto id = j["id"].get<std::int64_t>();
  EXPECT_EQ(j["revision"], 1);
  EXPECT_TRUE(j["recommendations"].is_array());

  const auto list = get(*s, "/api/recordings/E/annotations");
  EXPECT_EQ(list.headers.at("X-Revision"), "1");
  EXPECT_EQ(list.body, s->annotations().to_json("E"));
  const auto listed = json::parse(list.body)["annotations"];
  ASSERT_EQ(listed.size(), 1u);
  EXPECT_EQ(listed[0]["color"], "#e6194b");
  EXPECT_EQ(listed[0]["author"], "t");

  // Same span and label again: conflict. Stale base revision: conflict.
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", annotation_body(1, 3, "A")).status, 409);
  auto stale = json::parse(annotation_body(4, 4, "B"));
  stale["base_revision"] = 0;
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", stale.dump()).status, 409);
  stale["base_revision"] = 1;
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", stale.dump()).status, 201);

  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", annotation_body(3, 1, "A")).status, 400);
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", annotation_body(0, 9999, "A")).status, 400);
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", annotation_body(0, 0, "C")).status, 400);
  auto coloured = json::parse(annotation_body(0, 0, "C"));
  coloured["color"] = "#123456";
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", coloured.dump()).status, 201);
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/annotations", R"({"label": "A"})").status, 400);
  EXPECT_EQ(send(*s, "POST", "/api/recordings/nope/annotations", annotation_body(0, 0, "A")).status, 404);

  const auto del = send(*s, "DELETE", "/api/recordings/E/annotations/" + std::to_string(id), "");
  EXPECT_EQ(del.status, 204);
  EXPECT_TRUE(del.body.empty());
  EXPECT_EQ(send(*s, "DELETE", "/api/recordings/E/annotations/" + std::to_string(id), "").status, 404);
  EXPECT_EQ(send(*s, "DELETE", "/api/recordings/E/annotations", "").status, 400);
  EXPECT_EQ(json::parse(get(*s, "/api/recordings/E/annotations").body)["annotations"].size(), 2u);
}

TEST(Server, AnnotationWriteTriggersCachedRecommendations) {
  auto s = make_session();
  const auto fx = fixations_of(recordings().recs[0]);
  const auto first = fixation_span(fx, recordings().planted[0]);
  const auto second = fixation_span(fx, recordings().planted[1]);
  EXPECT_EQ(get(*s, "/api/recordings/E/recommendations").body, "[]");

  const auto r = send(*s, "POST", "/api/recordings/E/annotations", annotation_body(first.first, first.second, "A"));
  ASSERT_EQ(r.status, 201);
  const auto recs = json::parse(r.body)["recommendations"];
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["start_fixation"], first.first);
  EXPECT_EQ(recs[0]["similarity"], 1.0);
  EXPECT_EQ(recs[1]["start_fixation"], second.first);
  EXPECT_EQ(recs[1]["end_fixation"], second.second);
  EXPECT_EQ(recs[1]["thumbnail_url"], "/api/recordings/E/thumbnail/" + std::to_string(second.first));
  EXPECT_EQ(json::parse(get(*s, "/api/recordings/E/recommendations").body), recs);

  // Explicit recommend for a single fixation yields window-1 candidates.
  const auto single = json::parse(
      send(*s, "POST", "/api/recordings/E/recommend", json{{"start_fixation", 0}, {"end_fixation", 0}}.dump()).body);
  ASSERT_FALSE(single.empty());
  for (const auto& c : single) EXPECT_EQ(c["start_fixation"], c["end_fixation"]);
  EXPECT_EQ(send(*s, "POST", "/api/recordings/E/recommend", R"({"start_fixation": 2, "end_fixation": 1})").status,
            400);

  const auto id = json::parse(r.body)["id"].get<int>();
  ASSERT_EQ(send(*s, "DELETE", "/api/recordings/E/annotations/" + std::to_string(id), "").status, 204);
  EXPECT_EQ(get(*s, "/api/recordings/E/recommendations").body, "[]");
}

TEST(Server, QueryEndpoint) {
  auto s = make_session();
  const auto fx = fixations_of(recordings().recs[0]);
  const auto first = fixation_span(fx, recordings().planted[0]);
  json body{{"recording_id", "E"}, {"start_fixation", first.first}, {"end_fixation", first.second}, {"threshold", 0.8}};
  const auto r = send(*s, "POST", "/api/query", body.dump());
  ASSERT_EQ(r.status, 200);
  const auto results = query_results_from_json(r.body);
  ASSERT_GE(results.size(), 2u);
  EXPECT_EQ(results[0].recording_id, "E");
  EXPECT_EQ(results[0].span.start_fixation, first.first);
  EXPECT_EQ(results[0].similarity, 1.0);

  body["targets"] = {"D"};
  for (const auto& res : query_results_from_json(send(*s, "POST", "/api/query", body.dump()).body))
    EXPECT_EQ(res.recording_id, "D");
  body["targets"] = {"X"};
  EXPECT_EQ(send(*s, "POST", "/api/query", body.dump()).status, 404);
  body["targets"] = {1};
  EXPECT_EQ(send(*s, "POST", "/api/query", body.dump()).status, 400);
  body.erase("targets");
  body["threshold"] = 1.5;
  EXPECT_EQ(send(*s, "POST", "/api/query", body.dump()).status, 400);
  body["threshold"] = 0.8;
  body["end_fixation"] = 9999;
  EXPECT_EQ(send(*s, "POST", "/api/query", body.dump()).status, 400);
  body["recording_id"] = "X";
  EXPECT_EQ(send(*s, "POST", "/api/query", body.dump()).status, 404);
}

TEST(Server, LabelsGetAndPut) {
  auto s = make_session();
  EXPECT_EQ(label_scheme_from_json(get(*s, "/api/labels").body), two_labels());
  EXPECT_EQ(send(*s, "PUT", "/api/labels", "{").status, 400);
  LabelScheme dup = two_labels();
  dup.labels[1].label = "A";
  EXPECT_EQ(send(*s, "PUT", "/api/labels", label_scheme_to_json(dup)).status, 400);
  EXPECT_EQ(label_scheme_from_json(get(*s, "/api/labels").body), two_labels());
}

TEST(Server, SelectionsArePerClient) {
  auto s = make_session();
  const std::string sel = json{{"recording_id", "E"}, {"anchor_fixation", 2}, {"extent", 3}}.dump();
  EXPECT_EQ(send(*s, "PUT", "/api/selection", sel).status, 400);
  ASSERT_EQ(send(*s, "PUT", "/api/selection", sel, {{"x-client-token", "alice"}}).status, 200);
  EXPECT_EQ(json::parse(get(*s, "/api/selection", {}, {{"x-client-token", "alice"}}).body), json::parse(sel));
  EXPECT_EQ(get(*s, "/api/selection", {}, {{"x-client-token", "bob"}}).status, 404);
  const std::string out_of_range = json{{"recording_id", "E"}, {"anchor_fixation", 0}, {"extent", 9999}}.dump();
  EXPECT_EQ(send(*s, "PUT", "/api/selection", out_of_range, {{"x-client-token", "bob"}}).status, 400);
  const std::string unknown = json{{"recording_id", "Q"}, {"anchor_fixation", 0}, {"extent", 1}}.dump();
  EXPECT_EQ(send(*s, "PUT", "/api/selection", unknown, {{"x-client-token", "bob"}}).status, 404);
}

TEST(Server, ConcurrentConflictingWritesYieldOneCreated) {
  auto s = make_session();
  std::atomic<int> created{0}, conflicts{0}, other{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      const int status = send(*s, "POST", "/api/recordings/D/annotations", annotation_body(0, 1, "A")).status;
      (status == 201 ? created : status == 409 ? conflicts : other)++;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(created, 1);
  EXPECT_EQ(conflicts, 7);
  EXPECT_EQ(other, 0);

  // Non-conflicting concurrent writes all succeed with distinct ids.
  std::vector<std::int64_t> ids(4);
  threads.clear();
  for (int i = 0; i < 4; ++i)
    threads.emplace_back([&, i] {
      const auto r = send(*s, "POST", "/api/recordings/D/annotations", annotation_body(i, i, "B"));
      ids[i] = r.status == 201 ? json::parse(r.body)["id"].get<std::int64_t>() : -1;
    });
  for (auto& t : threads) t.join();
  std::sort(ids.begin(), ids.end());
  EXPECT_GE(ids[0], 1);
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
}

TEST(Server, AnnotationsPersistAcrossSessions) {
  testsupport::TempDir dir;
  ProjectConfig config;
  config.annotations_dir = dir / "ann";
  config.labels = dir / "labels.json";
  {
    auto s = make_session(config);
    ASSERT_EQ(send(*s, "POST", "/api/recordings/D/annotations", annotation_body(1, 2, "B")).status, 201);
  }
  ASSERT_TRUE(std::filesystem::exists(dir / "ann" / "D.json"));
  ASSERT_TRUE(std::filesystem::exists(dir / "labels.json"));
  Session again(config, recordings().recs);
  EXPECT_EQ(label_scheme_from_json(get(again, "/api/labels").body), two_labels());
  const auto anns = json::parse(get(again, "/api/recordings/D/annotations").body)["annotations"];
  ASSERT_EQ(anns.size(), 1u);
  EXPECT_EQ(anns[0]["label"], "B");
  EXPECT_EQ(anns[0]["start_fixation"], 1);
}

TEST(HttpServerLive, ServesOverHttp) {
  auto s = make_session();
  HttpServer server(*s);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  httplib::Result list;
  for (int attempt = 0; attempt < 50 && !list; ++attempt) {
    list = client.Get("/api/recordings");
    if (!list) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  ASSERT_TRUE(list);
  EXPECT_EQ(list->status, 200);
  EXPECT_EQ(json::parse(list->body).size(), 2u);
  EXPECT_EQ(list->get_header_value("Content-Type"), "application/json");

  const auto posted = client.Post("/api/recordings/D/annotations", annotation_body(0, 0, "A"), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 201);
  const auto dup = client.Post("/api/recordings/D/annotations", annotation_body(0, 0, "A"), "application/json");
  EXPECT_EQ(dup->status, 409);

  const auto image = client.Get("/api/recordings/D/spiral?stride=2&highlights=0");
  ASSERT_TRUE(image);
  EXPECT_EQ(image->status, 200);
  EXPECT_EQ(image->get_header_value("Content-Type"), "image/png");
  const std::string tag = image->get_header_value("ETag");
  const auto cached = client.Get("/api/recordings/D/spiral?stride=2&highlights=0", {{"If-None-Match", tag}});
  EXPECT_EQ(cached->status, 304);

  const auto sel = client.Put("/api/selection", {{"X-Client-Token", "c1"}},
                              json{{"recording_id", "D"}, {"anchor_fixation", 0}, {"extent", 1}}.dump(),
                              "application/json");
  EXPECT_EQ(sel->status, 200);
  EXPECT_EQ(client.Get("/api/selection", {{"X-Client-Token", "c1"}})->status, 200);

  const auto id = json::parse(posted->body)["id"].get<int>();
  EXPECT_EQ(client.Delete("/api/recordings/D/annotations/" + std::to_string(id))->status, 204);
  EXPECT_EQ(client.Get("/api/recordings/missing")->status, 404);

  server.stop();
  loop.join();
}

TEST(HttpServerLive, BindFailureThrows) {
  auto s = make_session();
  HttpServer server(*s);
  EXPECT_THROW(server.bind("256.0.0.1", 0), std::runtime_error);
  EXPECT_THROW(server.bind("256.0.0.1", 8080), std::runtime_error);
}
