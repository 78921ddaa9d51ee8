#include "gazespiral/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gazespiral/parallel.hpp"
#include "gazespiral/spiral.hpp"

namespace gazespiral {

using nlohmann::json;
using nlohmann::ordered_json;

std::string HttpRequest::param(const std::string& name, const std::string& fallback) const {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

std::string HttpRequest::header(const std::string& name) const {
  const auto it = headers.find(name);
  return it == headers.end() ? std::string() : it->second;
}

std::string etag_for(const std::string& body) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : body) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "\"%016llx\"", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr std::size_t kMaxCachedImages = 64;

// Thrown inside handlers and mapped to a status code by handle().
struct HttpError {
  int status;
  std::string message;
};

HttpResponse json_response(int status, std::string body) {
  HttpResponse r;
  r.status = status;
  r.body = std::move(body);
  return r;
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, ordered_json{{"error", message}, {"status", status}}.dump());
}

HttpResponse png_response(std::string bytes, const HttpRequest& req) {
  HttpResponse r;
  r.content_type = "image/png";
  const std::string tag = etag_for(bytes);
  r.headers["ETag"] = tag;
  r.headers["Cache-Control"] = "no-cache";
  if (req.header("if-none-match") == tag) {
    r.status = 304;
    return r;
  }
  r.body = std::move(bytes);
  return r;
}

std::string png_string(const Image& img) {
  const auto bytes = encode_png(img);
  return std::string(bytes.begin(), bytes.end());
}

json parse_body(const HttpRequest& req) {
  try {
    const json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{400, std::string("malformed JSON: ") + e.what()};
  }
}

int to_int(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw HttpError{400, std::string("invalid ") + what + ": '" + text + "'"};
}

double to_double(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw HttpError{400, std::string("invalid ") + what + ": '" + text + "'"};
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

// "3-5,9" -> fixation spans.
std::vector<QuerySpan> parse_highlights(const std::string& text, const std::string& id) {
  std::vector<QuerySpan> out;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-');
    QuerySpan s{id, 0, 0};
    if (dash == std::string::npos) {
      s.start_fixation = s.end_fixation = to_int(part, "highlight");
    } else {
      s.start_fixation = to_int(part.substr(0, dash), "highlight");
      s.end_fixation = to_int(part.substr(dash + 1), "highlight");
    }
    out.push_back(s);
  }
  return out;
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, std::string("missing or invalid field '") + key + "'"};
  }
}

}  // namespace

// --- session ------------------------------------------------------------------------

Session::Session(ProjectConfig config, std::vector<Recording> recordings) : config_(std::move(config)) {
  entries_.resize(recordings.size());
  const HistogramFeatureExtractor extractor(config_.patch_px);
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    if (index_.count(recordings[i].id)) throw ParameterError("duplicate recording id " + recordings[i].id);
    index_[recordings[i].id] = i;
    entries_[i].recording = std::move(recordings[i]);
  }
  for (Entry& e : entries_) {
    e.fixations = detect_fixations(e.recording, config_.fixation, extractor);
    e.features = feature_sequence(e.recording.id, e.fixations);
    try {
      e.quality = data_quality(e.recording);
    } catch (const DataError&) {
      e.quality_ok = false;
    }
    store_.register_recording(e.recording.id, static_cast<int>(e.fixations.size()));
    if (!config_.annotations_dir.empty()) {
      const auto file = config_.annotations_dir / (e.recording.id + ".json");
      if (std::filesystem::exists(file)) store_.load(file);
    }
  }
  if (!config_.labels.empty() && std::filesystem::exists(config_.labels)) {
    std::ifstream in(config_.labels);
    labels_ = label_scheme_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  }
}

std::unique_ptr<Session> Session::load(const ProjectConfig& config) {
  std::vector<Recording> recs(config.recordings.size());
  parallel_for(recs.size(), [&](std::size_t i) { recs[i] = load_recording(config.recordings[i]); });
  return std::make_unique<Session>(config, std::move(recs));
}

std::vector<std::string> Session::recording_ids() const {
  std::vector<std::string> ids;
  for (const Entry& e : entries_) ids.push_back(e.recording.id);
  return ids;
}

const Session::Entry* Session::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

HttpResponse Session::handle(const HttpRequest& request) {
  try {
    return route(request);
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const ConflictError& e) {
    return error_response(409, e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  } catch (const ParameterError& e) {
    return error_response(400, e.what());
  } catch (const ParseError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Session::route(const HttpRequest& req) {
  const auto parts = split(req.path, '/');
  const std::string& m = req.method;
  if (parts.empty() || parts[0] != "api") throw HttpError{404, "no such endpoint: " + req.path};

  if (parts.size() == 2 && parts[1] == "recordings" && m == "GET") return list_recordings();
  if (parts.size() == 2 && parts[1] == "query" && m == "POST") return query(req);
  if (parts.size() == 2 && parts[1] == "labels") {
    if (m == "GET") return get_labels();
    if (m == "PUT") return put_labels(req);
    throw HttpError{405, "method not allowed"};
  }
  if (parts.size() == 2 && parts[1] == "selection") {
    if (m == "GET") return get_selection(req);
    if (m == "PUT") return put_selection(req);
    throw HttpError{405, "method not allowed"};
  }
  if (parts.size() >= 3 && parts[1] == "recordings") {
    const Entry* e = find(parts[2]);
    if (!e) throw HttpError{404, "unknown recording: " + parts[2]};
    if (parts.size() == 3 && m == "GET") return recording_summary(*e);
    const std::string& what = parts[3 < parts.size() ? 3 : 0];
    if (parts.size() == 4 && m == "GET") {
      if (what == "quality") return quality(*e);
      if (what == "fixations") return fixations(*e);
      if (what == "spiral") return spiral(*e, req);
      if (what == "scarf") return scarf(*e, req);
      if (what == "annotations") return list_annotations(*e);
      if (what == "recommendations") return recommendations(*e);
    }
    if (parts.size() == 5 && m == "GET" && what == "thumbnail") return thumbnail(*e, parts[4], req);
    if (what == "annotations" && m == "POST" && parts.size() == 4) return add_annotation(*e, req);
    if (what == "annotations" && m == "DELETE") {
      if (parts.size() == 5) return delete_annotation(*e, parts[4]);
      if (parts.size() == 4 && !req.param("id").empty()) return delete_annotation(*e, req.param("id"));
      throw HttpError{400, "annotation id required"};
    }
    if (what == "recommend" && m == "POST" && parts.size() == 4) return recommend(*e, req);
  }
  throw HttpError{404, "no such endpoint: " + m + " " + req.path};
}

HttpResponse Session::list_recordings() const {
  ordered_json arr = ordered_json::array();
  for (const Entry& e : entries_) {
    const FrameSource& f = e.recording.frames;
    arr.push_back({{"id", e.recording.id},
                   {"frame_count", f.frame_count()},
                   {"fps", f.fps()},
                   {"width", f.width()},
                   {"height", f.height()},
                   {"fixation_count", e.fixations.size()},
                   {"loss_fraction", e.quality_ok ? ordered_json(e.quality.loss_fraction) : ordered_json()},
                   {"annotation_count", store_.list(e.recording.id).size()}});
  }
  return json_response(200, arr.dump());
}

HttpResponse Session::recording_summary(const Entry& e) const {
  const FrameSource& f = e.recording.frames;
  ordered_json j{{"id", e.recording.id},
                 {"frames",
                  {{"kind", to_string(f.kind())},
                   {"width", f.width()},
                   {"height", f.height()},
                   {"fps", f.fps()},
                   {"frame_count", f.frame_count()}}},
                 {"fixation_count", e.fixations.size()},
                 {"annotation_revision", store_.revision(e.recording.id)},
                 {"slitscan", {{"mode", to_string(config_.slitscan.mode)}, {"height", config_.slitscan.height}}},
                 {"spiral", {{"a", config_.spiral.a}, {"k", config_.spiral.k}, {"stride", config_.slitscan.stride}}}};
  return json_response(200, j.dump());
}

HttpResponse Session::quality(const Entry& e) const {
  if (!e.quality_ok) throw HttpError{422, "empty recording"};
  return json_response(200, data_quality_to_json(e.quality));
}

HttpResponse Session::fixations(const Entry& e) const { return json_response(200, fixations_to_json(e.fixations)); }

HttpResponse Session::thumbnail(const Entry& e, const std::string& index, const HttpRequest& req) {
  const int i = to_int(index, "fixation index");
  if (i < 0 || i >= static_cast<int>(e.fixations.size())) throw HttpError{404, "fixation out of range"};
  const int size = req.param("size").empty() ? kDefaultPatchPx : to_int(req.param("size"), "size");
  if (size < 1 || size > 1024) throw HttpError{400, "size must be in [1, 1024]"};
  return png_response(png_string(make_thumbnail(e.recording, e.fixations, i, size).pixels), req);
}

std::shared_ptr<const SlitscanSequence> Session::sequence(const Entry& e, int stride) {
  const std::string key = e.recording.id + "|" + std::to_string(stride);
  std::promise<std::shared_ptr<const SlitscanSequence>> promise;
  std::shared_future<std::shared_ptr<const SlitscanSequence>> future;
  bool owner = false;
  {
    std::lock_guard lock(cache_mutex_);
    auto it = sequences_.find(key);
    if (it == sequences_.end()) {
      future = promise.get_future().share();
      sequences_.emplace(key, future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(std::make_shared<const SlitscanSequence>(
          extract_sequence(e.recording, config_.slitscan.mode, config_.slitscan.height, stride)));
    } catch (...) {
      {
        std::lock_guard lock(cache_mutex_);
        sequences_.erase(key);
      }
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

HttpResponse Session::spiral(const Entry& e, const HttpRequest& req) {
  SpiralParams params = config_.spiral;
  if (!req.param("a").empty()) params.a = to_double(req.param("a"), "a");
  if (!req.param("k").empty()) params.k = to_double(req.param("k"), "k");
  if (!req.param("h").empty()) params.H_px = to_int(req.param("h"), "h");
  params.stride = req.param("stride").empty() ? config_.slitscan.stride : to_int(req.param("stride"), "stride");
  if (params.stride < 1) throw HttpError{400, "stride must be >= 1"};
  if (params.H_px < 1 || params.H_px > 400) throw HttpError{400, "h must be in [1, 400]"};
  params.validate();
  const auto highlights = parse_highlights(req.param("highlights"), e.recording.id);
  for (const auto& h : highlights)
    if (h.start_fixation < 0 || h.end_fixation < h.start_fixation ||
        h.end_fixation >= static_cast<int>(e.fixations.size()))
      throw HttpError{400, "highlight span out of range"};

  // Consistent snapshot: retry if a write lands between reading the revision and the list.
  std::uint64_t revision = 0;
  std::vector<Annotation> annotations;
  do {
    revision = store_.revision(e.recording.id);
    annotations = store_.list(e.recording.id);
  } while (revision != store_.revision(e.recording.id));
  LabelScheme scheme;
  {
    std::shared_lock lock(labels_mutex_);
    scheme = labels_;
  }
  std::ostringstream key;
  key.precision(17);
  key << e.recording.id << "|a=" << params.a << "|k=" << params.k << "|h=" << params.H_px << "|s=" << params.stride
      << "|hl=" << req.param("highlights") << "|rev=" << revision
      << "|labels=" << etag_for(label_scheme_to_json(scheme));

  std::promise<std::shared_ptr<const std::string>> promise;
  std::shared_future<std::shared_ptr<const std::string>> future;
  bool owner = false;
  {
    std::lock_guard lock(cache_mutex_);
    auto it = images_.find(key.str());
    if (it == images_.end()) {
      if (images_.size() >= kMaxCachedImages) images_.clear();
      future = promise.get_future().share();
      images_.emplace(key.str(), future);
      owner = true;
    } else {
      future = it->second;
    }
  }
  if (owner) {
    try {
      const auto seq = sequence(e, params.stride);
      std::vector<Annotation> known;
      for (const Annotation& a : annotations) {
        try {
          scheme.symbol_of(a.label);
          known.push_back(a);
        } catch (const NotFoundError&) {
        }
      }
      const OverlaySpec overlay = make_overlay(e.fixations, known, scheme, highlights, params.stride, seq->size());
      promise.set_value(std::make_shared<const std::string>(png_string(render_spiral(*seq, params, overlay))));
    } catch (...) {
      {
        std::lock_guard lock(cache_mutex_);
        images_.erase(key.str());
      }
      promise.set_exception(std::current_exception());
    }
  }
  return png_response(*future.get(), req);
}

HttpResponse Session::scarf(const Entry& e, const HttpRequest& req) {
  const int frames = e.recording.frames.frame_count();
  const int width = req.param("width").empty() ? std::min(frames, 1200) : to_int(req.param("width"), "width");
  const int height = req.param("height").empty() ? 24 : to_int(req.param("height"), "height");
  if (width < 1 || width > 20000 || height < 1 || height > 1000) throw HttpError{400, "scarf size out of range"};
  LabelScheme scheme;
  {
    std::shared_lock lock(labels_mutex_);
    scheme = labels_;
  }
  const auto annotations = store_.list(e.recording.id);
  std::vector<Annotation> known;
  for (const Annotation& a : annotations) {
    try {
      scheme.symbol_of(a.label);
      known.push_back(a);
    } catch (const NotFoundError&) {
    }
  }
  return png_response(png_string(export_scarf(e.fixations, frames, known, scheme, width, height)), req);
}

HttpResponse Session::list_annotations(const Entry& e) const {
  HttpResponse r = json_response(200, store_.to_json(e.recording.id));
  r.headers["X-Revision"] = std::to_string(store_.revision(e.recording.id));
  return r;
}

void Session::persist(const std::string& recording_id) const {
  if (config_.annotations_dir.empty()) return;
  std::filesystem::create_directories(config_.annotations_dir);
  store_.save(recording_id, config_.annotations_dir / (recording_id + ".json"));
}

HttpResponse Session::add_annotation(const Entry& e, const HttpRequest& req) {
  const json body = parse_body(req);
  Annotation a;
  a.recording_id = e.recording.id;
  a.start_fixation = field<int>(body, "start_fixation");
  a.end_fixation = field<int>(body, "end_fixation");
  a.label = field<std::string>(body, "label");
  a.author = body.value("author", std::string());
  a.created_at = body.value("created_at", std::string());
  {
    std::shared_lock lock(labels_mutex_);
    if (body.contains("color")) {
      a.color = parse_hex_color(field<std::string>(body, "color"));
    } else {
      try {
        a.color = labels_.color_of_symbol(labels_.symbol_of(a.label));
      } catch (const NotFoundError&) {
        throw HttpError{400, "label '" + a.label + "' is not in the label scheme and no color was given"};
      }
    }
  }
  std::optional<std::uint64_t> base;
  if (body.contains("base_revision")) base = field<std::uint64_t>(body, "base_revision");

  std::lock_guard writer(*e.writer);
  const std::int64_t id = store_.add(a, base);
  persist(e.recording.id);
  const std::string recs = recommend_json(e, a.start_fixation, a.end_fixation);
  {
    std::lock_guard lock(recommend_mutex_);
    recommendations_[e.recording.id] = recs;
  }
  ordered_json out{{"id", id}, {"revision", store_.revision(e.recording.id)}};
  out["recommendations"] = ordered_json::parse(recs);
  return json_response(201, out.dump());
}

HttpResponse Session::delete_annotation(const Entry& e, const std::string& id_text) {
  const std::int64_t id = to_int(id_text, "annotation id");
  std::lock_guard writer(*e.writer);
  if (!store_.remove(e.recording.id, id)) throw HttpError{404, "no annotation with id " + id_text};
  persist(e.recording.id);
  {
    std::lock_guard lock(recommend_mutex_);
    recommendations_.erase(e.recording.id);
  }
  HttpResponse r;
  r.status = 204;
  r.content_type.clear();
  return r;
}

std::string Session::recommend_json(const Entry& e, int start_fixation, int end_fixation) const {
  const QuerySpan span{e.recording.id, start_fixation, end_fixation};
  const auto results = find_similar_spans(span, std::span<const FeatureSequence>(&e.features, 1), config_.query);
  ordered_json arr = ordered_json::array();
  for (const QueryResult& r : results)
    arr.push_back({{"recording_id", r.recording_id},
                   {"start_fixation", r.span.start_fixation},
                   {"end_fixation", r.span.end_fixation},
                   {"similarity", r.similarity},
                   {"thumbnail_url", "/api/recordings/" + r.recording_id + "/thumbnail/" +
                                         std::to_string(r.span.start_fixation)}});
  return arr.dump();
}

HttpResponse Session::recommendations(const Entry& e) const {
  std::lock_guard lock(recommend_mutex_);
  const auto it = recommendations_.find(e.recording.id);
  return json_response(200, it == recommendations_.end() ? "[]" : it->second);
}

HttpResponse Session::recommend(const Entry& e, const HttpRequest& req) {
  const json body = parse_body(req);
  const int s = field<int>(body, "start_fixation");
  const int t = field<int>(body, "end_fixation");
  if (s < 0 || t < s || t >= static_cast<int>(e.fixations.size())) throw HttpError{400, "invalid selection span"};
  return json_response(200, recommend_json(e, s, t));
}

HttpResponse Session::query(const HttpRequest& req) const {
  const json body = parse_body(req);
  QuerySpan q{field<std::string>(body, "recording_id"), field<int>(body, "start_fixation"),
              field<int>(body, "end_fixation")};
  const Entry* source = find(q.recording_id);
  if (!source) throw HttpError{404, "unknown recording: " + q.recording_id};
  if (q.start_fixation < 0 || q.end_fixation < q.start_fixation ||
      q.end_fixation >= static_cast<int>(source->fixations.size()))
    throw HttpError{400, "invalid query span"};
  QueryOptions opts = config_.query;
  if (body.contains("threshold")) opts.threshold = field<double>(body, "threshold");
  if (body.contains("max_results")) opts.max_results = field<int>(body, "max_results");
  if (opts.threshold < 0.0 || opts.threshold > 1.0) throw HttpError{400, "threshold must be in [0, 1]"};

  std::vector<FeatureSequence> targets;
  if (body.contains("targets")) {
    for (const auto& id : body.at("targets")) {
      if (!id.is_string()) throw HttpError{400, "targets must be recording ids"};
      const Entry* t = find(id.get<std::string>());
      if (!t) throw HttpError{404, "unknown recording: " + id.get<std::string>()};
      targets.push_back(t->features);
    }
  } else {
    for (const Entry& e : entries_) targets.push_back(e.features);
  }
  const std::vector<FeatureVector> query(source->features.items.begin() + q.start_fixation,
                                         source->features.items.begin() + q.end_fixation + 1);
  return json_response(200, query_results_to_json(find_similar_spans(query, targets, opts)));
}

HttpResponse Session::get_labels() const {
  std::shared_lock lock(labels_mutex_);
  return json_response(200, label_scheme_to_json(labels_));
}

HttpResponse Session::put_labels(const HttpRequest& req) {
  LabelScheme scheme = label_scheme_from_json(req.body);
  std::unique_lock lock(labels_mutex_);
  labels_ = std::move(scheme);
  if (!config_.labels.empty()) write_file_atomic(config_.labels, label_scheme_to_json(labels_));
  return json_response(200, label_scheme_to_json(labels_));
}

HttpResponse Session::get_selection(const HttpRequest& req) const {
  const std::string token = req.header("x-client-token");
  if (token.empty()) throw HttpError{400, "X-Client-Token header required"};
  std::lock_guard lock(selection_mutex_);
  const auto it = selections_.find(token);
  if (it == selections_.end()) throw HttpError{404, "no selection for this client"};
  return json_response(200, it->second);
}

HttpResponse Session::put_selection(const HttpRequest& req) {
  const std::string token = req.header("x-client-token");
  if (token.empty()) throw HttpError{400, "X-Client-Token header required"};
  const json body = parse_body(req);
  const std::string id = field<std::string>(body, "recording_id");
  const int anchor = field<int>(body, "anchor_fixation");
  const int extent = field<int>(body, "extent");
  const Entry* e = find(id);
  if (!e) throw HttpError{404, "unknown recording: " + id};
  if (anchor < 0 || extent < 1 || anchor + extent > static_cast<int>(e->fixations.size()))
    throw HttpError{400, "selection out of range"};
  const std::string text =
      ordered_json{{"recording_id", id}, {"anchor_fixation", anchor}, {"extent", extent}}.dump();
  std::lock_guard lock(selection_mutex_);
  selections_[token] = text;
  return json_response(200, text);
}

// --- HTTP front end ------------------------------------------------------------------

struct HttpServer::Impl {
  Session& session;
  httplib::Server server;

  explicit Impl(Session& s) : session(s) {
    auto handler = [this](const httplib::Request& in, httplib::Response& out) {
      HttpRequest req;
      req.method = in.method;
      req.path = in.path;
      for (const auto& [k, v] : in.params) req.params.emplace(k, v);
      for (const auto& [k, v] : in.headers) {
        std::string name = k;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        req.headers[name] = v;
      }
      req.body = in.body;
      const HttpResponse res = session.handle(req);
      out.status = res.status;
      for (const auto& [k, v] : res.headers) out.set_header(k, v);
      if (!res.content_type.empty() && res.status != 304 && res.status != 204)
        out.set_content(res.body, res.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
  }
};

HttpServer::HttpServer(Session& session) : impl_(std::make_unique<Impl>(session)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw std::runtime_error("cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace gazespiral
