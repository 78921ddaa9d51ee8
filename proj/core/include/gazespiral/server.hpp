#pragma once

#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gazespiral/annotate.hpp"
#include "gazespiral/fixation.hpp"
#include "gazespiral/ingest.hpp"
#include "gazespiral/project.hpp"
#include "gazespiral/query.hpp"
#include "gazespiral/slitscan.hpp"

namespace gazespiral {

struct HttpRequest {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> params;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;

  std::string param(const std::string& name, const std::string& fallback = {}) const;
  std::string header(const std::string& name) const;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Loaded project state behind the HTTP API. All public members are safe to
/// call concurrently.
class Session {
 public:
  /// Loads every manifest, detects fixations and reads existing annotation files.
  static std::unique_ptr<Session> load(const ProjectConfig& config);
  /// In-memory recordings; annotation files are used only if the config names a directory.
  Session(ProjectConfig config, std::vector<Recording> recordings);

  HttpResponse handle(const HttpRequest& request);

  const ProjectConfig& config() const { return config_; }
  AnnotationStore& annotations() { return store_; }
  std::vector<std::string> recording_ids() const;

 private:
  struct Entry {
    Recording recording;
    std::vector<Fixation> fixations;
    FeatureSequence features;
    DataQualityReport quality;
    bool quality_ok = true;
    std::unique_ptr<std::mutex> writer = std::make_unique<std::mutex>();
  };

  const Entry* find(const std::string& id) const;
  HttpResponse route(const HttpRequest& request);

  HttpResponse list_recordings() const;
  HttpResponse recording_summary(const Entry& e) const;
  HttpResponse quality(const Entry& e) const;
  HttpResponse fixations(const Entry& e) const;
  HttpResponse thumbnail(const Entry& e, const std::string& index, const HttpRequest& req);
  HttpResponse spiral(const Entry& e, const HttpRequest& req);
  HttpResponse scarf(const Entry& e, const HttpRequest& req);
  HttpResponse list_annotations(const Entry& e) const;
  HttpResponse add_annotation(const Entry& e, const HttpRequest& req);
  HttpResponse delete_annotation(const Entry& e, const std::string& id);
  HttpResponse recommendations(const Entry& e) const;
  HttpResponse recommend(const Entry& e, const HttpRequest& req);
  HttpResponse query(const HttpRequest& req) const;
  HttpResponse get_labels() const;
  HttpResponse put_labels(const HttpRequest& req);
  HttpResponse get_selection(const HttpRequest& req) const;
  HttpResponse put_selection(const HttpRequest& req);

  std::string recommend_json(const Entry& e, int start_fixation, int end_fixation) const;
  std::shared_ptr<const SlitscanSequence> sequence(const Entry& e, int stride);
  void persist(const std::string& recording_id) const;

  ProjectConfig config_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  AnnotationStore store_;

  mutable std::shared_mutex labels_mutex_;
  LabelScheme labels_;

  std::mutex cache_mutex_;
  std::map<std::string, std::shared_future<std::shared_ptr<const SlitscanSequence>>> sequences_;
  std::map<std::string, std::shared_future<std::shared_ptr<const std::string>>> images_;

  mutable std::mutex recommend_mutex_;
  std::map<std::string, std::string> recommendations_;  // recording id -> last result JSON

  mutable std::mutex selection_mutex_;
  std::map<std::string, std::string> selections_;  // client token -> selection JSON
};

/// Strong validator for a response body.
std::string etag_for(const std::string& body);

/// cpp-httplib front end for a Session.
class HttpServer {
 public:
  explicit HttpServer(Session& session);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free port). Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gazespiral
