#include "gazespiral/query.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "gazespiral/parallel.hpp"

namespace gazespiral {

FeatureSequence feature_sequence(std::string recording_id, std::span<const Fixation> fixations) {
  FeatureSequence seq;
  seq.recording_id = std::move(recording_id);
  seq.items.reserve(fixations.size());
  for (const Fixation& f : fixations) seq.items.push_back(f.feature);
  return seq;
}

double window_similarity(std::span<const FeatureVector> query, std::span<const FeatureVector> target,
                         std::size_t offset) {
  if (query.empty() || offset + query.size() > target.size())
    throw ParameterError("window_similarity: window out of range");
  double total = 0.0;
  for (std::size_t p = 0; p < query.size(); ++p) total += cosine_distance(query[p], target[offset + p]);
  return 1.0 - total / static_cast<double>(query.size());
}

namespace {

void validate(const QueryOptions& opts) {
  if (!(opts.threshold >= 0.0 && opts.threshold <= 1.0)) throw ParameterError("threshold must be in [0, 1]");
  if (opts.max_results < 0) throw ParameterError("max_results must be >= 0");
}

std::vector<QueryResult> search_target(std::span<const FeatureVector> query, const FeatureSequence& target,
                                       const QueryOptions& opts) {
  std::vector<QueryResult> hits;
  const std::size_t w = query.size();
  if (w > target.items.size()) return hits;
  struct Window {
    std::size_t offset;
    double similarity;
  };
  std::vector<Window> windows;
  for (std::size_t off = 0; off + w <= target.items.size(); ++off) {
    const double s = window_similarity(query, target.items, off);
    if (s >= opts.threshold) windows.push_back({off, s});
  }
  std::stable_sort(windows.begin(), windows.end(),
                   [](const Window& a, const Window& b) { return a.similarity > b.similarity; });
  std::vector<bool> taken(target.items.size(), false);
  for (const Window& win : windows) {
    if (static_cast<int>(hits.size()) >= opts.max_results) break;
    if (std::any_of(taken.begin() + win.offset, taken.begin() + win.offset + w, [](bool t) { return t; })) continue;
    std::fill(taken.begin() + win.offset, taken.begin() + win.offset + w, true);
    QueryResult r;
    r.recording_id = target.recording_id;
    r.span = {target.recording_id, static_cast<int>(win.offset), static_cast<int>(win.offset + w - 1)};
    r.similarity = win.similarity;
    hits.push_back(std::move(r));
  }
  return hits;
}

}  // namespace

std::vector<QueryResult> find_similar_spans(std::span<const FeatureVector> query,
                                            std::span<const FeatureSequence> targets, const QueryOptions& opts) {
  if (query.empty()) throw ParameterError("empty query");
  validate(opts);
  std::vector<std::vector<QueryResult>> per_target(targets.size());
  parallel_for(targets.size(), [&](std::size_t t) { per_target[t] = search_target(query, targets[t], opts); });

  // Merge keeping target order and start order for equal similarities.
  std::vector<QueryResult> all;
  for (auto& hits : per_target) {
    std::sort(hits.begin(), hits.end(),
              [](const QueryResult& a, const QueryResult& b) { return a.span.start_fixation < b.span.start_fixation; });
    for (auto& h : hits) all.push_back(std::move(h));
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const QueryResult& a, const QueryResult& b) { return a.similarity > b.similarity; });
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<int>(i) + 1;
  return all;
}

std::vector<QueryResult> find_similar_spans(const QuerySpan& q, std::span<const FeatureSequence> targets,
                                            const QueryOptions& opts) {
  const auto source = std::find_if(targets.begin(), targets.end(),
                                   [&](const FeatureSequence& s) { return s.recording_id == q.recording_id; });
  if (source == targets.end()) throw ParameterError("unknown query recording: " + q.recording_id);
  if (q.start_fixation < 0 || q.end_fixation < q.start_fixation ||
      q.end_fixation >= static_cast<int>(source->items.size()))
    throw ParameterError("invalid query span");
  const std::vector<FeatureVector> query(source->items.begin() + q.start_fixation,
                                         source->items.begin() + q.end_fixation + 1);
  return find_similar_spans(query, targets, opts);
}

std::vector<QueryResult> candidate_fixations(const QuerySpan& q, const FeatureSequence& rec,
                                             const QueryOptions& opts) {
  if (q.length() != 1) throw ParameterError("candidate_fixations expects a single-fixation span");
  return find_similar_spans(q, std::span<const FeatureSequence>(&rec, 1), opts);
}

std::string query_results_to_json(std::span<const QueryResult> results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const QueryResult& r : results)
    j.push_back({{"recording_id", r.recording_id},
                 {"start_fixation", r.span.start_fixation},
                 {"end_fixation", r.span.end_fixation},
                 {"similarity", r.similarity}});
  return j.dump();
}

std::vector<QueryResult> query_results_from_json(const std::string& text) {
  std::vector<QueryResult> out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& item : j) {
      QueryResult r;
      r.recording_id = item.at("recording_id").get<std::string>();
      r.span = {r.recording_id, item.at("start_fixation").get<int>(), item.at("end_fixation").get<int>()};
      r.similarity = item.at("similarity").get<double>();
      r.rank = static_cast<int>(out.size()) + 1;
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("query results json: ") + e.what());
  }
  return out;
}

}  // namespace gazespiral
