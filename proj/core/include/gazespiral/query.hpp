#pragma once

#include <span>
#include <string>
#include <vector>

#include "gazespiral/fixation.hpp"
#include "gazespiral/metrics.hpp"

namespace gazespiral {

/// Inclusive range of fixation indices in one recording.
struct QuerySpan {
  std::string recording_id;
  int start_fixation = 0;
  int end_fixation = 0;

  int length() const { return end_fixation - start_fixation + 1; }
  friend bool operator==(const QuerySpan&, const QuerySpan&) = default;
};

struct QueryResult {
  std::string recording_id;
  QuerySpan span;
  double similarity = 0.0;  // 1 - mean positional cosine distance
  int rank = 0;             // 1-based, global over all targets
};

struct QueryOptions {
  double threshold = 0.8;
  int max_results = 10;  // per target recording
};

FeatureSequence feature_sequence(std::string recording_id, std::span<const Fixation> fixations);

/// 1 - mean cosine distance between query[p] and target[offset + p].
double window_similarity(std::span<const FeatureVector> query, std::span<const FeatureVector> target,
                         std::size_t offset);

/// Slides the query window over every target with step 1, keeps greedy
/// non-overlapping maxima per target and returns hits at or above the
/// threshold, best first. Targets shorter than the query yield nothing.
std::vector<QueryResult> find_similar_spans(std::span<const FeatureVector> query,
                                            std::span<const FeatureSequence> targets, const QueryOptions& opts = {});

/// As above with the query features taken from the target whose id matches
/// `q.recording_id`. Throws ParameterError for an unknown id or invalid span.
std::vector<QueryResult> find_similar_spans(const QuerySpan& q, std::span<const FeatureSequence> targets,
                                            const QueryOptions& opts = {});

/// Window-length-1 search within one recording.
std::vector<QueryResult> candidate_fixations(const QuerySpan& q, const FeatureSequence& rec,
                                             const QueryOptions& opts = {});

/// `[{recording_id,start_fixation,end_fixation,similarity}, ...]` in rank order.
std::string query_results_to_json(std::span<const QueryResult> results);
std::vector<QueryResult> query_results_from_json(const std::string& text);

}  // namespace gazespiral
