#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gazespiral/fixation.hpp"

namespace gazespiral {

struct FeatureSequence {
  std::vector<FeatureVector> items;
  std::string recording_id;

  std::size_t size() const { return items.size(); }
};

/// AOI symbols; 0 is conventionally the background label.
struct SymbolSequence {
  std::vector<int> items;
  std::string recording_id;

  std::size_t size() const { return items.size(); }
  static SymbolSequence from_string(const std::string& s, std::string id = {});
};

using ScanpathSequence = std::variant<FeatureSequence, SymbolSequence>;

/// Symmetric, zero-diagonal, non-negative n x n matrix.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}
  /// Validates the invariants; throws DataError when they do not hold.
  static DistanceMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double v);
  std::vector<std::vector<double>> rows() const;
  /// Entries (i, j) with i < j, row by row.
  std::vector<double> upper_triangle() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// Gap costs for feature and AOI sequences.
inline constexpr double kFeatureGap = 0.5;
inline constexpr double kSymbolGap = 1.0;

/// 1 - u.v / (|u| |v|), clamped to [0, 1]. A zero vector is at distance 1 from anything.
double cosine_distance(const FeatureVector& u, const FeatureVector& v);

/// Substitution cost between element i of `a` and element j of `b`.
using CostFn = std::function<double(std::size_t i, std::size_t j)>;

namespace detail {
/// Full (n+1) x (m+1) global alignment table; boundary rows hold pure gap runs.
std::vector<std::vector<double>> levenshtein_table(std::size_t n, std::size_t m, const CostFn& sub, double gap);
double smith_waterman_score(std::size_t n, std::size_t m, const std::function<double(std::size_t, std::size_t)>& score,
                            double gap);
struct DtwResult {
  double cost = 0.0;        // summed local cost along the optimal path
  std::size_t length = 0;   // number of cells on that path
};
DtwResult dtw_path(std::size_t n, std::size_t m, const CostFn& cost);
}  // namespace detail

/// Minimal global alignment cost (substitution = cosine distance or 0/1, indel = gap).
double levenshtein(const FeatureSequence& a, const FeatureSequence& b, double gap = kFeatureGap);
double levenshtein(const SymbolSequence& a, const SymbolSequence& b, double gap = kSymbolGap);
/// levenshtein / max(|a|, |b|).
double levenshtein_normalized(const FeatureSequence& a, const FeatureSequence& b, double gap = kFeatureGap);
double levenshtein_normalized(const SymbolSequence& a, const SymbolSequence& b, double gap = kSymbolGap);

struct LocalAlignment {
  double score = 0.0;     // best local alignment score, >= 0
  double distance = 1.0;  // 1 - score / min(|a|, |b|), clamped to [0, 1]
};

/// Local alignment with match score 1 - 2 * cosine distance (features) or +1/-1 (symbols).
LocalAlignment smith_waterman(const FeatureSequence& a, const FeatureSequence& b, double gap = kFeatureGap);
LocalAlignment smith_waterman(const SymbolSequence& a, const SymbolSequence& b, double gap = kSymbolGap);

/// Dynamic time warping over steps {(1,0),(0,1),(1,1)}; path cost divided by path length.
/// Among equal-cost paths the longest one is used.
double dtw(const FeatureSequence& a, const FeatureSequence& b);
double dtw(const SymbolSequence& a, const SymbolSequence& b);
detail::DtwResult dtw_raw(const FeatureSequence& a, const FeatureSequence& b);

enum class AlignmentMethod { Levenshtein, SmithWaterman, Dtw };

const char* to_string(AlignmentMethod m);
AlignmentMethod alignment_method_from_string(const std::string& s);

struct AlignmentOptions {
  double feature_gap = kFeatureGap;
  double symbol_gap = kSymbolGap;
};

/// Normalized distance between two sequences of the same kind.
double sequence_distance(const ScanpathSequence& a, const ScanpathSequence& b, AlignmentMethod method,
                         const AlignmentOptions& options = {});

/// All pairwise normalized distances. Throws ParameterError for fewer than two
/// sequences or a mix of feature and symbol sequences.
DistanceMatrix pairwise_matrix(std::span<const ScanpathSequence> seqs, AlignmentMethod method,
                               const AlignmentOptions& options = {});

/// Pearson correlation of the strict upper triangles. Needs n >= 3.
double pearson(const DistanceMatrix& m1, const DistanceMatrix& m2);

/// `{n, method, options, values}`.
std::string distance_matrix_to_json(const DistanceMatrix& m, const std::string& method,
                                    const AlignmentOptions& options = {});
struct LoadedMatrix {
  DistanceMatrix matrix;
  std::string method;
  AlignmentOptions options;
};
LoadedMatrix distance_matrix_from_json(const std::string& text);

}  // namespace gazespiral
