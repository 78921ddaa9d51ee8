#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazespiral/image.hpp"
#include "gazespiral/metrics.hpp"
#include "gazespiral/spiral.hpp"

namespace gazespiral {

struct Merge {
  int cluster_i = 0;  // smaller id
  int cluster_j = 0;
  double height = 0.0;
  int new_cluster_id = 0;
};

/// Leaves are clusters 0..n-1; merge m creates cluster n + m.
struct Dendrogram {
  int leaf_count = 0;
  std::vector<Merge> merges;
};

/// Average-linkage (UPGMA) agglomerative clustering. Among equally close
/// pairs the lexicographically smallest (i, j) cluster-id pair merges first.
Dendrogram hca_average_linkage(const DistanceMatrix& m);

/// Applies every merge with height <= `height`. Clusters are sorted leaf lists,
/// ordered by their smallest leaf.
std::vector<std::vector<int>> cut_dendrogram(const Dendrogram& d, double height);

/// Applies the first n - k merges, yielding exactly k clusters.
std::vector<std::vector<int>> cut_dendrogram_k(const Dendrogram& d, int k);

/// Left-to-right leaf order of the dendrogram drawing.
std::vector<int> dendrogram_leaf_order(const Dendrogram& d);

std::string dendrogram_to_json(const Dendrogram& d, const std::vector<std::string>& labels = {});
Dendrogram dendrogram_from_json(const std::string& text);

/// Line drawing of the dendrogram: leaves along the bottom, height upward.
Image render_dendrogram(const Dendrogram& d, int width = 640, int height = 360);

struct Embedding2D {
  std::vector<Point2> points;
  double stress = 0.0;
  int iterations_run = 0;
  std::vector<double> stress_history;  // stress of the start configuration, then after each iteration
  std::uint64_t seed = 0;
  std::string method;
};

struct SmacofOptions {
  int max_iter = 3000;
  double eps = 1e-10;  // relative stress improvement stopping threshold
  std::uint64_t seed = 42;
  int n_init = 8;  // random starts; the lowest-stress run is kept
};

/// 2D embedding interface; the built-in implementation is metric SMACOF.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding2D embed(const DistanceMatrix& m) const = 0;
};

/// Raw stress sum_{i<j} (d_ij - |p_i - p_j|)^2.
double raw_stress(const DistanceMatrix& m, const std::vector<Point2>& points);

/// Stress majorization via Guttman transforms from `n_init` seeded random
/// starts; returns the run with the lowest final stress.
Embedding2D embed_smacof(const DistanceMatrix& m, int max_iter = 3000, double eps = 1e-10, std::uint64_t seed = 42,
                         int n_init = 8);

class SmacofEmbedder final : public Embedder {
 public:
  explicit SmacofEmbedder(SmacofOptions opts = {}) : opts_(opts) {}
  Embedding2D embed(const DistanceMatrix& m) const override {
    return embed_smacof(m, opts_.max_iter, opts_.eps, opts_.seed, opts_.n_init);
  }

 private:
  SmacofOptions opts_;
};

std::string embedding_to_json(const Embedding2D& e, const std::vector<std::string>& labels = {});

struct GlyphPlacement {
  Point2 center;  // canvas pixels
  double scale = 1.0;
};

struct GlyphLayout {
  std::vector<GlyphPlacement> placements;
  int glyph_px = 0;
  int canvas_px = 0;
};

struct LayoutOptions {
  int margin_px = 8;
  double max_overlap_fraction = 0.0;
  int max_iterations = 100;
};

/// Smallest canvas that can hold n non-overlapping glyphs with the margin.
int min_canvas_px(std::size_t n, int glyph_px, int margin_px);

/// Maps the embedding onto a square canvas and separates overlapping glyphs by
/// pairwise repulsion along their centre line.
GlyphLayout layout_glyphs(const Embedding2D& emb, int glyph_px, int canvas_px, const LayoutOptions& opts = {});

/// Overlap area of two axis-aligned glyph squares as a fraction of one glyph.
double glyph_overlap_fraction(Point2 a, Point2 b, int glyph_px);

/// Pastes glyph images (resized to glyph_px) at their placements on a white canvas.
Image render_glyph_layout(const GlyphLayout& layout, const std::vector<Image>& glyphs);

}  // namespace gazespiral
