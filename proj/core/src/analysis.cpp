#include "gazespiral/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

namespace gazespiral {

// --- hierarchical clustering --------------------------------------------------

Dendrogram hca_average_linkage(const DistanceMatrix& m) {
  const int n = static_cast<int>(m.size());
  if (n < 2) throw ParameterError("hca needs at least two items");
  Dendrogram d;
  d.leaf_count = n;

  // Active clusters keyed by id; distances between active clusters by id pair.
  std::map<int, int> sizes;
  std::map<std::pair<int, int>, double> dist;
  for (int i = 0; i < n; ++i) {
    sizes[i] = 1;
    for (int j = i + 1; j < n; ++j) dist[{i, j}] = m(i, j);
  }
  auto get = [&](int a, int b) { return dist.at({std::min(a, b), std::max(a, b)}); };

  int next_id = n;
  while (sizes.size() > 1) {
    // Map iteration is lexicographic in (i, j); strict < keeps the first minimum.
    std::pair<int, int> best{-1, -1};
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [key, value] : dist)
      if (value < best_d) best_d = value, best = key;

    const auto [ci, cj] = best;
    const int ni = sizes.at(ci), nj = sizes.at(cj);
    const int id = next_id++;
    d.merges.push_back(Merge{ci, cj, best_d, id});

    std::vector<std::pair<int, double>> updated;
    for (const auto& [other, size] : sizes) {
      if (other == ci || other == cj) continue;
      updated.emplace_back(other, (ni * get(ci, other) + nj * get(cj, other)) / (ni + nj));
    }
    for (auto it = dist.begin(); it != dist.end();) {
      const auto [a, b] = it->first;
      if (a == ci || a == cj || b == ci || b == cj)
        it = dist.erase(it);
      else
        ++it;
    }
    sizes.erase(ci);
    sizes.erase(cj);
    for (const auto& [other, value] : updated) dist[{other, id}] = value;  // other < id always
    sizes[id] = ni + nj;
  }
  return d;
}

namespace {

std::vector<std::vector<int>> clusters_after(const Dendrogram& d, std::size_t merge_count) {
  const int n = d.leaf_count;
  std::vector<int> parent(static_cast<std::size_t>(n) + d.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t m = 0; m < merge_count; ++m) {
    const Merge& mg = d.merges[m];
    parent[find(mg.cluster_i)] = mg.new_cluster_id;
    parent[find(mg.cluster_j)] = mg.new_cluster_id;
  }
  std::map<int, std::vector<int>> groups;
  for (int leaf = 0; leaf < n; ++leaf) groups[find(leaf)].push_back(leaf);
  std::vector<std::vector<int>> out;
  for (auto& [root, leaves] : groups) out.push_back(std::move(leaves));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace

std::vector<std::vector<int>> cut_dendrogram(const Dendrogram& d, double height) {
  std::size_t count = 0;
  while (count < d.merges.size() && d.merges[count].height <= height) ++count;
  return clusters_after(d, count);
}

std::vector<std::vector<int>> cut_dendrogram_k(const Dendrogram& d, int k) {
  if (k < 1 || k > d.leaf_count) throw ParameterError("cluster count out of range");
  return clusters_after(d, static_cast<std::size_t>(d.leaf_count - k));
}

std::vector<int> dendrogram_leaf_order(const Dendrogram& d) {
  if (d.merges.empty()) {
    std::vector<int> leaves(static_cast<std::size_t>(d.leaf_count));
    std::iota(leaves.begin(), leaves.end(), 0);
    return leaves;
  }
  std::vector<int> order;
  std::function<void(int)> visit = [&](int id) {
    if (id < d.leaf_count) {
      order.push_back(id);
      return;
    }
    const Merge& m = d.merges[static_cast<std::size_t>(id - d.leaf_count)];
    visit(m.cluster_i);
    visit(m.cluster_j);
  };
  visit(d.merges.back().new_cluster_id);
  return order;
}

std::string dendrogram_to_json(const Dendrogram& d, const std::vector<std::string>& labels) {
  nlohmann::ordered_json j;
  j["leaf_count"] = d.leaf_count;
  if (!labels.empty()) j["labels"] = labels;
  auto& merges = j["merges"] = nlohmann::ordered_json::array();
  for (const Merge& m : d.merges)
    merges.push_back({{"cluster_i", m.cluster_i}, {"cluster_j", m.cluster_j}, {"height", m.height},
                      {"new_cluster_id", m.new_cluster_id}});
  j["leaf_order"] = dendrogram_leaf_order(d);
  return j.dump();
}

Dendrogram dendrogram_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Dendrogram d;
    d.leaf_count = j.at("leaf_count").get<int>();
    for (const auto& m : j.at("merges"))
      d.merges.push_back(Merge{m.at("cluster_i").get<int>(), m.at("cluster_j").get<int>(),
                               m.at("height").get<double>(), m.at("new_cluster_id").get<int>()});
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dendrogram json: ") + e.what());
  }
}

Image render_dendrogram(const Dendrogram& d, int width, int height) {
  Image img(width, height, colors::kWhite);
  if (d.leaf_count < 1) return img;
  const auto order = dendrogram_leaf_order(d);
  const double margin = 16.0;
  double max_h = 0.0;
  for (const Merge& m : d.merges) max_h = std::max(max_h, m.height);
  if (max_h <= 0.0) max_h = 1.0;
  const double step = d.leaf_count > 1 ? (width - 2 * margin) / (d.leaf_count - 1) : 0.0;
  std::vector<double> x(static_cast<std::size_t>(d.leaf_count) + d.merges.size());
  std::vector<double> y(x.size(), height - margin);
  for (std::size_t i = 0; i < order.size(); ++i) x[order[i]] = margin + i * step;
  auto to_y = [&](double h) { return height - margin - h / max_h * (height - 2 * margin); };
  for (const Merge& m : d.merges) {
    const double top = to_y(m.height);
    const double xi = x[m.cluster_i], xj = x[m.cluster_j];
    draw_line(img, xi, y[m.cluster_i], xi, top, 0.75, colors::kBlack);
    draw_line(img, xj, y[m.cluster_j], xj, top, 0.75, colors::kBlack);
    draw_line(img, xi, top, xj, top, 0.75, colors::kBlack);
    x[m.new_cluster_id] = 0.5 * (xi + xj);
    y[m.new_cluster_id] = top;
  }
  for (int leaf = 0; leaf < d.leaf_count; ++leaf)
    draw_line(img, x[leaf] - 2, height - margin + 3, x[leaf] + 2, height - margin + 3, 1.0, colors::kRed);
  return img;
}

// --- SMACOF -------------------------------------------------------------------

double raw_stress(const DistanceMatrix& m, const std::vector<Point2>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      const double e = m(i, j) - std::hypot(p[i].x - p[j].x, p[i].y - p[j].y);
      s += e * e;
    }
  return s;
}

namespace {

// Uniform double in [0, 1) from the top 53 bits; the engine's output sequence
// is fixed by the standard, unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

namespace {

// Guttman iterations from `e.points`; fills stress, history and iteration count.
void smacof_descend(const DistanceMatrix& m, Embedding2D& e, int max_iter, double eps) {
  const std::size_t n = m.size();
  double total = 0.0;
  for (double v : m.upper_triangle()) total += v * v;
  double stress = raw_stress(m, e.points);
  e.stress_history.assign(1, stress);
  e.iterations_run = 0;

  std::vector<Point2> next(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (stress <= 1e-24 * std::max(total, 1e-300)) break;
    // Guttman transform with unit weights: X <- B(X) X / n.
    for (std::size_t i = 0; i < n; ++i) {
      double bx = 0.0, by = 0.0, bii = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dist = std::hypot(e.points[i].x - e.points[j].x, e.points[i].y - e.points[j].y);
        const double b = dist > 0.0 ? -m(i, j) / dist : 0.0;
        bx += b * e.points[j].x;
        by += b * e.points[j].y;
        bii -= b;
      }
      next[i] = {(bx + bii * e.points[i].x) / n, (by + bii * e.points[i].y) / n};
    }
    e.points.swap(next);
    const double updated = raw_stress(m, e.points);
    e.stress_history.push_back(updated);
    ++e.iterations_run;
    const double improvement = stress - updated;
    stress = updated;
    if (improvement < eps * e.stress_history[e.stress_history.size() - 2]) break;
  }
  e.stress = stress;
}

}  // namespace

Embedding2D embed_smacof(const DistanceMatrix& m, int max_iter, double eps, std::uint64_t seed, int n_init) {
  const std::size_t n = m.size();
  if (n < 2) throw ParameterError("embedding needs at least two items");
  if (max_iter < 0) throw ParameterError("max_iter must be >= 0");
  if (n_init < 1) throw ParameterError("n_init must be >= 1");

  double mean_d = 0.0;
  for (double v : m.upper_triangle()) mean_d += v;
  mean_d /= static_cast<double>(n * (n - 1) / 2);
  const double spread = mean_d > 0.0 ? mean_d : 1.0;

  std::mt19937_64 rng(seed);
  Embedding2D best;
  for (int run = 0; run < n_init; ++run) {
    Embedding2D e;
    e.points.resize(n);
    for (auto& p : e.points) {
      p.x = (unit_uniform(rng) - 0.5) * spread;
      p.y = (unit_uniform(rng) - 0.5) * spread;
    }
    smacof_descend(m, e, max_iter, eps);
    if (run == 0 || e.stress < best.stress) best = std::move(e);
  }
  best.seed = seed;
  best.method = "smacof";

  Point2 c{};
  for (const auto& p : best.points) c = c + p;
  c = c * (1.0 / n);
  for (auto& p : best.points) p = p - c;
  return best;
}

std::string embedding_to_json(const Embedding2D& e, const std::vector<std::string>& labels) {
  nlohmann::ordered_json j;
  j["method"] = e.method;
  j["seed"] = e.seed;
  j["stress"] = e.stress;
  j["iterations_run"] = e.iterations_run;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : e.points) pts.push_back({p.x, p.y});
  if (!labels.empty()) j["labels"] = labels;
  return j.dump();
}

// --- glyph layout ---------------------------------------------------------------

int min_canvas_px(std::size_t n, int glyph_px, int margin_px) {
  const int per_side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  return per_side * glyph_px + 2 * margin_px;
}

double glyph_overlap_fraction(Point2 a, Point2 b, int glyph_px) {
  const double g = glyph_px;
  const double ox = std::max(0.0, g - std::abs(a.x - b.x));
  const double oy = std::max(0.0, g - std::abs(a.y - b.y));
  return ox * oy / (g * g);
}

GlyphLayout layout_glyphs(const Embedding2D& emb, int glyph_px, int canvas_px, const LayoutOptions& opts) {
  const std::size_t n = emb.points.size();
  if (n < 1) throw ParameterError("layout_glyphs: empty embedding");
  if (glyph_px <= 0) throw ParameterError("glyph_px must be positive");
  const int required = min_canvas_px(n, glyph_px, opts.margin_px);
  if (canvas_px < required)
    throw ParameterError("canvas too small for " + std::to_string(n) + " glyphs of " + std::to_string(glyph_px) +
                         " px; need at least " + std::to_string(required) + " px");

  const double g = glyph_px;
  const double lo = opts.margin_px + g / 2.0;
  const double hi = canvas_px - opts.margin_px - g / 2.0;
  const double mid = 0.5 * (lo + hi);

  double min_x = emb.points[0].x, max_x = min_x, min_y = emb.points[0].y, max_y = min_y;
  for (const auto& p : emb.points) {
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const double range = std::max(max_x - min_x, max_y - min_y);
  const double scale = range > 0.0 ? (hi - lo) / range : 0.0;
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);

  GlyphLayout layout;
  layout.glyph_px = glyph_px;
  layout.canvas_px = canvas_px;
  layout.placements.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    layout.placements[i].center = {mid + (emb.points[i].x - cx) * scale, mid + (emb.points[i].y - cy) * scale};

  auto& pos = layout.placements;
  auto overlapping = [&](std::size_t i, std::size_t j) {
    const double f = glyph_overlap_fraction(pos[i].center, pos[j].center, glyph_px);
    return f > opts.max_overlap_fraction && f > 0.0;
  };
  auto clamp_into_canvas = [&](Point2& p) {
    p.x = std::clamp(p.x, lo, hi);
    p.y = std::clamp(p.y, lo, hi);
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!overlapping(i, j)) continue;
        Point2 d = pos[j].center - pos[i].center;
        double len = std::hypot(d.x, d.y);
        Point2 u = len > 0.0 ? d * (1.0 / len) : Point2{1.0, 0.0};
        // Distance along u at which the squares just touch.
        const double target = g / std::max(std::abs(u.x), std::abs(u.y));
        const double push = 0.5 * (target - len);
        pos[i].center = pos[i].center - u * push;
        pos[j].center = pos[j].center + u * push;
        clamp_into_canvas(pos[i].center);
        clamp_into_canvas(pos[j].center);
        moved = true;
      }
    if (!moved) break;
  }

  bool clean = true;
  for (std::size_t i = 0; i < n && clean; ++i)
    for (std::size_t j = i + 1; j < n && clean; ++j) clean = !overlapping(i, j);
  if (!clean) {
    // Repulsion stalled against the canvas border: snap glyphs to the nearest free grid cell.
    const int cells = static_cast<int>((canvas_px - 2 * opts.margin_px) / glyph_px);
    std::vector<bool> taken(static_cast<std::size_t>(cells) * cells, false);
    for (std::size_t i = 0; i < n; ++i) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < cells * cells; ++c) {
        if (taken[c]) continue;
        const Point2 centre{opts.margin_px + (c % cells + 0.5) * g, opts.margin_px + (c / cells + 0.5) * g};
        const Point2 diff = centre - pos[i].center;
        const double dd = diff.x * diff.x + diff.y * diff.y;
        if (dd < best_d) best_d = dd, best = c;
      }
      taken[best] = true;
      pos[i].center = {opts.margin_px + (best % cells + 0.5) * g, opts.margin_px + (best / cells + 0.5) * g};
    }
  }
  return layout;
}

Image render_glyph_layout(const GlyphLayout& layout, const std::vector<Image>& glyphs) {
  if (glyphs.size() != layout.placements.size()) throw ParameterError("glyph count does not match layout");
  Image canvas(layout.canvas_px, layout.canvas_px, colors::kWhite);
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const int size = std::max(1, static_cast<int>(std::lround(layout.glyph_px * layout.placements[i].scale)));
    const Image g = glyphs[i].width() == size && glyphs[i].height() == size ? glyphs[i]
                                                                             : fit_to_square(glyphs[i], size);
    const Point2 c = layout.placements[i].center;
    blit(canvas, g, static_cast<int>(std::lround(c.x - size / 2.0)), static_cast<int>(std::lround(c.y - size / 2.0)));
  }
  return canvas;
}

}  // namespace gazespiral
