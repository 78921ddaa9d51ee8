#include "gazespiral/spiral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

namespace gazespiral {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kFirstTurnScanlines = 64;
}  // namespace

double SpiralParams::effective_t_step() const {
  if (t_step) return *t_step;
  return std::pow(kTwoPi, 1.0 / k) / kFirstTurnScanlines;
}

void SpiralParams::validate() const {
  if (!(a > 0.0)) throw ParameterError("spiral parameter a must be > 0");
  if (!(k > 0.0)) throw ParameterError("spiral parameter k must be > 0");
  if (H_px <= 0) throw ParameterError("H_px must be > 0");
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (t_step && !(*t_step > 0.0)) throw ParameterError("t_step must be > 0");
}

double spiral_angle(double t, double k) {
  if (t < 0.0) throw ParameterError("spiral time must be >= 0");
  return std::pow(t, k);
}

double spiral_radius(double t, double a, double k) { return a * spiral_angle(t, k) / kTwoPi; }

Point2 spiral_point(double t, double a, double k) {
  const double phi = spiral_angle(t, k);
  const double r = a * phi / kTwoPi;
  return {r * std::cos(phi), r * std::sin(phi)};
}

Point2 spiral_normal(double phi) {
  // The tangent d/dphi (phi cos phi, phi sin phi) rotated clockwise by 90 degrees.
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const double len = std::sqrt(1.0 + phi * phi);
  return {(s + phi * c) / len, (phi * s - c) / len};
}

Quad SpiralGeometry::band(std::size_t i, double inner, double outer) const {
  return {baseline[i] + normals[i] * inner, baseline[i + 1] + normals[i + 1] * inner,
          baseline[i + 1] + normals[i + 1] * outer, baseline[i] + normals[i] * outer};
}

SpiralGeometry build_geometry(std::size_t n_scanlines, const SpiralParams& params) {
  params.validate();
  if (n_scanlines < 1) throw ParameterError("build_geometry: need at least one scanline");
  SpiralGeometry g;
  g.a = params.a;
  g.k = params.k;
  g.t_step = params.effective_t_step();
  g.baseline.reserve(n_scanlines + 1);
  g.normals.reserve(n_scanlines + 1);
  g.angles.reserve(n_scanlines + 1);
  for (std::size_t i = 0; i <= n_scanlines; ++i) {
    const double t = static_cast<double>(i) * g.t_step;
    const double phi = spiral_angle(t, params.k);
    g.angles.push_back(phi);
    g.baseline.push_back(spiral_point(t, params.a, params.k));
    g.normals.push_back(spiral_normal(phi));
  }
  g.quads.reserve(n_scanlines);
  for (std::size_t i = 0; i < n_scanlines; ++i) g.quads.push_back(g.band(i, 0.0, 1.0));
  return g;
}

namespace {

// Radial overshoot beyond one unit of the outer corner baseline + normal at
// angle phi, measured against the baseline at the corner's own polar angle.
double tilt_excess(double phi, double a) {
  const double r = a * phi / kTwoPi;
  const double len = std::sqrt(1.0 + phi * phi);
  const double radial = phi / len;
  const double tangential = 1.0 / len;
  const double rho = std::hypot(r + radial, tangential);
  const double delta = std::atan2(tangential, r + radial);
  return rho - (r - a * delta / kTwoPi) - 1.0;
}

double worst_encroachment(const SpiralParams& params, std::size_t n, double t_step) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi0 = std::pow(i * t_step, params.k);
    if (phi0 < kTwoPi) continue;
    const double phi1 = std::pow((i + 1) * t_step, params.k);
    const double dphi = phi1 - phi0;
    if (dphi >= std::numbers::pi / 2) return std::numeric_limits<double>::infinity();
    const double r1 = params.a * phi1 / kTwoPi;
    const double sag = r1 * (1.0 - std::cos(dphi / 2.0));
    worst = std::max(worst, sag + std::max(tilt_excess(phi0, params.a), tilt_excess(phi1, params.a)));
  }
  return worst;
}

}  // namespace

double overlap_free_t_step(const SpiralParams& params, std::size_t n_scanlines) {
  params.validate();
  const double gap = params.a - 1.0;
  if (gap <= 0.0 || n_scanlines == 0) return 0.0;
  // Tilt excess is largest at the start of the second turn and does not depend on t_step.
  if (tilt_excess(kTwoPi, params.a) >= gap) return 0.0;
  double lo = 0.0;
  SpiralParams defaults = params;
  defaults.t_step.reset();
  double hi = 4.0 * defaults.effective_t_step();
  while (worst_encroachment(params, n_scanlines, hi) <= gap) hi *= 2.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (worst_encroachment(params, n_scanlines, mid) <= gap)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

Point2 SpiralCanvas::to_pixel(Point2 p) const {
  const double x = (p.x - min_x) * scale;
  const double y = clockwise ? (p.y - min_y) * scale : (max_y - p.y) * scale;
  return {x, y};
}

SpiralCanvas spiral_canvas(const SpiralGeometry& geom, const SpiralParams& params) {
  constexpr double kMargin = 2.0;
  const double reach = std::max(1.0, params.a);
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = max_x;
  for (std::size_t i = 0; i < geom.baseline.size(); ++i) {
    for (const Point2 p : {geom.baseline[i], geom.baseline[i] + geom.normals[i] * reach}) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  SpiralCanvas c;
  c.scale = params.H_px;
  c.clockwise = params.clockwise;
  c.min_x = min_x - kMargin;
  c.min_y = min_y - kMargin;
  c.max_y = max_y + kMargin;
  c.width = static_cast<int>(std::ceil((max_x - min_x + 2 * kMargin) * c.scale));
  c.height = static_cast<int>(std::ceil((max_y - min_y + 2 * kMargin) * c.scale));
  return c;
}

namespace {

double edge(Point2 a, Point2 b, Point2 p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

// Fills pixel centres inside triangle (p0, p1, p2). `shade(v)` receives the
// interpolated per-vertex attribute v.
template <typename Shade>
void fill_triangle(Image& img, Point2 p0, Point2 p1, Point2 p2, double v0, double v1, double v2, Shade&& shade) {
  const double area = edge(p0, p1, p2);
  if (std::abs(area) < 1e-12) return;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x, p1.x, p2.x}))));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max({p0.x, p1.x, p2.x}))));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y, p1.y, p2.y}))));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max({p0.y, p1.y, p2.y}))));
  constexpr double kInsideEps = -1e-9;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Point2 p{x + 0.5, y + 0.5};
      const double w0 = edge(p1, p2, p) / area;
      const double w1 = edge(p2, p0, p) / area;
      const double w2 = edge(p0, p1, p) / area;
      if (w0 < kInsideEps || w1 < kInsideEps || w2 < kInsideEps) continue;
      img.at(x, y) = shade(w0 * v0 + w1 * v1 + w2 * v2);
    }
  }
}

// Quad with attribute 0 along the inner edge (corners 0, 1) and 1 along the outer edge.
template <typename Shade>
void fill_quad(Image& img, const Quad& q, Shade&& shade) {
  fill_triangle(img, q[0], q[1], q[2], 0.0, 0.0, 1.0, shade);
  fill_triangle(img, q[0], q[2], q[3], 0.0, 1.0, 1.0, shade);
}

void draw_segment(Image& img, Point2 a, Point2 b, double half_width, Rgb color) {
  draw_line(img, a.x, a.y, b.x, b.y, half_width, color);
}

Quad to_pixels(const SpiralCanvas& c, const Quad& q) {
  return {c.to_pixel(q[0]), c.to_pixel(q[1]), c.to_pixel(q[2]), c.to_pixel(q[3])};
}

void check_span(std::size_t start, std::size_t end, std::size_t n, const char* what) {
  if (start > end || end >= n)
    throw ParameterError(std::string(what) + " span [" + std::to_string(start) + ", " + std::to_string(end) +
                         "] outside sequence of " + std::to_string(n) + " scanlines");
}

// Outline of the union of quads [start, end] in the band [inner, outer].
void draw_span_border(Image& img, const SpiralCanvas& c, const SpiralGeometry& g, std::size_t start,
                      std::size_t end, double inner, double outer, double half_width, Rgb color) {
  auto at = [&](std::size_t i, double off) { return c.to_pixel(g.baseline[i] + g.normals[i] * off); };
  for (std::size_t i = start; i <= end; ++i) {
    draw_segment(img, at(i, inner), at(i + 1, inner), half_width, color);
    draw_segment(img, at(i, outer), at(i + 1, outer), half_width, color);
  }
  draw_segment(img, at(start, inner), at(start, outer), half_width, color);
  draw_segment(img, at(end + 1, inner), at(end + 1, outer), half_width, color);
}

}  // namespace

Image render_spiral(const SlitscanSequence& seq, const SpiralParams& params, const OverlaySpec& overlay) {
  if (seq.empty()) throw ParameterError("render_spiral: empty sequence");
  const std::size_t n = seq.size();
  for (const auto& s : overlay.fixation_colors) check_span(s.start_index, s.end_index, n, "fixation colour");
  for (const auto& s : overlay.highlights) check_span(s.start_index, s.end_index, n, "highlight");
  for (const auto& s : overlay.annotations) check_span(s.start_index, s.end_index, n, "annotation");

  const SpiralGeometry geom = build_geometry(n, params);
  const SpiralCanvas canvas = spiral_canvas(geom, params);
  if (static_cast<long long>(canvas.width) * canvas.height > kMaxCanvasPixels)
    throw ParameterError("spiral canvas " + std::to_string(canvas.width) + "x" + std::to_string(canvas.height) +
                         " is too large; lower H_px or k, or raise the stride");
  Image img(canvas.width, canvas.height, colors::kWhite);
  const double centre_y = canvas.to_pixel({0.0, 0.0}).y;
  const int h = seq.height;

  // Temporal paint order: later scanlines win where quads overlap.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& px = seq.scanlines[i].pixels;
    const Quad q = to_pixels(canvas, geom.quads[i]);
    bool flip = false;
    if (params.flip_upper_half) flip = (q[0].y + q[1].y) * 0.5 < centre_y;
    fill_quad(img, q, [&](double v) {
      int row = std::clamp(static_cast<int>(v * h), 0, h - 1);
      if (flip) row = h - 1 - row;
      return px[row];
    });
  }

  const double gap = params.a - 1.0;
  if (gap > 0.0) {
    for (const auto& s : overlay.fixation_colors)
      for (std::size_t i = s.start_index; i <= s.end_index; ++i)
        fill_quad(img, to_pixels(canvas, geom.band(i, 1.0 + 0.1 * gap, 1.0 + 0.5 * gap)),
                  [&](double) { return s.color; });
    for (const auto& s : overlay.annotations)
      for (std::size_t i = s.start_index; i <= s.end_index; ++i)
        fill_quad(img, to_pixels(canvas, geom.band(i, 1.0 + 0.5 * gap, 1.0 + 0.9 * gap)),
                  [&](double) { return s.color; });
  }

  // Gaze markers: borders first, then cores.
  const MarkerStyle style = marker_style(params.H_px);
  auto marker_pos = [&](std::size_t i) {
    const double row = *seq.scanlines[i].gaze_marker_row;
    const Point2 base = (geom.baseline[i] + geom.baseline[i + 1]) * 0.5;
    Point2 nrm = geom.normals[i] + geom.normals[i + 1];
    const double len = std::hypot(nrm.x, nrm.y);
    nrm = len > 0 ? nrm * (1.0 / len) : geom.normals[i];
    double v = (row + 0.5) / h;
    return canvas.to_pixel(base + nrm * v);
  };
  for (std::size_t i = 0; i < n; ++i)
    if (seq.scanlines[i].gaze_marker_row) {
      const Point2 p = marker_pos(i);
      draw_marker_border(img, p.x, p.y, style);
    }
  for (std::size_t i = 0; i < n; ++i)
    if (seq.scanlines[i].gaze_marker_row) {
      const Point2 p = marker_pos(i);
      draw_marker_core(img, p.x, p.y, style);
    }

  const double half_width = std::max(1.0, params.H_px / 40.0);
  if (gap <= 0.0)
    for (const auto& s : overlay.annotations)
      draw_span_border(img, canvas, geom, s.start_index, s.end_index, 0.0, 1.0, half_width, s.color);
  for (const auto& s : overlay.highlights)
    draw_span_border(img, canvas, geom, s.start_index, s.end_index, 0.0, 1.0, half_width, s.color);
  return img;
}

Image render_glyph(const SlitscanSequence& seq, const SpiralParams& params, int size) {
  if (size < 1) throw ParameterError("glyph size must be >= 1");
  // Long spirals are drawn at a reduced scale, at most kGlyphSupersample x the glyph size.
  SpiralParams p = params;
  if (!seq.empty()) {
    p.H_px = 1;
    const SpiralCanvas unit = spiral_canvas(build_geometry(seq.size(), p), p);
    const int cap = std::max(1, kGlyphSupersample * size / std::max({unit.width, unit.height, 1}));
    p.H_px = std::min(params.H_px, cap);
  }
  return fit_to_square(render_spiral(seq, p, OverlaySpec{}), size, colors::kWhite);
}

std::string geometry_to_json(const SpiralGeometry& geom, const SpiralParams& params) {
  const SpiralCanvas c = spiral_canvas(geom, params);
  nlohmann::ordered_json j;
  j["n"] = geom.size();
  j["a"] = geom.a;
  j["k"] = geom.k;
  j["t_step"] = geom.t_step;
  j["H_px"] = params.H_px;
  j["stride"] = params.stride;
  j["clockwise"] = params.clockwise;
  j["canvas"] = {{"width", c.width}, {"height", c.height}, {"min_x", c.min_x},
                 {"min_y", c.min_y}, {"max_y", c.max_y},   {"scale", c.scale}};
  auto& base = j["baseline"] = nlohmann::ordered_json::array();
  for (const Point2& p : geom.baseline) base.push_back({p.x, p.y});
  auto& quads = j["quads"] = nlohmann::ordered_json::array();
  for (const Quad& q : geom.quads) {
    auto corners = nlohmann::ordered_json::array();
    for (const Point2& p : q) corners.push_back({p.x, p.y});
    quads.push_back(std::move(corners));
  }
  return j.dump();
}

namespace {

std::string base64(std::span<const std::uint8_t> data) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  if (i < data.size()) {
    std::uint32_t v = data[i] << 16;
    if (i + 1 < data.size()) v |= data[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < data.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

}  // namespace

std::string spiral_to_svg(const SlitscanSequence& seq, const SpiralParams& params) {
  if (seq.empty()) throw ParameterError("spiral_to_svg: empty sequence");
  const SpiralGeometry geom = build_geometry(seq.size(), params);
  const SpiralCanvas c = spiral_canvas(geom, params);
  std::ostringstream svg;
  svg.precision(6);
  svg << std::fixed;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" viewBox=\"0 0 " << c.width << ' ' << c.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Quad q = to_pixels(c, geom.quads[i]);
    Image strip(1, seq.height);
    for (int y = 0; y < seq.height; ++y) strip.at(0, y) = seq.scanlines[i].pixels[y];
    // Affine map of the 1 x H strip: x along the inner edge, y along the start normal.
    const Point2 ex = q[1] - q[0];
    const Point2 ey = (q[3] - q[0]) * (1.0 / seq.height);
    svg << "<image width=\"1\" height=\"" << seq.height << "\" preserveAspectRatio=\"none\" transform=\"matrix("
        << ex.x << ' ' << ex.y << ' ' << ey.x << ' ' << ey.y << ' ' << q[0].x << ' ' << q[0].y
        << ")\" href=\"data:image/png;base64," << base64(encode_png(strip)) << "\"/>\n";
    svg << "<polygon fill=\"none\" stroke=\"#808080\" stroke-width=\"0.25\" points=\"";
    for (const Point2& p : q) svg << p.x << ',' << p.y << ' ';
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace gazespiral
