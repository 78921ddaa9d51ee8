#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gazespiral/image.hpp"
#include "gazespiral/slitscan.hpp"

namespace gazespiral {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Archimedean spiral parameters. Lengths are in units of one scanline height.
struct SpiralParams {
  double a = 1.0;                 // distance between arms
  double k = 1.0;                 // angle exponent, phi(t) = t^k
  int H_px = 100;                 // pixels per unit (rendered scanline height)
  int stride = 1;                 // frame stride of the rendered sequence (metadata)
  std::optional<double> t_step;   // unset: (2 pi)^(1/k) / 64, i.e. 64 scanlines in the first turn
  bool clockwise = true;
  bool flip_upper_half = false;   // flip scanlines whose quad lies in the upper half of the canvas

  double effective_t_step() const;
  void validate() const;
};

/// Default arm distance when the gap ring carries fixation colours.
inline constexpr double kFixationRingArmDistance = 1.2;

/// Angle and radius of the baseline at time t.
double spiral_angle(double t, double k);
double spiral_radius(double t, double a, double k);

/// Baseline position at time t: phi = t^k, r = a * phi / (2 pi), (r cos phi, r sin phi).
Point2 spiral_point(double t, double a, double k);

/// Unit normal of the baseline at angle phi, pointing away from the centre.
Point2 spiral_normal(double phi);

using Quad = std::array<Point2, 4>;  // inner start, inner end, outer end, outer start

struct SpiralGeometry {
  std::vector<Point2> baseline;  // n + 1 points
  std::vector<Point2> normals;   // outward unit normals at the baseline points
  std::vector<double> angles;    // phi at the baseline points
  std::vector<Quad> quads;       // one per scanline
  double a = 1.0;
  double k = 1.0;
  double t_step = 0.0;

  std::size_t size() const { return quads.size(); }

  /// Quad i pushed outward: corners at baseline + normal * inner / outer (units).
  Quad band(std::size_t i, double inner, double outer) const;
};

SpiralGeometry build_geometry(std::size_t n_scanlines, const SpiralParams& params);

/// Largest t_step for which quads from the second turn outward cannot overlap
/// (chord sag plus normal tilt fits in the a - 1 gap). 0 when no positive step
/// satisfies the bound, which is always the case for a <= 1.
double overlap_free_t_step(const SpiralParams& params, std::size_t n_scanlines);

struct SpanColor {
  std::size_t start_index = 0;  // scanline indices, inclusive
  std::size_t end_index = 0;
  Rgb color;
};

struct SpanAnnotation {
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  std::string label;
  Rgb color;
};

struct OverlaySpec {
  std::vector<SpanColor> fixation_colors;  // drawn in the a - 1 gap ring
  std::vector<SpanColor> highlights;       // span borders
  std::vector<SpanAnnotation> annotations;

  bool empty() const { return fixation_colors.empty() && highlights.empty() && annotations.empty(); }
};

/// Mapping from spiral units to canvas pixels.
struct SpiralCanvas {
  int width = 0;
  int height = 0;
  double min_x = 0.0;
  double min_y = 0.0;
  double max_y = 0.0;
  double scale = 1.0;  // pixels per unit
  bool clockwise = true;

  Point2 to_pixel(Point2 p) const;
};

/// Canvas covering the geometry (and its gap ring) plus a 2-unit margin.
SpiralCanvas spiral_canvas(const SpiralGeometry& geom, const SpiralParams& params);

/// Upper bound on canvas pixels before render_spiral refuses.
inline constexpr long long kMaxCanvasPixels = 400'000'000;

Image render_spiral(const SlitscanSequence& seq, const SpiralParams& params, const OverlaySpec& overlay = {});

inline constexpr int kDefaultGlyphPx = 256;
inline constexpr int kGlyphSupersample = 4;

/// Overlay-free spiral uniformly scaled into a size x size square. H_px is
/// lowered when the full-scale canvas would exceed kGlyphSupersample * size.
Image render_glyph(const SlitscanSequence& seq, const SpiralParams& params, int size = kDefaultGlyphPx);

/// Baseline points, quad corners and the pixel mapping, for debugging and hit-testing.
std::string geometry_to_json(const SpiralGeometry& geom, const SpiralParams& params);

/// Quad outlines with each scanline embedded as a 1 x H PNG strip.
std::string spiral_to_svg(const SlitscanSequence& seq, const SpiralParams& params);

}  // namespace gazespiral
