#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gazespiral/image.hpp"
#include "gazespiral/ingest.hpp"

namespace gazespiral {

/// Level-of-detail modes.
struct StaticCenter {
  friend bool operator==(const StaticCenter&, const StaticCenter&) = default;
};
struct GazeGlobal {
  friend bool operator==(const GazeGlobal&, const GazeGlobal&) = default;
};
struct GazeLocal {
  int half_height_px = 50;
  friend bool operator==(const GazeLocal&, const GazeLocal&) = default;
};
using SlitscanMode = std::variant<StaticCenter, GazeGlobal, GazeLocal>;

std::string to_string(const SlitscanMode& mode);
/// "static-center", "gaze-global", "gaze-local" (half height taken from `half_height`).
SlitscanMode slitscan_mode_from_string(const std::string& s, int half_height = 50);

inline constexpr int kDefaultScanlineHeight = 100;

struct Scanline {
  std::vector<Rgb> pixels;             // row 0 = top of the frame column
  std::optional<int> gaze_marker_row;  // GazeGlobal only
  bool is_missing = false;             // black, no marker

  friend bool operator==(const Scanline&, const Scanline&) = default;
};

struct SlitscanSequence {
  std::vector<Scanline> scanlines;
  int height = kDefaultScanlineHeight;
  SlitscanMode mode = GazeGlobal{};
  int stride = 1;
  std::string recording_id;

  std::size_t size() const { return scanlines.size(); }
  bool empty() const { return scanlines.empty(); }
  friend bool operator==(const SlitscanSequence&, const SlitscanSequence&) = default;
};

/// Resamples a column to `height` rows: identity when lengths match, linear
/// interpolation otherwise.
std::vector<Rgb> resample_column(const std::vector<Rgb>& column, int height);

Scanline extract_scanline(const Image& frame, const GazeSample& sample, const SlitscanMode& mode, int height);

/// One scanline for frames 0, stride, 2*stride, ...
SlitscanSequence extract_sequence(const Recording& rec, const SlitscanMode& mode, int height = kDefaultScanlineHeight,
                                  int stride = 1);

/// Recommended upper bound for the stride: sampling should not drop below a
/// quarter of a 25 fps stream, i.e. stride <= 4 * fps / 25.
bool stride_exceeds_recommendation(int stride, double fps);

/// Marker dot radii in pixels for a scanline of `height` pixels.
struct MarkerStyle {
  double outer_radius;
  double inner_radius;
};
MarkerStyle marker_style(int height);

/// Draws a white dot with a red border centered at (x, y).
void draw_marker_border(Image& img, double x, double y, const MarkerStyle& style);
void draw_marker_core(Image& img, double x, double y, const MarkerStyle& style);

/// One column per scanline, left to right. When `max_width_px` is set and
/// smaller than the scanline count, columns are box-filtered down to it.
Image render_linear(const SlitscanSequence& seq, std::optional<int> max_width_px = std::nullopt);

// Sequence cache. Layout (all integers little-endian uint32 unless noted):
//   H, count, mode tag (bits 0-7 kind: 0 static, 1 global, 2 local;
//   bits 8-31 GazeLocal half height), stride,
//   count * H * 3 bytes of RGB (scanline-major, row 0 first),
//   count * int32 marker rows (-1 none, -2 missing scanline).
std::vector<std::uint8_t> encode_sequence_cache(const SlitscanSequence& seq);
SlitscanSequence decode_sequence_cache(std::span<const std::uint8_t> data);
void write_sequence_cache(const std::filesystem::path& path, const SlitscanSequence& seq);
SlitscanSequence read_sequence_cache(const std::filesystem::path& path);

}  // namespace gazespiral
