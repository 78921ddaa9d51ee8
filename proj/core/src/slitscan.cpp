#include "gazespiral/slitscan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "gazespiral/parallel.hpp"

namespace gazespiral {

std::string to_string(const SlitscanMode& mode) {
  struct Visitor {
    std::string operator()(const StaticCenter&) const { return "static-center"; }
    std::string operator()(const GazeGlobal&) const { return "gaze-global"; }
    std::string operator()(const GazeLocal& m) const { return "gaze-local:" + std::to_string(m.half_height_px); }
  };
  return std::visit(Visitor{}, mode);
}

SlitscanMode slitscan_mode_from_string(const std::string& s, int half_height) {
  if (s == "static-center") return StaticCenter{};
  if (s == "gaze-global") return GazeGlobal{};
  if (s == "gaze-local") {
    if (half_height <= 0) throw ParameterError("gaze-local half height must be > 0");
    return GazeLocal{half_height};
  }
  if (s.rfind("gaze-local:", 0) == 0) {
    std::size_t used = 0;
    int h = 0;
    try {
      h = std::stoi(s.substr(11), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() - 11) throw ParameterError("bad gaze-local half height in '" + s + "'");
    return slitscan_mode_from_string("gaze-local", h);
  }
  throw ParameterError("unknown slitscan mode '" + s + "'");
}

std::vector<Rgb> resample_column(const std::vector<Rgb>& column, int height) {
  if (height <= 0) throw ParameterError("scanline height must be > 0");
  if (column.empty()) throw ParameterError("cannot resample an empty column");
  const int n = static_cast<int>(column.size());
  if (n == height) return column;
  std::vector<Rgb> out(static_cast<std::size_t>(height));
  if (height == 1) {
    out[0] = column[n / 2];
    return out;
  }
  const double scale = static_cast<double>(n - 1) / (height - 1);
  for (int i = 0; i < height; ++i) {
    const double pos = i * scale;
    const int i0 = std::min(static_cast<int>(pos), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = pos - i0;
    auto lerp = [f](std::uint8_t a, std::uint8_t b) {
      return static_cast<std::uint8_t>(std::lround(a + (b - a) * f));
    };
    out[i] = Rgb{lerp(column[i0].r, column[i1].r), lerp(column[i0].g, column[i1].g),
                 lerp(column[i0].b, column[i1].b)};
  }
  return out;
}

namespace {

std::vector<Rgb> column_rows(const Image& frame, int x, int top, int count) {
  std::vector<Rgb> col(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) col[i] = frame.clamped(x, top + i);
  return col;
}

int gaze_column(const Image& frame, double x_norm) {
  return static_cast<int>(std::lround(std::clamp(x_norm, 0.0, 1.0) * (frame.width() - 1)));
}

Scanline missing_scanline(int height) {
  Scanline s;
  s.pixels.assign(static_cast<std::size_t>(height), colors::kBlack);
  s.is_missing = true;
  return s;
}

}  // namespace

Scanline extract_scanline(const Image& frame, const GazeSample& sample, const SlitscanMode& mode, int height) {
  if (height <= 0) throw ParameterError("scanline height must be > 0");
  if (frame.empty()) throw ParameterError("empty frame");
  const bool uses_gaze = !std::holds_alternative<StaticCenter>(mode);
  if (!std::holds_alternative<GazeLocal>(mode) && height > frame.height())
    throw ParameterError("scanline height exceeds frame height");
  if (uses_gaze && !sample.valid) return missing_scanline(height);

  Scanline s;
  if (std::holds_alternative<StaticCenter>(mode)) {
    s.pixels = resample_column(column_rows(frame, frame.width() / 2, 0, frame.height()), height);
  } else if (std::holds_alternative<GazeGlobal>(mode)) {
    s.pixels = resample_column(column_rows(frame, gaze_column(frame, sample.x_norm), 0, frame.height()), height);
    s.gaze_marker_row = static_cast<int>(std::lround(std::clamp(sample.y_norm, 0.0, 1.0) * (height - 1)));
  } else {
    const int half = std::get<GazeLocal>(mode).half_height_px;
    if (half <= 0) throw ParameterError("gaze-local half height must be > 0");
    const int span = 2 * half + 1;
    const int gy = static_cast<int>(std::lround(std::clamp(sample.y_norm, 0.0, 1.0) * (frame.height() - 1)));
    int top = gy - half;
    if (frame.height() >= span) top = std::clamp(top, 0, frame.height() - span);
    s.pixels = resample_column(column_rows(frame, gaze_column(frame, sample.x_norm), top, span), height);
  }
  return s;
}

SlitscanSequence extract_sequence(const Recording& rec, const SlitscanMode& mode, int height, int stride) {
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (height <= 0) throw ParameterError("scanline height must be > 0");
  if (rec.gaze.size() != static_cast<std::size_t>(rec.frames.frame_count()))
    throw DataError("recording '" + rec.id + "' is not synchronized");
  const int n = rec.frames.frame_count();
  const int count = (n + stride - 1) / stride;

  SlitscanSequence seq;
  seq.height = height;
  seq.mode = mode;
  seq.stride = stride;
  seq.recording_id = rec.id;
  seq.scanlines.resize(static_cast<std::size_t>(count));
  const bool uses_gaze = !std::holds_alternative<StaticCenter>(mode);
  parallel_for(seq.scanlines.size(), [&](std::size_t i) {
    const int frame_index = static_cast<int>(i) * stride;
    const GazeSample& sample = rec.gaze[frame_index];
    if (uses_gaze && !sample.valid) {
      seq.scanlines[i] = missing_scanline(height);
      return;
    }
    seq.scanlines[i] = extract_scanline(rec.frames.frame(frame_index), sample, mode, height);
  });
  return seq;
}

bool stride_exceeds_recommendation(int stride, double fps) { return stride > 4.0 * fps / 25.0; }

MarkerStyle marker_style(int height) {
  const double outer = std::max(1.5, height / 40.0);
  return {outer, outer * 0.6};
}

namespace {
void fill_disc(Image& img, double cx, double cy, double radius, Rgb color) {
  const int x0 = static_cast<int>(std::floor(cx - radius));
  const int x1 = static_cast<int>(std::ceil(cx + radius));
  const int y0 = static_cast<int>(std::floor(cy - radius));
  const int y1 = static_cast<int>(std::ceil(cy + radius));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2 && img.contains(x, y)) img.at(x, y) = color;
    }
}
}  // namespace

void draw_marker_border(Image& img, double x, double y, const MarkerStyle& style) {
  fill_disc(img, x, y, style.outer_radius, colors::kRed);
}

void draw_marker_core(Image& img, double x, double y, const MarkerStyle& style) {
  fill_disc(img, x, y, style.inner_radius, colors::kWhite);
}

Image render_linear(const SlitscanSequence& seq, std::optional<int> max_width_px) {
  if (seq.empty()) throw ParameterError("render_linear: empty sequence");
  if (max_width_px && *max_width_px <= 0) throw ParameterError("max_width_px must be positive");
  const int w = static_cast<int>(seq.size());
  Image img(w, seq.height);
  for (int x = 0; x < w; ++x) {
    const auto& px = seq.scanlines[x].pixels;
    for (int y = 0; y < seq.height; ++y) img.at(x, y) = px[y];
  }
  // Borders first so that no later border overwrites an earlier core.
  const MarkerStyle style = marker_style(seq.height);
  for (int x = 0; x < w; ++x)
    if (const auto& row = seq.scanlines[x].gaze_marker_row) draw_marker_border(img, x + 0.5, *row + 0.5, style);
  for (int x = 0; x < w; ++x)
    if (const auto& row = seq.scanlines[x].gaze_marker_row) draw_marker_core(img, x + 0.5, *row + 0.5, style);
  if (max_width_px && *max_width_px < w) return box_downscale_width(img, *max_width_px);
  return img;
}

// --- sequence cache -----------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> data, std::size_t& pos) {
  if (pos + 4 > data.size()) throw ParseError("sequence cache truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_sequence_cache(const SlitscanSequence& seq) {
  std::uint32_t tag = 0;
  if (std::holds_alternative<GazeGlobal>(seq.mode)) tag = 1;
  if (const auto* local = std::get_if<GazeLocal>(&seq.mode))
    tag = 2u | (static_cast<std::uint32_t>(local->half_height_px) << 8);
  std::vector<std::uint8_t> out;
  out.reserve(16 + seq.size() * (seq.height * 3 + 4));
  put_u32(out, static_cast<std::uint32_t>(seq.height));
  put_u32(out, static_cast<std::uint32_t>(seq.size()));
  put_u32(out, tag);
  put_u32(out, static_cast<std::uint32_t>(seq.stride));
  for (const Scanline& s : seq.scanlines) {
    if (static_cast<int>(s.pixels.size()) != seq.height) throw DataError("scanline height mismatch");
    for (const Rgb& p : s.pixels) out.insert(out.end(), {p.r, p.g, p.b});
  }
  for (const Scanline& s : seq.scanlines) {
    const std::int32_t marker = s.is_missing ? -2 : (s.gaze_marker_row ? *s.gaze_marker_row : -1);
    put_u32(out, static_cast<std::uint32_t>(marker));
  }
  return out;
}

SlitscanSequence decode_sequence_cache(std::span<const std::uint8_t> data) {
  std::size_t pos = 0;
  SlitscanSequence seq;
  seq.height = static_cast<int>(get_u32(data, pos));
  const std::uint32_t count = get_u32(data, pos);
  const std::uint32_t tag = get_u32(data, pos);
  seq.stride = static_cast<int>(get_u32(data, pos));
  switch (tag & 0xffu) {
    case 0: seq.mode = StaticCenter{}; break;
    case 1: seq.mode = GazeGlobal{}; break;
    case 2: seq.mode = GazeLocal{static_cast<int>(tag >> 8)}; break;
    default: throw ParseError("sequence cache: unknown mode tag");
  }
  const std::size_t column_bytes = static_cast<std::size_t>(seq.height) * 3;
  if (data.size() != 16 + count * (column_bytes + 4)) throw ParseError("sequence cache: size mismatch");
  seq.scanlines.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& px = seq.scanlines[i].pixels;
    px.resize(static_cast<std::size_t>(seq.height));
    for (int y = 0; y < seq.height; ++y, pos += 3) px[y] = Rgb{data[pos], data[pos + 1], data[pos + 2]};
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto marker = static_cast<std::int32_t>(get_u32(data, pos));
    seq.scanlines[i].is_missing = marker == -2;
    if (marker >= 0) seq.scanlines[i].gaze_marker_row = marker;
  }
  return seq;
}

void write_sequence_cache(const std::filesystem::path& path, const SlitscanSequence& seq) {
  write_file_atomic(path, encode_sequence_cache(seq));
}

SlitscanSequence read_sequence_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  const std::vector<std::uint8_t> data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_sequence_cache(data);
}

}  // namespace gazespiral
