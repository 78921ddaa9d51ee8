#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gazespiral/common.hpp"

namespace gazespiral {

/// 8-bit RGB raster, row-major, no padding.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = colors::kBlack);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Pixel with coordinates clamped into the raster.
  const Rgb& clamped(int x, int y) const;

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<Rgb> pixels() { return pixels_; }
  std::span<const Rgb> pixels() const { return pixels_; }

  /// Interleaved RGB bytes, width*height*3 long.
  std::span<const std::uint8_t> bytes() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Copy of the w x h window whose top-left corner is (left, top); out-of-range
/// source coordinates are clamped to the nearest edge pixel.
Image crop_clamped(const Image& src, int left, int top, int w, int h);

/// Area-averaging (box filter) resize along x only. `new_width` must be <= width.
Image box_downscale_width(const Image& src, int new_width);

/// Area-averaging resize to arbitrary dimensions (used for shrinking).
Image box_resize(const Image& src, int new_width, int new_height);

/// Uniformly scales `src` to fit inside a `size` x `size` square, centered on `background`.
Image fit_to_square(const Image& src, int size, Rgb background = colors::kWhite);

/// Copies `src` onto `dst` with its top-left at (x, y); clipped to `dst`.
void blit(Image& dst, const Image& src, int x, int y);

/// Thick line: every pixel centre within `half_width` of the segment.
void draw_line(Image& img, double x0, double y0, double x1, double y1, double half_width, Rgb color);

// PNG and JPEG codecs (libpng / libjpeg). Encoding is deterministic: fixed
// compression settings and no timestamp chunks.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> data);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);
Image read_jpeg(const std::filesystem::path& path);

/// Dispatches on extension (.png, .jpg, .jpeg).
Image read_image(const std::filesystem::path& path);

/// Writes `data` to `path` through a temporary sibling file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace gazespiral
