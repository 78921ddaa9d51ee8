#include "gazespiral/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <system_error>

namespace gazespiral {

static_assert(sizeof(Rgb) == 3, "Rgb must be tightly packed");

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ParameterError("image dimensions must be non-negative");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

const Rgb& Image::clamped(int x, int y) const {
  return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
}

std::span<const std::uint8_t> Image::bytes() const {
  return {reinterpret_cast<const std::uint8_t*>(pixels_.data()), pixels_.size() * 3};
}

Image crop_clamped(const Image& src, int left, int top, int w, int h) {
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = src.clamped(left + x, top + y);
  return out;
}

namespace {

// Accumulates area-weighted contributions of source cells [lo, hi) onto one
// destination cell along one axis.
struct Span1D {
  int first;
  int last;  // inclusive
  std::vector<double> weights;
};

std::vector<Span1D> box_weights(int src, int dst) {
  std::vector<Span1D> out(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double lo = i * scale;
    const double hi = (i + 1) * scale;
    Span1D s;
    s.first = static_cast<int>(std::floor(lo));
    s.last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int k = s.first; k <= s.last; ++k) {
      const double w = std::min<double>(hi, k + 1) - std::max<double>(lo, k);
      s.weights.push_back(std::max(0.0, w));
    }
    out[i] = std::move(s);
  }
  return out;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Image box_downscale_width(const Image& src, int new_width) {
  if (new_width <= 0 || new_width > src.width())
    throw ParameterError("box_downscale_width: target width must be in [1, width]");
  if (new_width == src.width()) return src;
  // Integer column ranges: every output column averages at least one whole source column.
  Image out(new_width, src.height());
  const std::int64_t n = src.width();
  for (int j = 0; j < new_width; ++j) {
    const int lo = static_cast<int>(j * n / new_width);
    const int hi = static_cast<int>((j + 1) * n / new_width);
    const int count = hi - lo;
    for (int y = 0; y < src.height(); ++y) {
      std::uint32_t r = 0, g = 0, b = 0;
      for (int x = lo; x < hi; ++x) {
        const Rgb& p = src.at(x, y);
        r += p.r;
        g += p.g;
        b += p.b;
      }
      out.at(j, y) = Rgb{static_cast<std::uint8_t>((r + count / 2) / count),
                         static_cast<std::uint8_t>((g + count / 2) / count),
                         static_cast<std::uint8_t>((b + count / 2) / count)};
    }
  }
  return out;
}

Image box_resize(const Image& src, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) throw ParameterError("box_resize: empty target");
  if (src.empty()) throw ParameterError("box_resize: empty source");
  const auto wx = box_weights(src.width(), new_width);
  const auto wy = box_weights(src.height(), new_height);
  Image out(new_width, new_height);
  for (int j = 0; j < new_height; ++j) {
    const Span1D& sy = wy[j];
    for (int i = 0; i < new_width; ++i) {
      const Span1D& sx = wx[i];
      double r = 0, g = 0, b = 0, total = 0;
      for (int y = sy.first; y <= sy.last; ++y) {
        const double wyv = sy.weights[y - sy.first];
        for (int x = sx.first; x <= sx.last; ++x) {
          const double w = wyv * sx.weights[x - sx.first];
          const Rgb& p = src.at(x, y);
          r += w * p.r;
          g += w * p.g;
          b += w * p.b;
          total += w;
        }
      }
      out.at(i, j) = Rgb{to_byte(r / total), to_byte(g / total), to_byte(b / total)};
    }
  }
  return out;
}

Image fit_to_square(const Image& src, int size, Rgb background) {
  if (size <= 0) throw ParameterError("fit_to_square: size must be positive");
  const double scale = static_cast<double>(size) / std::max(src.width(), src.height());
  const int w = std::clamp(static_cast<int>(std::lround(src.width() * scale)), 1, size);
  const int h = std::clamp(static_cast<int>(std::lround(src.height() * scale)), 1, size);
  Image out(size, size, background);
  blit(out, box_resize(src, w, h), (size - w) / 2, (size - h) / 2);
  return out;
}

void blit(Image& dst, const Image& src, int x, int y) {
  for (int sy = 0; sy < src.height(); ++sy) {
    const int dy = y + sy;
    if (dy < 0 || dy >= dst.height()) continue;
    for (int sx = 0; sx < src.width(); ++sx) {
      const int dx = x + sx;
      if (dx < 0 || dx >= dst.width()) continue;
      dst.at(dx, dy) = src.at(sx, sy);
    }
  }
}

void draw_line(Image& img, double ax, double ay, double bx, double by, double half_width, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half_width)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half_width)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half_width)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(ay, by) + half_width)));
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  const double hw2 = half_width * half_width;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = px - (ax + dx * t);
      const double ey = py - (ay + dy * t);
      if (ex * ex + ey * ey <= hw2) img.at(x, y) = color;
    }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw ParameterError("encode_png: empty image");
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  desc.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  const auto* data = img.bytes().data();
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, data, 0, nullptr))
    throw std::runtime_error(std::string("png encode failed: ") + desc.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, data, 0, nullptr))
    throw std::runtime_error(std::string("png encode failed: ") + desc.message);
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> data) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, data.data(), data.size()))
    throw ParseError(std::string("png decode failed: ") + desc.message);
  desc.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(desc.width), static_cast<int>(desc.height));
  auto* dst = reinterpret_cast<std::uint8_t*>(out.pixels().data());
  if (!png_image_finish_read(&desc, nullptr, dst, 0, nullptr)) {
    png_image_free(&desc);
    throw ParseError(std::string("png decode failed: ") + desc.message);
  }
  return out;
}

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  write_file_atomic(path, encode_png(img));
}

Image read_png(const std::filesystem::path& path) {
  const auto data = slurp(path);
  return decode_png(data);
}

Image read_jpeg(const std::filesystem::path& path) {
  const auto data = slurp(path);
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  Image out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ParseError(path.string() + ": jpeg decode failed: " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  auto* base = reinterpret_cast<std::uint8_t*>(out.pixels().data());
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = base + static_cast<std::size_t>(cinfo.output_scanline) * out.width() * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

Image read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  throw IngestError("unsupported image format: " + path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename failed: " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gazespiral
