#include "gazespiral/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

namespace gazespiral {

namespace fs = std::filesystem;

const char* to_string(FrameSourceKind kind) {
  switch (kind) {
    case FrameSourceKind::ImageDirectory: return "image-directory";
    case FrameSourceKind::RawStream: return "raw-frame-stream";
    case FrameSourceKind::Generated: return "generated";
  }
  return "?";
}

FrameSourceKind frame_source_kind_from_string(const std::string& s) {
  if (s == "image-directory") return FrameSourceKind::ImageDirectory;
  if (s == "raw-frame-stream") return FrameSourceKind::RawStream;
  throw ParseError("unknown frame source kind '" + s + "'");
}

namespace {

void check_dims(int width, int height, double fps) {
  if (width <= 0 || height <= 0) throw IngestError("frame dimensions must be positive");
  if (!(fps > 0.0)) throw IngestError("fps must be positive");
}

class DirectoryReader final : public FrameSource::Reader {
 public:
  DirectoryReader(std::vector<fs::path> files, int w, int h) : files_(std::move(files)), w_(w), h_(h) {}

  Image read(int index) const override {
    Image img = read_image(files_.at(static_cast<std::size_t>(index)));
    if (img.width() != w_ || img.height() != h_)
      throw IngestError(files_[index].string() + ": expected " + std::to_string(w_) + "x" + std::to_string(h_));
    return img;
  }

 private:
  std::vector<fs::path> files_;
  int w_;
  int h_;
};

class RawReader final : public FrameSource::Reader {
 public:
  RawReader(fs::path file, int w, int h) : file_(std::move(file)), w_(w), h_(h) {}

  Image read(int index) const override {
    std::ifstream in(file_, std::ios::binary);
    if (!in) throw IngestError("cannot open " + file_.string());
    const std::streamoff frame_bytes = static_cast<std::streamoff>(w_) * h_ * 3;
    in.seekg(frame_bytes * index);
    Image img(w_, h_);
    in.read(reinterpret_cast<char*>(img.pixels().data()), frame_bytes);
    if (in.gcount() != frame_bytes)
      throw IngestError(file_.string() + ": short read at frame " + std::to_string(index));
    return img;
  }

 private:
  fs::path file_;
  int w_;
  int h_;
};

class GeneratedReader final : public FrameSource::Reader {
 public:
  explicit GeneratedReader(FrameSource::Generator gen) : gen_(std::move(gen)) {}
  Image read(int index) const override { return gen_(index); }

 private:
  FrameSource::Generator gen_;
};

}  // namespace

FrameSource FrameSource::open_image_directory(const fs::path& dir, int width, int height, double fps,
                                              int frame_count) {
  check_dims(width, height, fps);
  if (!fs::is_directory(dir)) throw IngestError("frame directory not found: " + dir.string());
  static const std::regex pattern(R"(frame_(\d+)\.(png|jpg|jpeg|PNG|JPG|JPEG))");
  std::vector<std::pair<long long, fs::path>> numbered;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern))
      numbered.emplace_back(std::stoll(m[1].str()), entry.path());
  }
  std::sort(numbered.begin(), numbered.end());
  if (numbered.empty()) throw IngestError("no frame_*.png/jpg files in " + dir.string());
  if (frame_count > 0 && static_cast<int>(numbered.size()) != frame_count)
    throw IngestError(dir.string() + ": manifest says " + std::to_string(frame_count) + " frames, found " +
                      std::to_string(numbered.size()));
  std::vector<fs::path> files;
  files.reserve(numbered.size());
  for (auto& [n, p] : numbered) files.push_back(std::move(p));

  FrameSource src;
  src.kind_ = FrameSourceKind::ImageDirectory;
  src.width_ = width;
  src.height_ = height;
  src.fps_ = fps;
  src.frame_count_ = static_cast<int>(files.size());
  src.path_ = dir;
  src.reader_ = std::make_shared<DirectoryReader>(std::move(files), width, height);
  return src;
}

FrameSource FrameSource::open_raw_stream(const fs::path& file, int width, int height, double fps, int frame_count) {
  check_dims(width, height, fps);
  std::error_code ec;
  const auto size = fs::file_size(file, ec);
  if (ec) throw IngestError("cannot stat raw stream " + file.string() + ": " + ec.message());
  const std::uintmax_t frame_bytes = static_cast<std::uintmax_t>(width) * height * 3;
  if (size % frame_bytes != 0)
    throw IngestError(file.string() + ": size is not a multiple of " + std::to_string(frame_bytes) + " bytes");
  const auto available = static_cast<int>(size / frame_bytes);
  if (available < 1) throw IngestError(file.string() + ": no frames");
  if (frame_count > 0 && frame_count != available)
    throw IngestError(file.string() + ": manifest says " + std::to_string(frame_count) + " frames, stream has " +
                      std::to_string(available));

  FrameSource src;
  src.kind_ = FrameSourceKind::RawStream;
  src.width_ = width;
  src.height_ = height;
  src.fps_ = fps;
  src.frame_count_ = available;
  src.path_ = file;
  src.reader_ = std::make_shared<RawReader>(file, width, height);
  return src;
}

FrameSource FrameSource::generated(int width, int height, double fps, int frame_count, Generator gen) {
  check_dims(width, height, fps);
  if (frame_count < 1) throw IngestError("frame_count must be >= 1");
  FrameSource src;
  src.kind_ = FrameSourceKind::Generated;
  src.width_ = width;
  src.height_ = height;
  src.fps_ = fps;
  src.frame_count_ = frame_count;
  src.reader_ = std::make_shared<GeneratedReader>(std::move(gen));
  return src;
}

Image FrameSource::frame(int index) const {
  if (!reader_) throw IngestError("frame source not opened");
  if (index < 0 || index >= frame_count_)
    throw ParameterError("frame index " + std::to_string(index) + " out of range");
  return reader_->read(index);
}

// --- gaze CSV ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const char* name, std::size_t line) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError(std::string("non-numeric ") + name + " '" + std::string(field) + "'", line);
  return value;
}

double normalize_coordinate(double v, const char* name, std::size_t line) {
  if (!std::isfinite(v) || v < -kGazeClampTolerance || v > 1.0 + kGazeClampTolerance)
    throw ParseError(std::string(name) + " out of range: " + std::to_string(v), line);
  return std::clamp(v, 0.0, 1.0);
}

struct FrameAccumulator {
  bool seen = false;
  std::int64_t timestamp = 0;
  double sx = 0.0;
  double sy = 0.0;
  int valid_count = 0;
};

}  // namespace

std::vector<GazeSample> parse_gaze_csv(std::istream& in, int frame_count, const GazeCsvOptions& opts) {
  if (frame_count < 1) throw ParameterError("frame_count must be >= 1");
  if (opts.space == GazeSpace::Pixels && (opts.frame_width < 2 || opts.frame_height < 2))
    throw ParameterError("pixel-space gaze needs frame dimensions");

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  static const char* kColumns[] = {"frame_index", "timestamp_ms", "x_norm", "y_norm", "valid"};
  int col[5] = {-1, -1, -1, -1, -1};
  const auto header = split_fields(line);
  for (std::size_t i = 0; i < header.size(); ++i)
    for (int c = 0; c < 5; ++c)
      if (header[i] == kColumns[c]) col[c] = static_cast<int>(i);
  for (int c = 0; c < 5; ++c)
    if (col[c] < 0) throw ParseError(std::string("header lacks column '") + kColumns[c] + "'", 1);
  const std::size_t ncols = header.size();

  std::vector<FrameAccumulator> acc(static_cast<std::size_t>(frame_count));
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != ncols)
      throw ParseError("expected " + std::to_string(ncols) + " columns, got " + std::to_string(fields.size()),
                       line_no);
    const auto frame = parse_number<long long>(fields[col[0]], "frame_index", line_no);
    const auto ts = parse_number<long long>(fields[col[1]], "timestamp_ms", line_no);
    const auto valid_flag = parse_number<int>(fields[col[4]], "valid", line_no);
    if (valid_flag != 0 && valid_flag != 1) throw ParseError("valid must be 0 or 1", line_no);
    if (frame < 0) throw ParseError("negative frame_index", line_no);
    const bool valid = valid_flag == 1;

    double x = 0.0, y = 0.0;
    if (valid || !fields[col[2]].empty() || !fields[col[3]].empty()) {
      x = parse_number<double>(fields[col[2]], "x_norm", line_no);
      y = parse_number<double>(fields[col[3]], "y_norm", line_no);
    }
    // Rows past the video's end are dropped: trackers often record a little longer.
    if (frame >= frame_count) continue;
    if (valid) {
      if (opts.space == GazeSpace::Pixels) {
        x /= (opts.frame_width - 1);
        y /= (opts.frame_height - 1);
      }
      x = normalize_coordinate(x, "x_norm", line_no);
      y = normalize_coordinate(y, "y_norm", line_no);
    }

    FrameAccumulator& a = acc[static_cast<std::size_t>(frame)];
    a.timestamp = a.seen ? std::min<std::int64_t>(a.timestamp, ts) : ts;
    a.seen = true;
    if (valid) {
      a.sx += x;
      a.sy += y;
      ++a.valid_count;
    }
  }

  std::vector<GazeSample> out(static_cast<std::size_t>(frame_count));
  std::int64_t last_ts = 0;
  for (int i = 0; i < frame_count; ++i) {
    const FrameAccumulator& a = acc[i];
    GazeSample& s = out[i];
    s.frame_index = i;
    s.timestamp_ms = a.seen ? a.timestamp : last_ts;
    last_ts = s.timestamp_ms;
    if (a.valid_count > 0) {
      s.valid = true;
      s.x_norm = a.sx / a.valid_count;
      s.y_norm = a.sy / a.valid_count;
    }
  }
  return out;
}

std::vector<GazeSample> load_gaze_csv(const fs::path& path, int frame_count, const GazeCsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open gaze csv " + path.string());
  return parse_gaze_csv(in, frame_count, opts);
}

void write_gaze_csv(const fs::path& path, std::span<const GazeSample> samples) {
  std::ostringstream out;
  out.precision(17);
  out << "frame_index,timestamp_ms,x_norm,y_norm,valid\n";
  for (const auto& s : samples)
    out << s.frame_index << ',' << s.timestamp_ms << ',' << s.x_norm << ',' << s.y_norm << ','
        << (s.valid ? 1 : 0) << '\n';
  write_file_atomic(path, out.str());
}

DataQualityReport data_quality(std::span<const GazeSample> gaze) {
  if (gaze.empty()) throw DataError("empty recording");
  DataQualityReport r;
  r.total_samples = gaze.size();
  int run_start = -1;
  for (std::size_t i = 0; i <= gaze.size(); ++i) {
    const bool invalid = i < gaze.size() && !gaze[i].valid;
    if (invalid) {
      ++r.invalid_samples;
      if (run_start < 0) run_start = static_cast<int>(i);
    } else if (run_start >= 0) {
      const int end = static_cast<int>(i) - 1;
      r.invalid_runs.emplace_back(run_start, end);
      r.longest_invalid_run_frames = std::max(r.longest_invalid_run_frames, end - run_start + 1);
      run_start = -1;
    }
  }
  r.loss_fraction = static_cast<double>(r.invalid_samples) / static_cast<double>(r.total_samples);
  return r;
}

// --- manifests --------------------------------------------------------------

std::string data_quality_to_json(const DataQualityReport& r) {
  nlohmann::ordered_json j;
  j["total_samples"] = r.total_samples;
  j["invalid_samples"] = r.invalid_samples;
  j["loss_fraction"] = r.loss_fraction;
  j["longest_invalid_run_frames"] = r.longest_invalid_run_frames;
  auto& runs = j["invalid_runs"] = nlohmann::ordered_json::array();
  for (const auto& [s, e] : r.invalid_runs) runs.push_back({s, e});
  return j.dump();
}

DataQualityReport data_quality_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DataQualityReport r;
    r.total_samples = j.at("total_samples").get<std::size_t>();
    r.invalid_samples = j.at("invalid_samples").get<std::size_t>();
    r.loss_fraction = j.at("loss_fraction").get<double>();
    r.longest_invalid_run_frames = j.at("longest_invalid_run_frames").get<int>();
    for (const auto& run : j.at("invalid_runs")) r.invalid_runs.emplace_back(run.at(0).get<int>(), run.at(1).get<int>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("quality json: ") + e.what());
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

Recording load_recording(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IngestError("cannot open manifest " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(manifest.string() + ": " + e.what());
  }
  try {
    const fs::path base = manifest.parent_path();
    const auto& fr = j.at("frames");
    const auto kind = frame_source_kind_from_string(fr.at("kind").get<std::string>());
    const int width = fr.at("width").get<int>();
    const int height = fr.at("height").get<int>();
    const double fps = fr.at("fps").get<double>();
    const int frame_count = fr.value("frame_count", 0);
    const fs::path frames_path = resolve(base, fr.at("path").get<std::string>());

    Recording rec;
    rec.id = j.at("id").get<std::string>();
    rec.frames = kind == FrameSourceKind::ImageDirectory
                     ? FrameSource::open_image_directory(frames_path, width, height, fps, frame_count)
                     : FrameSource::open_raw_stream(frames_path, width, height, fps, frame_count);
    GazeCsvOptions opts;
    if (j.value("gaze_space", std::string("normalized")) == "pixels") {
      opts.space = GazeSpace::Pixels;
      opts.frame_width = width;
      opts.frame_height = height;
    }
    rec.gaze = load_gaze_csv(resolve(base, j.at("gaze_csv").get<std::string>()), rec.frames.frame_count(), opts);
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(manifest.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw IngestError(manifest.string() + ": gaze csv " + e.what());
  }
}

Recording load_raw_recording(std::string id, const fs::path& raw_stream, const fs::path& gaze_csv, int width,
                             int height, double fps, const GazeCsvOptions& opts) {
  Recording rec;
  rec.id = std::move(id);
  rec.frames = FrameSource::open_raw_stream(raw_stream, width, height, fps);
  GazeCsvOptions o = opts;
  if (o.space == GazeSpace::Pixels) {
    o.frame_width = width;
    o.frame_height = height;
  }
  try {
    rec.gaze = load_gaze_csv(gaze_csv, rec.frames.frame_count(), o);
  } catch (const ParseError& e) {
    throw IngestError(gaze_csv.string() + ": " + e.what());
  }
  return rec;
}

void write_manifest(const fs::path& path, const ManifestInfo& info) {
  nlohmann::ordered_json j;
  j["id"] = info.id;
  j["frames"] = {{"kind", to_string(info.kind)}, {"path", info.frames_path}, {"width", info.width},
                 {"height", info.height},        {"fps", info.fps},          {"frame_count", info.frame_count}};
  j["gaze_csv"] = info.gaze_csv;
  write_file_atomic(path, j.dump(2) + "\n");
}

void write_raw_stream(const fs::path& path, const FrameSource& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  for (int i = 0; i < frames.frame_count(); ++i) {
    const Image img = frames.frame(i);
    const auto bytes = img.bytes();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw IngestError("write failed: " + path.string());
}

}  // namespace gazespiral
