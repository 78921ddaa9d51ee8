#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazespiral/image.hpp"

namespace gazespiral {

/// One gaze sample per video frame after synchronization. Coordinates are
/// fractions of the frame size and are meaningless when `valid` is false.
struct GazeSample {
  std::int64_t timestamp_ms = 0;
  int frame_index = 0;
  double x_norm = 0.0;
  double y_norm = 0.0;
  bool valid = false;

  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

enum class FrameSourceKind { ImageDirectory, RawStream, Generated };

const char* to_string(FrameSourceKind kind);
FrameSourceKind frame_source_kind_from_string(const std::string& s);

/// Read-only random access to the frames of one recording. Cheap to copy;
/// copies share the underlying reader. Safe for concurrent `frame()` calls.
class FrameSource {
 public:
  using Generator = std::function<Image(int frame_index)>;

  FrameSource() = default;

  /// Directory of `frame_%06d.png` / `.jpg` files, ordered by their numeric suffix.
  static FrameSource open_image_directory(const std::filesystem::path& dir, int width, int height, double fps,
                                          int frame_count = 0);
  /// Headerless RGB24 frames back to back. `frame_count` 0 derives it from the file size.
  static FrameSource open_raw_stream(const std::filesystem::path& file, int width, int height, double fps,
                                     int frame_count = 0);
  /// Procedural frames, used for synthetic data and tests.
  static FrameSource generated(int width, int height, double fps, int frame_count, Generator gen);

  FrameSourceKind kind() const { return kind_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double fps() const { return fps_; }
  int frame_count() const { return frame_count_; }
  const std::filesystem::path& path() const { return path_; }

  /// Decodes frame `index`. Throws IngestError on I/O failure or size mismatch.
  Image frame(int index) const;

  class Reader {
   public:
    virtual ~Reader() = default;
    virtual Image read(int index) const = 0;
  };

 private:
  FrameSourceKind kind_ = FrameSourceKind::Generated;
  int width_ = 0;
  int height_ = 0;
  double fps_ = 0.0;
  int frame_count_ = 0;
  std::filesystem::path path_;
  std::shared_ptr<const Reader> reader_;
};

struct Recording {
  std::string id;
  FrameSource frames;
  std::vector<GazeSample> gaze;  // exactly one per frame
};

struct DataQualityReport {
  std::size_t total_samples = 0;
  std::size_t invalid_samples = 0;
  double loss_fraction = 0.0;
  int longest_invalid_run_frames = 0;
  std::vector<std::pair<int, int>> invalid_runs;  // inclusive frame spans, sorted

  friend bool operator==(const DataQualityReport&, const DataQualityReport&) = default;
};

enum class GazeSpace { Normalized, Pixels };

struct GazeCsvOptions {
  GazeSpace space = GazeSpace::Normalized;
  int frame_width = 0;   // required for GazeSpace::Pixels
  int frame_height = 0;  // required for GazeSpace::Pixels
};

/// Distance outside [0,1] that is clamped instead of rejected.
inline constexpr double kGazeClampTolerance = 0.1;

/// Parses the gaze CSV (`frame_index,timestamp_ms,x_norm,y_norm,valid`) and
/// synchronizes it to `frame_count` frames: absent frames become invalid
/// samples, repeated frames are averaged over their valid rows.
std::vector<GazeSample> load_gaze_csv(const std::filesystem::path& path, int frame_count,
                                      const GazeCsvOptions& opts = {});
std::vector<GazeSample> parse_gaze_csv(std::istream& in, int frame_count, const GazeCsvOptions& opts = {});

/// Writes samples in the CSV schema accepted by load_gaze_csv.
void write_gaze_csv(const std::filesystem::path& path, std::span<const GazeSample> samples);

DataQualityReport data_quality(std::span<const GazeSample> gaze);
inline DataQualityReport data_quality(const Recording& rec) { return data_quality(rec.gaze); }

/// `{total_samples,invalid_samples,loss_fraction,longest_invalid_run_frames,invalid_runs:[[s,e],...]}`.
std::string data_quality_to_json(const DataQualityReport& report);
DataQualityReport data_quality_from_json(const std::string& text);

/// Loads a recording manifest:
/// `{id, frames:{kind,path,width,height,fps,frame_count}, gaze_csv[, gaze_space]}`.
/// Relative paths resolve against the manifest's directory.
Recording load_recording(const std::filesystem::path& manifest);

/// Builds a recording from a raw RGB24 stream and a gaze CSV.
Recording load_raw_recording(std::string id, const std::filesystem::path& raw_stream,
                             const std::filesystem::path& gaze_csv, int width, int height, double fps,
                             const GazeCsvOptions& opts = {});

struct ManifestInfo {
  std::string id;
  FrameSourceKind kind = FrameSourceKind::RawStream;
  std::string frames_path;
  int width = 0;
  int height = 0;
  double fps = 25.0;
  int frame_count = 0;
  std::string gaze_csv;
};
void write_manifest(const std::filesystem::path& path, const ManifestInfo& info);

/// Writes frames as one RGB24 stream file.
void write_raw_stream(const std::filesystem::path& path, const FrameSource& frames);

}  // namespace gazespiral
