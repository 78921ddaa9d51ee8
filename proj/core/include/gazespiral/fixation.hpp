#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gazespiral/image.hpp"
#include "gazespiral/ingest.hpp"

namespace gazespiral {

/// Appearance descriptor of one fixation. All entries are non-negative.
struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline constexpr int kColorBins = 64;     // 4 x 4 x 4 RGB cube
inline constexpr int kGradientBins = 8;   // 45 degree orientation sectors
inline constexpr int kFeatureDim = kColorBins + kGradientBins;
inline constexpr int kDefaultPatchPx = 64;

struct Fixation {
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double duration_ms = 0.0;
  FeatureVector feature;

  int middle_frame() const { return start_frame + (end_frame - start_frame) / 2; }
};

struct Thumbnail {
  Image pixels;
  int source_frame = 0;
  int fixation_index = 0;
};

/// Maps an image patch around a gaze point to a feature vector. Implementations
/// must be thread-safe; learned embeddings can be plugged in here.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureVector extract(const Image& frame, double x_norm, double y_norm) const = 0;
  virtual int dimension() const = 0;
};

/// 64-bin RGB histogram followed by an 8-bin magnitude-weighted gradient
/// orientation histogram, each L1-normalized.
class HistogramFeatureExtractor final : public FeatureExtractor {
 public:
  explicit HistogramFeatureExtractor(int patch_px = kDefaultPatchPx);
  FeatureVector extract(const Image& frame, double x_norm, double y_norm) const override;
  int dimension() const override { return kFeatureDim; }
  int patch_px() const { return patch_px_; }

 private:
  int patch_px_;
};

struct FixationParams {
  double dispersion_threshold = 0.05;  // normalized units, (max x - min x) + (max y - min y)
  double min_duration_ms = 100.0;
};

/// Top-left corner of the size x size window centered on the gaze point, shifted
/// to stay inside the frame when the frame is large enough.
std::pair<int, int> patch_origin(int frame_w, int frame_h, double x_norm, double y_norm, int size);

/// Descriptor of a patch_px x patch_px patch centered on the gaze point.
FeatureVector extract_feature(const Image& frame, double x_norm, double y_norm, int patch_px = kDefaultPatchPx);

/// Descriptor of an already cropped patch (no border handling).
FeatureVector patch_descriptor(const Image& patch);

/// Dispersion-threshold (I-DT) fixation spans without features. Spans are grown
/// greedily left to right over valid samples while the dispersion stays under
/// the threshold; spans shorter than min_duration_ms are discarded.
std::vector<Fixation> detect_fixation_spans(std::span<const GazeSample> gaze, double fps,
                                            const FixationParams& params = {});

/// Spans plus per-fixation features sampled at each fixation's middle frame.
std::vector<Fixation> detect_fixations(const Recording& rec, const FixationParams& params = {},
                                       const FeatureExtractor& extractor = HistogramFeatureExtractor{});

Thumbnail make_thumbnail(const Image& frame, double x_norm, double y_norm, int size = kDefaultPatchPx);
Thumbnail make_thumbnail(const Recording& rec, const std::vector<Fixation>& fixations, int fixation_index,
                         int size = kDefaultPatchPx);

/// JSON array of `{start_frame,end_frame,centroid:[x,y],duration_ms,feature:[...]}`.
std::string fixations_to_json(std::span<const Fixation> fixations);
std::vector<Fixation> fixations_from_json(const std::string& text);

}  // namespace gazespiral
