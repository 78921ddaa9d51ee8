#include "gazespiral/fixation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>

#include "gazespiral/parallel.hpp"

namespace gazespiral {

std::pair<int, int> patch_origin(int frame_w, int frame_h, double x_norm, double y_norm, int size) {
  const int cx = static_cast<int>(std::lround(std::clamp(x_norm, 0.0, 1.0) * (frame_w - 1)));
  const int cy = static_cast<int>(std::lround(std::clamp(y_norm, 0.0, 1.0) * (frame_h - 1)));
  int left = cx - size / 2;
  int top = cy - size / 2;
  left = frame_w >= size ? std::clamp(left, 0, frame_w - size) : 0;
  top = frame_h >= size ? std::clamp(top, 0, frame_h - size) : 0;
  return {left, top};
}

FeatureVector patch_descriptor(const Image& patch) {
  FeatureVector f;
  f.values.assign(kFeatureDim, 0.0);
  if (patch.empty()) return f;

  for (const Rgb& p : patch.pixels()) {
    const int bin = (p.r >> 6) * 16 + (p.g >> 6) * 4 + (p.b >> 6);
    f.values[bin] += 1.0;
  }
  const double n = static_cast<double>(patch.pixels().size());
  for (int i = 0; i < kColorBins; ++i) f.values[i] /= n;

  const int w = patch.width();
  const int h = patch.height();
  auto luma = [&](int x, int y) {
    const Rgb& p = patch.at(x, y);
    return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  };
  constexpr double kSector = std::numbers::pi / 4.0;
  double total = 0.0;
  // Central differences on interior pixels only, so the descriptor depends on
  // the patch content alone.
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = 0.5 * (luma(x + 1, y) - luma(x - 1, y));
      const double gy = 0.5 * (luma(x, y + 1) - luma(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      const int bin = static_cast<int>(std::floor(theta / kSector + 0.5)) % kGradientBins;
      f.values[kColorBins + bin] += mag;
      total += mag;
    }
  }
  if (total > 0.0)
    for (int i = 0; i < kGradientBins; ++i) f.values[kColorBins + i] /= total;
  return f;
}

FeatureVector extract_feature(const Image& frame, double x_norm, double y_norm, int patch_px) {
  if (patch_px < 8 || patch_px % 2 != 0) throw ParameterError("patch_px must be even and >= 8");
  const auto [left, top] = patch_origin(frame.width(), frame.height(), x_norm, y_norm, patch_px);
  return patch_descriptor(crop_clamped(frame, left, top, patch_px, patch_px));
}

HistogramFeatureExtractor::HistogramFeatureExtractor(int patch_px) : patch_px_(patch_px) {
  if (patch_px < 8 || patch_px % 2 != 0) throw ParameterError("patch_px must be even and >= 8");
}

FeatureVector HistogramFeatureExtractor::extract(const Image& frame, double x_norm, double y_norm) const {
  return extract_feature(frame, x_norm, y_norm, patch_px_);
}

std::vector<Fixation> detect_fixation_spans(std::span<const GazeSample> gaze, double fps,
                                            const FixationParams& params) {
  if (!(params.dispersion_threshold > 0.0)) throw ParameterError("dispersion_threshold must be > 0");
  if (!(params.min_duration_ms > 0.0)) throw ParameterError("min_duration_ms must be > 0");
  if (!(fps > 0.0)) throw ParameterError("fps must be > 0");

  const double frame_ms = 1000.0 / fps;
  std::vector<Fixation> out;
  const std::size_t n = gaze.size();
  std::size_t start = 0;
  while (start < n) {
    if (!gaze[start].valid) {
      ++start;
      continue;
    }
    double min_x = gaze[start].x_norm, max_x = min_x;
    double min_y = gaze[start].y_norm, max_y = min_y;
    std::size_t end = start;
    while (end + 1 < n && gaze[end + 1].valid) {
      const GazeSample& s = gaze[end + 1];
      const double nx0 = std::min(min_x, s.x_norm), nx1 = std::max(max_x, s.x_norm);
      const double ny0 = std::min(min_y, s.y_norm), ny1 = std::max(max_y, s.y_norm);
      if ((nx1 - nx0) + (ny1 - ny0) > params.dispersion_threshold) break;
      min_x = nx0, max_x = nx1, min_y = ny0, max_y = ny1;
      ++end;
    }
    const double duration = static_cast<double>(end - start + 1) * frame_ms;
    if (duration >= params.min_duration_ms) {
      Fixation f;
      f.start_frame = static_cast<int>(start);
      f.end_frame = static_cast<int>(end);
      f.duration_ms = duration;
      double sx = 0.0, sy = 0.0;
      for (std::size_t i = start; i <= end; ++i) {
        sx += gaze[i].x_norm;
        sy += gaze[i].y_norm;
      }
      const double count = static_cast<double>(end - start + 1);
      f.centroid_x = sx / count;
      f.centroid_y = sy / count;
      out.push_back(std::move(f));
    }
    // Windows partition the valid samples independently of min_duration_ms,
    // so the duration filter is monotone.
    start = end + 1;
  }
  return out;
}

std::vector<Fixation> detect_fixations(const Recording& rec, const FixationParams& params,
                                       const FeatureExtractor& extractor) {
  auto fixations = detect_fixation_spans(rec.gaze, rec.frames.fps(), params);
  parallel_for(fixations.size(), [&](std::size_t i) {
    Fixation& f = fixations[i];
    const Image frame = rec.frames.frame(f.middle_frame());
    f.feature = extractor.extract(frame, f.centroid_x, f.centroid_y);
  });
  return fixations;
}

Thumbnail make_thumbnail(const Image& frame, double x_norm, double y_norm, int size) {
  if (size <= 0) throw ParameterError("thumbnail size must be positive");
  const auto [left, top] = patch_origin(frame.width(), frame.height(), x_norm, y_norm, size);
  return Thumbnail{crop_clamped(frame, left, top, size, size), 0, 0};
}

Thumbnail make_thumbnail(const Recording& rec, const std::vector<Fixation>& fixations, int fixation_index,
                         int size) {
  if (fixation_index < 0 || fixation_index >= static_cast<int>(fixations.size()))
    throw ParameterError("fixation index out of range");
  const Fixation& f = fixations[fixation_index];
  Thumbnail t = make_thumbnail(rec.frames.frame(f.middle_frame()), f.centroid_x, f.centroid_y, size);
  t.source_frame = f.middle_frame();
  t.fixation_index = fixation_index;
  return t;
}

std::string fixations_to_json(std::span<const Fixation> fixations) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Fixation& f : fixations) {
    nlohmann::ordered_json j;
    j["start_frame"] = f.start_frame;
    j["end_frame"] = f.end_frame;
    j["centroid"] = {f.centroid_x, f.centroid_y};
    j["duration_ms"] = f.duration_ms;
    j["feature"] = f.feature.values;
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

std::vector<Fixation> fixations_from_json(const std::string& text) {
  std::vector<Fixation> out;
  try {
    for (const auto& j : nlohmann::json::parse(text)) {
      Fixation f;
      f.start_frame = j.at("start_frame").get<int>();
      f.end_frame = j.at("end_frame").get<int>();
      f.centroid_x = j.at("centroid").at(0).get<double>();
      f.centroid_y = j.at("centroid").at(1).get<double>();
      f.duration_ms = j.at("duration_ms").get<double>();
      f.feature.values = j.at("feature").get<std::vector<double>>();
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fixation json: ") + e.what());
  }
  return out;
}

}  // namespace gazespiral
