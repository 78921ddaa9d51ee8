#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gazespiral/ingest.hpp"

namespace gazespiral::synth {

/// Two-colour stripe or checker pattern; the building block of synthetic scenes.
struct Texture {
  Rgb first;
  Rgb second;
  int orientation_deg = 0;  // stripes: 0, 45, 90, 135; ignored for checkers
  bool checker = false;
  int period_px = 8;
};

Rgb sample(const Texture& tex, int x, int y);
Image render_texture(const Texture& tex, int width, int height, int offset_x = 0, int offset_y = 0);

/// Six mutually distinct painting textures (disjoint colour bins).
const std::vector<Texture>& gallery_paintings();
/// Plain wall seen between paintings.
Texture wall_texture();

/// Deterministic generator; identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int integer(int lo, int hi);           // inclusive
 private:
  std::mt19937_64 engine_;
};

struct SyntheticRecording {
  Recording recording;
  std::vector<int> frame_scene;  // per frame: scene index (painting / event texture), -1 for wall or noise
  std::vector<std::pair<int, int>> planted_spans;  // frame spans of planted content
};

struct SceneOptions {
  int width = 160;
  int height = 120;
  double fps = 25.0;
  int frame_count = 250;
  double jitter = 0.006;         // per-frame gaze jitter inside a fixation (normalized units)
  double blink_probability = 0.01;
  std::uint64_t seed = 1;
};

/// A visitor walking past the paintings in `order`: for each painting a few
/// frames of transit over the wall, then 2-4 fixations on the painting.
SyntheticRecording gallery_recording(std::string id, const std::vector<int>& order, const SceneOptions& opts);

/// 7 "L" visitors (paintings 0..5) and 7 "R" visitors (5..0), ids L1..L7, R1..R7.
std::vector<SyntheticRecording> gallery_study(int per_group = 7, std::uint64_t seed = 2024,
                                              const SceneOptions& base = {});

/// Fixations on random noise textures with an event of `event_length`
/// fixations planted twice. planted_spans holds the two event frame spans.
SyntheticRecording event_recording(std::string id, const SceneOptions& opts, int event_length = 3,
                                   int noise_fixations = 16);

/// Scene texture with a slow gaze drift and planted invalid frame runs.
SyntheticRecording drift_recording(std::string id, const SceneOptions& opts,
                                   const std::vector<std::pair<int, int>>& invalid_runs = {});

}  // namespace gazespiral::synth
