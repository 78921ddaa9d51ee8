#include "gazespiral/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace gazespiral::synth {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

// Distributions in <random> are implementation-defined; these conversions are not.
double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::integer(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

Rgb sample(const Texture& tex, int x, int y) {
  const int p = std::max(1, tex.period_px);
  auto cell = [p](int v) { return v >= 0 ? v / p : -((-v + p - 1) / p); };
  int band;
  if (tex.checker) {
    band = cell(x) + cell(y);
  } else {
    switch (tex.orientation_deg) {
      case 0: band = cell(x); break;
      case 90: band = cell(y); break;
      case 45: band = cell(x + y); break;
      default: band = cell(x - y); break;
    }
  }
  return (band & 1) ? tex.second : tex.first;
}

Image render_texture(const Texture& tex, int width, int height, int offset_x, int offset_y) {
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) img.at(x, y) = sample(tex, x + offset_x, y + offset_y);
  return img;
}

const std::vector<Texture>& gallery_paintings() {
  static const std::vector<Texture> paintings{
      {{220, 40, 40}, {240, 200, 60}, 0, false, 8},
      {{40, 80, 200}, {230, 230, 230}, 90, false, 8},
      {{40, 160, 60}, {20, 20, 20}, 45, false, 8},
      {{150, 60, 180}, {250, 150, 40}, 135, false, 8},
      {{100, 200, 220}, {120, 60, 20}, 0, true, 8},
      {{230, 120, 160}, {60, 60, 120}, 45, true, 12},
  };
  return paintings;
}

Texture wall_texture() { return {{128, 128, 128}, {128, 128, 128}, 0, false, 8}; }

namespace {

int color_bin(Rgb c) { return (c.r >> 6) * 16 + (c.g >> 6) * 4 + (c.b >> 6); }

Rgb bin_color(int bin) {
  auto level = [](int v) { return static_cast<std::uint8_t>(v * 64 + 32); };
  return {level(bin / 16), level(bin / 4 % 4), level(bin % 4)};
}

// What the camera sees in one frame.
struct FramePlan {
  int scene = -1;     // index into the texture table
  int offset_x = 0;
  int offset_y = 0;
};

Recording assemble(std::string id, const SceneOptions& opts, std::vector<Texture> textures,
                   std::vector<FramePlan> plan, std::vector<GazeSample> gaze) {
  const int w = opts.width, h = opts.height;
  auto shared_textures = std::make_shared<const std::vector<Texture>>(std::move(textures));
  auto shared_plan = std::make_shared<const std::vector<FramePlan>>(std::move(plan));
  const int count = static_cast<int>(shared_plan->size());
  Recording rec;
  rec.id = std::move(id);
  rec.frames = FrameSource::generated(w, h, opts.fps, count, [shared_textures, shared_plan, w, h](int i) {
    const FramePlan& p = (*shared_plan)[static_cast<std::size_t>(i)];
    return render_texture((*shared_textures)[static_cast<std::size_t>(p.scene)], w, h, p.offset_x, p.offset_y);
  });
  for (int i = 0; i < count; ++i) {
    gaze[static_cast<std::size_t>(i)].frame_index = i;
    gaze[static_cast<std::size_t>(i)].timestamp_ms = std::llround(i * 1000.0 / opts.fps);
  }
  rec.gaze = std::move(gaze);
  return rec;
}

struct Point {
  double x, y;
};

// Random fixation target at least 0.3 (L1) away from `from`.
Point next_target(Rng& rng, Point from) {
  for (;;) {
    Point p{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    if (std::abs(p.x - from.x) + std::abs(p.y - from.y) >= 0.3) return p;
  }
}

class Builder {
 public:
  Builder(const SceneOptions& opts, Rng& rng) : opts_(opts), rng_(rng) {}

  void fixation(int scene, Point at, int frames) {
    for (int f = 0; f < frames; ++f) {
      GazeSample s;
      s.valid = rng_.uniform() >= opts_.blink_probability;
      s.x_norm = std::clamp(at.x + rng_.uniform(-opts_.jitter, opts_.jitter), 0.0, 1.0);
      s.y_norm = std::clamp(at.y + rng_.uniform(-opts_.jitter, opts_.jitter), 0.0, 1.0);
      push(scene, s);
    }
    last_ = at;
  }

  // Gaze moves in equal steps from the last fixation to `to`, ending short of it.
  void saccade(int scene, Point to, int frames) {
    for (int f = 1; f <= frames; ++f) {
      const double t = static_cast<double>(f) / (frames + 1);
      GazeSample s;
      s.valid = true;
      s.x_norm = last_.x + (to.x - last_.x) * t;
      s.y_norm = last_.y + (to.y - last_.y) * t;
      push(scene, s);
    }
  }

  void drift_pan() {
    pan_x_ += rng_.integer(-1, 1);
    pan_y_ += rng_.integer(-1, 1);
  }

  Point last() const { return last_; }
  int frames() const { return static_cast<int>(plan_.size()); }
  std::vector<FramePlan> take_plan() { return std::move(plan_); }
  std::vector<GazeSample> take_gaze() { return std::move(gaze_); }

 private:
  void push(int scene, GazeSample s) {
    drift_pan();
    plan_.push_back({scene, pan_x_, pan_y_});
    gaze_.push_back(s);
  }

  const SceneOptions& opts_;
  Rng& rng_;
  std::vector<FramePlan> plan_;
  std::vector<GazeSample> gaze_;
  Point last_{0.5, 0.5};
  int pan_x_ = 0;
  int pan_y_ = 0;
};

}  // namespace

SyntheticRecording gallery_recording(std::string id, const std::vector<int>& order, const SceneOptions& opts) {
  if (order.empty()) throw ParameterError("gallery_recording: empty visit order");
  std::vector<Texture> textures = gallery_paintings();
  const int wall = static_cast<int>(textures.size());
  textures.push_back(wall_texture());

  Rng rng(opts.seed);
  Builder b(opts, rng);
  SyntheticRecording out;
  const int n = static_cast<int>(order.size());
  for (int v = 0; v < n; ++v) {
    const int painting = order[static_cast<std::size_t>(v)];
    if (painting < 0 || painting >= wall) throw ParameterError("gallery_recording: painting index out of range");
    const int budget_end = opts.frame_count * (v + 1) / n;
    Point target = next_target(rng, b.last());
    const int transit = rng.integer(4, 6);
    b.saccade(wall, target, transit);
    const int fixations = rng.integer(2, 4);
    const int start = b.frames();
    const int available = budget_end - start - 2 * (fixations - 1);
    for (int f = 0; f < fixations; ++f) {
      if (f > 0) {
        target = next_target(rng, b.last());
        b.saccade(painting, target, 2);
      }
      const int len = available / fixations + (f < available % fixations ? 1 : 0);
      b.fixation(painting, target, std::max(1, len));
    }
    out.planted_spans.emplace_back(start, b.frames() - 1);
  }
  auto plan = b.take_plan();
  for (const FramePlan& p : plan) out.frame_scene.push_back(p.scene == wall ? -1 : p.scene);
  out.recording = assemble(std::move(id), opts, std::move(textures), std::move(plan), b.take_gaze());
  return out;
}

std::vector<SyntheticRecording> gallery_study(int per_group, std::uint64_t seed, const SceneOptions& base) {
  const int count = static_cast<int>(gallery_paintings().size());
  std::vector<int> left(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) left[static_cast<std::size_t>(i)] = i;
  const std::vector<int> right(left.rbegin(), left.rend());
  std::vector<SyntheticRecording> out;
  for (int group = 0; group < 2; ++group)
    for (int i = 0; i < per_group; ++i) {
      SceneOptions opts = base;
      opts.seed = seed * 1000 + static_cast<std::uint64_t>(group * per_group + i);
      out.push_back(gallery_recording((group == 0 ? "L" : "R") + std::to_string(i + 1), group == 0 ? left : right,
                                      opts));
    }
  return out;
}

SyntheticRecording event_recording(std::string id, const SceneOptions& opts, int event_length, int noise_fixations) {
  const auto& paintings = gallery_paintings();
  if (event_length < 1 || event_length > static_cast<int>(paintings.size()))
    throw ParameterError("event_recording: event length must be in [1, 6]");
  if (noise_fixations < 0) throw ParameterError("event_recording: negative noise count");

  Rng rng(opts.seed);
  std::vector<Texture> textures(paintings.begin(), paintings.begin() + event_length);
  std::vector<bool> reserved(64, false);
  for (const Texture& t : paintings) reserved[color_bin(t.first)] = reserved[color_bin(t.second)] = true;
  auto noise_texture = [&] {
    int a, c;
    do a = rng.integer(0, 63); while (reserved[a]);
    do c = rng.integer(0, 63); while (reserved[c] || c == a);
    static constexpr int kOrientations[] = {0, 45, 90, 135};
    return Texture{bin_color(a), bin_color(c), kOrientations[rng.integer(0, 3)], rng.uniform() < 0.3,
                   rng.integer(5, 12)};
  };

  // Noise split into three runs around the two event occurrences.
  const int first = noise_fixations / 3;
  const int second = noise_fixations / 3;
  std::vector<int> scenes;
  auto add_noise = [&](int count) {
    for (int i = 0; i < count; ++i) {
      scenes.push_back(static_cast<int>(textures.size()));
      textures.push_back(noise_texture());
    }
  };
  std::vector<std::pair<int, int>> event_positions;  // fixation index ranges
  add_noise(first);
  event_positions.emplace_back(static_cast<int>(scenes.size()), static_cast<int>(scenes.size()) + event_length - 1);
  for (int e = 0; e < event_length; ++e) scenes.push_back(e);
  add_noise(second);
  event_positions.emplace_back(static_cast<int>(scenes.size()), static_cast<int>(scenes.size()) + event_length - 1);
  for (int e = 0; e < event_length; ++e) scenes.push_back(e);
  add_noise(noise_fixations - first - second);

  SceneOptions no_blinks = opts;
  no_blinks.blink_probability = 0.0;
  Builder b(no_blinks, rng);
  SyntheticRecording out;
  std::vector<int> fixation_start;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Point target = next_target(rng, b.last());
    if (i > 0) b.saccade(scenes[i], target, 2);
    fixation_start.push_back(b.frames());
    b.fixation(scenes[i], target, 8);
  }
  for (const auto& [s, e] : event_positions)
    out.planted_spans.emplace_back(fixation_start[static_cast<std::size_t>(s)],
                                   fixation_start[static_cast<std::size_t>(e)] + 7);
  auto plan = b.take_plan();
  for (const FramePlan& p : plan) out.frame_scene.push_back(p.scene < event_length ? p.scene : -1);
  out.recording = assemble(std::move(id), opts, std::move(textures), std::move(plan), b.take_gaze());
  return out;
}

SyntheticRecording drift_recording(std::string id, const SceneOptions& opts,
                                   const std::vector<std::pair<int, int>>& invalid_runs) {
  if (opts.frame_count < 1) throw ParameterError("drift_recording: frame_count must be >= 1");
  std::vector<Texture> textures = gallery_paintings();
  const int scenes = static_cast<int>(textures.size());
  Rng rng(opts.seed);
  std::vector<FramePlan> plan;
  std::vector<GazeSample> gaze(static_cast<std::size_t>(opts.frame_count));
  SyntheticRecording out;
  const int segment = std::max(1, static_cast<int>(std::lround(opts.fps * 4)));  // one scene every 4 s
  for (int i = 0; i < opts.frame_count; ++i) {
    const int scene = (i / segment) % scenes;
    plan.push_back({scene, i, 0});
    out.frame_scene.push_back(scene);
    const double t = i / opts.fps;
    GazeSample& s = gaze[static_cast<std::size_t>(i)];
    s.valid = true;
    s.x_norm = std::clamp(0.5 + 0.35 * std::sin(0.7 * t) + rng.uniform(-opts.jitter, opts.jitter), 0.0, 1.0);
    s.y_norm = std::clamp(0.5 + 0.3 * std::sin(1.1 * t + 0.4) + rng.uniform(-opts.jitter, opts.jitter), 0.0, 1.0);
  }
  for (const auto& [s, e] : invalid_runs) {
    if (s < 0 || e < s || e >= opts.frame_count) throw ParameterError("drift_recording: invalid run out of range");
    for (int i = s; i <= e; ++i) gaze[static_cast<std::size_t>(i)].valid = false;
    out.planted_spans.emplace_back(s, e);
  }
  out.recording = assemble(std::move(id), opts, std::move(textures), std::move(plan), std::move(gaze));
  return out;
}

}  // namespace gazespiral::synth
