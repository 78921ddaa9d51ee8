#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gazespiral/analysis.hpp"
#include "gazespiral/annotate.hpp"
#include "gazespiral/fixation.hpp"
#include "gazespiral/metrics.hpp"
#include "gazespiral/query.hpp"
#include "gazespiral/slitscan.hpp"
#include "gazespiral/spiral.hpp"

namespace gazespiral {

struct SlitscanConfig {
  SlitscanMode mode = GazeGlobal{};
  int height = kDefaultScanlineHeight;
  int stride = 1;
  std::optional<int> linear_max_width;
};

struct CompareConfig {
  std::vector<AlignmentMethod> methods{AlignmentMethod::Levenshtein, AlignmentMethod::SmithWaterman,
                                       AlignmentMethod::Dtw};
  AlignmentOptions alignment;
  int clusters = 2;
  int glyph_px = 128;
  int canvas_px = 0;  // 0: derived from the glyph count
};

/// Everything a batch run needs. Paths are absolute after loading.
struct ProjectConfig {
  std::filesystem::path base_dir;
  std::vector<std::filesystem::path> recordings;  // manifest files
  std::filesystem::path output_dir = "out";
  std::filesystem::path annotations_dir;  // optional, `<id>.json` per recording
  std::filesystem::path labels;           // optional label scheme file
  SpiralParams spiral = [] {
    SpiralParams p;
    p.a = kFixationRingArmDistance;
    return p;
  }();
  SlitscanConfig slitscan;
  FixationParams fixation;
  int patch_px = kDefaultPatchPx;
  CompareConfig compare;
  SmacofOptions embedding;
  QueryOptions query;
  std::string bind_host = "127.0.0.1";
  int port = 8080;
};

/// Reads a JSON project file; relative paths resolve against its directory.
/// Unknown keys are rejected. Throws ParseError.
ProjectConfig load_project_config(const std::filesystem::path& path);
ProjectConfig project_config_from_json(const std::string& text, const std::filesystem::path& base_dir);
std::string project_config_to_json(const ProjectConfig& config);

/// Scanline indices [first, last] showing the frames of fixations
/// start..end when every `stride`-th frame is sampled. Clamped to n_scanlines.
std::pair<std::size_t, std::size_t> scanline_span(std::span<const Fixation> fixations, int start_fixation,
                                                  int end_fixation, int stride, std::size_t n_scanlines);

/// Spiral overlay for one recording: every fixation coloured by its label in
/// the gap ring, annotations as labelled spans, `highlights` as yellow borders.
OverlaySpec make_overlay(std::span<const Fixation> fixations, std::span<const Annotation> annotations,
                         const LabelScheme& scheme, std::span<const QuerySpan> highlights, int stride,
                         std::size_t n_scanlines);

}  // namespace gazespiral
