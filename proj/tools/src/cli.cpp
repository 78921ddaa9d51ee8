#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

#include "gazespiral/commands.hpp"

namespace gazespiral::cli {

namespace {

// Flag values that override the project file when given.
struct Overrides {
  std::vector<std::string> recordings;
  std::optional<std::string> output_dir, annotations_dir, labels, mode, methods, host;
  std::optional<double> a, k, t_step, dispersion, min_duration, threshold, eps;
  std::optional<int> h_px, stride, height, local_half, linear_max_width, patch_px, max_iter, max_results, port,
      clusters, glyph_px;
  std::optional<std::uint64_t> seed;
  bool counter_clockwise = false;

  void add_to(CLI::App& app) {
    app.add_option("--recording", recordings, "Recording manifest (repeatable)");
    app.add_option("--output-dir", output_dir, "Output directory");
    app.add_option("--annotations-dir", annotations_dir, "Directory of <id>.json annotation files");
    app.add_option("--labels", labels, "Label scheme JSON");
    app.add_option("--a", a, "Arm distance in scanline heights");
    app.add_option("--k", k, "Angle exponent");
    app.add_option("--h-px", h_px, "Pixels per scanline height in the spiral");
    app.add_option("--t-step", t_step, "Spiral time step per scanline");
    app.add_flag("--counter-clockwise", counter_clockwise, "Run time counter-clockwise");
    app.add_option("--mode", mode, "static-center | gaze-global | gaze-local[:h]");
    app.add_option("--height", height, "Scanline height in pixels");
    app.add_option("--local-half-height", local_half, "Half height of the gaze-local window");
    app.add_option("--stride", stride, "Frame stride");
    app.add_option("--linear-max-width", linear_max_width, "Box-filter the linear slitscan to this width");
    app.add_option("--dispersion", dispersion, "Fixation dispersion threshold");
    app.add_option("--min-duration", min_duration, "Minimum fixation duration in ms");
    app.add_option("--patch-px", patch_px, "Feature patch size");
    app.add_option("--methods", methods, "Comma separated alignment methods");
    app.add_option("--clusters", clusters, "Clusters to cut the dendrogram into");
    app.add_option("--glyph-px", glyph_px, "Glyph size in the embedding figure");
    app.add_option("--seed", seed, "Embedding seed");
    app.add_option("--max-iter", max_iter, "SMACOF iteration cap");
    app.add_option("--eps", eps, "SMACOF relative improvement threshold");
    app.add_option("--threshold", threshold, "Query similarity threshold");
    app.add_option("--max-results", max_results, "Query results per recording");
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Bind port");
  }

  void apply(ProjectConfig& c) const {
    for (const auto& r : recordings) c.recordings.push_back(std::filesystem::absolute(r));
    if (output_dir) c.output_dir = std::filesystem::absolute(*output_dir);
    if (annotations_dir) c.annotations_dir = std::filesystem::absolute(*annotations_dir);
    if (labels) c.labels = std::filesystem::absolute(*labels);
    if (a) c.spiral.a = *a;
    if (k) c.spiral.k = *k;
    if (h_px) c.spiral.H_px = *h_px;
    if (t_step) c.spiral.t_step = *t_step;
    if (counter_clockwise) c.spiral.clockwise = false;
    if (mode) {
      c.slitscan.mode = slitscan_mode_from_string(*mode, local_half.value_or(50));
    } else if (local_half && std::holds_alternative<GazeLocal>(c.slitscan.mode)) {
      c.slitscan.mode = GazeLocal{*local_half};
    }
    if (height) c.slitscan.height = *height;
    if (stride) c.slitscan.stride = *stride;
    if (linear_max_width) c.slitscan.linear_max_width = *linear_max_width;
    if (dispersion) c.fixation.dispersion_threshold = *dispersion;
    if (min_duration) c.fixation.min_duration_ms = *min_duration;
    if (patch_px) c.patch_px = *patch_px;
    if (methods) {
      c.compare.methods.clear();
      std::stringstream in(*methods);
      std::string name;
      while (std::getline(in, name, ','))
        if (!name.empty()) c.compare.methods.push_back(alignment_method_from_string(name));
    }
    if (clusters) c.compare.clusters = *clusters;
    if (glyph_px) c.compare.glyph_px = *glyph_px;
    if (seed) c.embedding.seed = *seed;
    if (max_iter) c.embedding.max_iter = *max_iter;
    if (eps) c.embedding.eps = *eps;
    if (threshold) c.query.threshold = *threshold;
    if (max_results) c.query.max_results = *max_results;
    if (host) c.bind_host = *host;
    if (port) c.port = *port;
    c.spiral.stride = c.slitscan.stride;
  }
};

struct RawFlags {
  std::string stream, gaze, id = "raw";
  int width = 0, height = 0;
  double fps = 0.0;
  bool pixels = false;

  void add_to(CLI::App& app) {
    app.add_option("--raw", stream, "Headerless RGB24 frame stream");
    app.add_option("--gaze", gaze, "Gaze CSV for --raw");
    app.add_option("--id", id, "Recording id for --raw");
    app.add_option("--width", width, "Frame width of --raw");
    app.add_option("--frame-height", height, "Frame height of --raw");
    app.add_option("--fps", fps, "Frame rate of --raw");
    app.add_flag("--gaze-space-pixels", pixels, "Gaze CSV is in pixel coordinates");
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaze spiral slitscans and scanpath comparison"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gazespiral ") + version_string());

  std::string config_path;
  Overrides overrides;
  RawFlags raw;
  QueryArgs query;
  std::string span_text;
  SynthArgs synth;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Project configuration JSON");
    overrides.add_to(*sub);
    raw.add_to(*sub);
  };
  CLI::App* quality = app.add_subcommand("quality", "Per-recording data quality reports");
  CLI::App* render = app.add_subcommand("render", "Spiral and linear slitscans per recording");
  CLI::App* compare = app.add_subcommand("compare", "Distance matrices, clustering, embedding, glyph figure");
  CLI::App* query_cmd = app.add_subcommand("query", "Find spans similar to a fixation span");
  CLI::App* serve = app.add_subcommand("serve", "HTTP service for the annotation UI");
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write synthetic recordings");
  for (CLI::App* sub : {quality, render, compare, query_cmd, serve}) add_common(sub);
  query_cmd->add_option("--query-recording", query.recording_id, "Recording holding the query span")->required();
  query_cmd->add_option("--span", span_text, "Fixation span START:END (inclusive)")->required();
  query_cmd->add_option("--target", query.targets, "Target recording id (repeatable; default all)");
  synth_cmd->add_option("--kind", synth.kind, "gallery | event | drift");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--frames", synth.frames, "Frames per recording");
  synth_cmd->add_option("--per-group", synth.per_group, "Gallery visitors per group");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kInvalidArguments);
  }

  if (synth_cmd->parsed()) return cmd_synth(synth, err);

  Inputs inputs;
  try {
    if (!config_path.empty()) inputs.config = load_project_config(config_path);
    else inputs.config.output_dir = std::filesystem::absolute("out");
    overrides.apply(inputs.config);
    inputs.config.spiral.validate();
    if (inputs.config.slitscan.stride < 1) throw ParameterError("stride must be >= 1");
    if (inputs.config.slitscan.height < 1) throw ParameterError("height must be >= 1");
  } catch (const IngestError& e) {
    err << "error: " << e.what() << "\n";
    return kIngestFailure;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kIngestFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidArguments;
  }
  if (!raw.stream.empty()) {
    if (raw.gaze.empty() || raw.width <= 0 || raw.height <= 0 || raw.fps <= 0) {
      err << "error: --raw needs --gaze, --width, --frame-height and --fps\n";
      return kInvalidArguments;
    }
    inputs.raw.push_back({raw.id, raw.stream, raw.gaze, raw.width, raw.height, raw.fps, raw.pixels});
  }

  if (quality->parsed()) return cmd_quality(inputs, err);
  if (render->parsed()) return cmd_render(inputs, err);
  if (compare->parsed()) return cmd_compare(inputs, err);
  if (serve->parsed()) return cmd_serve(inputs, err);
  if (query_cmd->parsed()) {
    const auto colon = span_text.find(':');
    try {
      if (colon == std::string::npos) {
        query.start_fixation = query.end_fixation = std::stoi(span_text);
      } else {
        query.start_fixation = std::stoi(span_text.substr(0, colon));
        query.end_fixation = std::stoi(span_text.substr(colon + 1));
      }
    } catch (const std::exception&) {
      err << "error: --span must be START:END\n";
      return kInvalidArguments;
    }
    return cmd_query(inputs, query, err);
  }
  return kInvalidArguments;
}

}  // namespace gazespiral::cli
