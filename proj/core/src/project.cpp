#include "gazespiral/project.hpp"

#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <set>

namespace gazespiral {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  const std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, value] : obj.items())
    if (!names.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ProjectConfig project_config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  ProjectConfig c;
  c.base_dir = base_dir;
  try {
    const json j = json::parse(text);
    reject_unknown(j,
                   {"recordings", "output_dir", "annotations_dir", "labels", "spiral", "slitscan", "fixation",
                    "compare", "embedding", "query", "server"},
                   "project config");
    for (const auto& r : j.at("recordings")) c.recordings.push_back(resolve(base_dir, r.get<std::string>()));
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
    if (j.contains("annotations_dir")) c.annotations_dir = resolve(base_dir, j.at("annotations_dir").get<std::string>());
    if (j.contains("labels")) c.labels = resolve(base_dir, j.at("labels").get<std::string>());

    if (j.contains("spiral")) {
      const auto& s = j.at("spiral");
      reject_unknown(s, {"a", "k", "H_px", "t_step", "clockwise", "flip_upper_half"}, "spiral");
      read(s, "a", c.spiral.a);
      read(s, "k", c.spiral.k);
      read(s, "H_px", c.spiral.H_px);
      if (s.contains("t_step") && !s.at("t_step").is_null()) c.spiral.t_step = s.at("t_step").get<double>();
      read(s, "clockwise", c.spiral.clockwise);
      read(s, "flip_upper_half", c.spiral.flip_upper_half);
    }
    if (j.contains("slitscan")) {
      const auto& s = j.at("slitscan");
      reject_unknown(s, {"mode", "height", "stride", "local_half_height", "linear_max_width"}, "slitscan");
      int half = 50;
      read(s, "local_half_height", half);
      if (s.contains("mode")) c.slitscan.mode = slitscan_mode_from_string(s.at("mode").get<std::string>(), half);
      read(s, "height", c.slitscan.height);
      read(s, "stride", c.slitscan.stride);
      if (s.contains("linear_max_width") && !s.at("linear_max_width").is_null())
        c.slitscan.linear_max_width = s.at("linear_max_width").get<int>();
    }
    if (j.contains("fixation")) {
      const auto& f = j.at("fixation");
      reject_unknown(f, {"dispersion_threshold", "min_duration_ms", "patch_px"}, "fixation");
      read(f, "dispersion_threshold", c.fixation.dispersion_threshold);
      read(f, "min_duration_ms", c.fixation.min_duration_ms);
      read(f, "patch_px", c.patch_px);
    }
    if (j.contains("compare")) {
      const auto& m = j.at("compare");
      reject_unknown(m, {"methods", "feature_gap", "symbol_gap", "clusters", "glyph_px", "canvas_px"}, "compare");
      if (m.contains("methods")) {
        c.compare.methods.clear();
        for (const auto& name : m.at("methods"))
          c.compare.methods.push_back(alignment_method_from_string(name.get<std::string>()));
      }
      read(m, "feature_gap", c.compare.alignment.feature_gap);
      read(m, "symbol_gap", c.compare.alignment.symbol_gap);
      read(m, "clusters", c.compare.clusters);
      read(m, "glyph_px", c.compare.glyph_px);
      read(m, "canvas_px", c.compare.canvas_px);
    }
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      reject_unknown(e, {"seed", "max_iter", "eps", "n_init"}, "embedding");
      read(e, "seed", c.embedding.seed);
      read(e, "max_iter", c.embedding.max_iter);
      read(e, "eps", c.embedding.eps);
      read(e, "n_init", c.embedding.n_init);
    }
    if (j.contains("query")) {
      const auto& q = j.at("query");
      reject_unknown(q, {"threshold", "max_results"}, "query");
      read(q, "threshold", c.query.threshold);
      read(q, "max_results", c.query.max_results);
    }
    if (j.contains("server")) {
      const auto& s = j.at("server");
      reject_unknown(s, {"host", "port"}, "server");
      read(s, "host", c.bind_host);
      read(s, "port", c.port);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("project config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ParseError(std::string("project config: ") + e.what());
  }
  c.spiral.stride = c.slitscan.stride;
  return c;
}

ProjectConfig load_project_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open project config " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return project_config_from_json(text, std::filesystem::absolute(path).parent_path());
}

std::string project_config_to_json(const ProjectConfig& c) {
  nlohmann::ordered_json j;
  auto& recs = j["recordings"] = nlohmann::ordered_json::array();
  for (const auto& r : c.recordings) recs.push_back(r.string());
  j["output_dir"] = c.output_dir.string();
  if (!c.annotations_dir.empty()) j["annotations_dir"] = c.annotations_dir.string();
  if (!c.labels.empty()) j["labels"] = c.labels.string();
  j["spiral"] = {{"a", c.spiral.a},
                 {"k", c.spiral.k},
                 {"H_px", c.spiral.H_px},
                 {"t_step", c.spiral.t_step ? nlohmann::ordered_json(*c.spiral.t_step) : nlohmann::ordered_json()},
                 {"clockwise", c.spiral.clockwise},
                 {"flip_upper_half", c.spiral.flip_upper_half}};
  int half = 50;
  if (const auto* local = std::get_if<GazeLocal>(&c.slitscan.mode)) half = local->half_height_px;
  std::string mode = to_string(c.slitscan.mode);
  if (const auto colon = mode.find(':'); colon != std::string::npos) mode.resize(colon);
  j["slitscan"] = {{"mode", mode},
                   {"height", c.slitscan.height},
                   {"stride", c.slitscan.stride},
                   {"local_half_height", half},
                   {"linear_max_width", c.slitscan.linear_max_width ? nlohmann::ordered_json(*c.slitscan.linear_max_width)
                                                                    : nlohmann::ordered_json()}};
  j["fixation"] = {{"dispersion_threshold", c.fixation.dispersion_threshold},
                   {"min_duration_ms", c.fixation.min_duration_ms},
                   {"patch_px", c.patch_px}};
  auto methods = nlohmann::ordered_json::array();
  for (auto m : c.compare.methods) methods.push_back(to_string(m));
  j["compare"] = {{"methods", methods},
                  {"feature_gap", c.compare.alignment.feature_gap},
                  {"symbol_gap", c.compare.alignment.symbol_gap},
                  {"clusters", c.compare.clusters},
                  {"glyph_px", c.compare.glyph_px},
                  {"canvas_px", c.compare.canvas_px}};
  j["embedding"] = {{"seed", c.embedding.seed}, {"max_iter", c.embedding.max_iter}, {"eps", c.embedding.eps},
                     {"n_init", c.embedding.n_init}};
  j["query"] = {{"threshold", c.query.threshold}, {"max_results", c.query.max_results}};
  j["server"] = {{"host", c.bind_host}, {"port", c.port}};
  return j.dump(2);
}

std::pair<std::size_t, std::size_t> scanline_span(std::span<const Fixation> fixations, int start_fixation,
                                                  int end_fixation, int stride, std::size_t n_scanlines) {
  if (start_fixation < 0 || end_fixation < start_fixation || end_fixation >= static_cast<int>(fixations.size()))
    throw ParameterError("fixation span out of range");
  if (stride < 1 || n_scanlines == 0) throw ParameterError("scanline_span: bad stride or empty sequence");
  const int first_frame = fixations[static_cast<std::size_t>(start_fixation)].start_frame;
  const int last_frame = fixations[static_cast<std::size_t>(end_fixation)].end_frame;
  std::size_t first = static_cast<std::size_t>((first_frame + stride - 1) / stride);
  std::size_t last = static_cast<std::size_t>(last_frame / stride);
  if (first > last) first = last;  // span shorter than the stride: keep the scanline just before it
  last = std::min(last, n_scanlines - 1);
  first = std::min(first, last);
  return {first, last};
}

OverlaySpec make_overlay(std::span<const Fixation> fixations, std::span<const Annotation> annotations,
                         const LabelScheme& scheme, std::span<const QuerySpan> highlights, int stride,
                         std::size_t n_scanlines) {
  OverlaySpec overlay;
  const auto symbols = to_symbol_sequence({}, fixations.size(), annotations, scheme);
  for (std::size_t i = 0; i < fixations.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (fixations[i].start_frame / stride >= static_cast<int>(n_scanlines)) break;
    const auto [first, last] = scanline_span(fixations, idx, idx, stride, n_scanlines);
    overlay.fixation_colors.push_back({first, last, scheme.color_of_symbol(symbols.items[i])});
  }
  for (const Annotation& a : annotations) {
    if (a.end_fixation >= static_cast<int>(fixations.size())) continue;
    const auto [first, last] = scanline_span(fixations, a.start_fixation, a.end_fixation, stride, n_scanlines);
    overlay.annotations.push_back({first, last, a.label, a.color});
  }
  for (const QuerySpan& h : highlights) {
    const auto [first, last] = scanline_span(fixations, h.start_fixation, h.end_fixation, stride, n_scanlines);
    overlay.highlights.push_back({first, last, colors::kYellow});
  }
  return overlay;
}

}  // namespace gazespiral
