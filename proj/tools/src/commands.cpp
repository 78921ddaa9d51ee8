#include "gazespiral/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gazespiral/analysis.hpp"
#include "gazespiral/annotate.hpp"
#include "gazespiral/parallel.hpp"
#include "gazespiral/query.hpp"
#include "gazespiral/server.hpp"
#include "gazespiral/synthetic.hpp"

namespace gazespiral::cli {

namespace fs = std::filesystem;

std::vector<Recording> load_inputs(const Inputs& inputs) {
  const auto& manifests = inputs.config.recordings;
  std::vector<Recording> recs(manifests.size() + inputs.raw.size());
  parallel_for(recs.size(), [&](std::size_t i) {
    if (i < manifests.size()) {
      recs[i] = load_recording(manifests[i]);
      return;
    }
    const RawInput& r = inputs.raw[i - manifests.size()];
    GazeCsvOptions opts;
    if (r.gaze_in_pixels) opts.space = GazeSpace::Pixels;
    recs[i] = load_raw_recording(r.id, r.stream, r.gaze_csv, r.width, r.height, r.fps, opts);
  });
  std::map<std::string, int> seen;
  for (const auto& r : recs)
    if (seen[r.id]++) throw IngestError("duplicate recording id " + r.id);
  return recs;
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IngestError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs `body` and maps library exceptions to exit codes.
template <typename Fn>
int guarded(std::ostream& log, Fn&& body) {
  try {
    return body();
  } catch (const IngestError& e) {
    log << "error: " << e.what() << "\n";
    return kIngestFailure;
  } catch (const ParseError& e) {
    log << "error: " << e.what() << "\n";
    return kIngestFailure;
  } catch (const ParameterError& e) {
    log << "error: " << e.what() << "\n";
    return kInvalidArguments;
  } catch (const DataError& e) {
    log << "error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kFailure;
  }
}

struct Annotated {
  bool available = false;
  LabelScheme scheme;
  std::vector<std::vector<Annotation>> per_recording;
};

// Annotations are used only when a label scheme and a file for every recording exist.
Annotated load_annotations(const ProjectConfig& c, const std::vector<Recording>& recs,
                           const std::vector<std::vector<Fixation>>& fixations) {
  Annotated out;
  if (c.labels.empty() || c.annotations_dir.empty() || !fs::exists(c.labels)) return out;
  out.scheme = label_scheme_from_json(slurp(c.labels));
  AnnotationStore store;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto file = c.annotations_dir / (recs[i].id + ".json");
    if (!fs::exists(file)) return Annotated{};
    store.register_recording(recs[i].id, static_cast<int>(fixations[i].size()));
    store.load(file);
    out.per_recording.push_back(store.list(recs[i].id));
  }
  out.available = true;
  return out;
}

std::vector<std::vector<Fixation>> detect_all(const ProjectConfig& c, const std::vector<Recording>& recs) {
  const HistogramFeatureExtractor extractor(c.patch_px);
  std::vector<std::vector<Fixation>> out(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) out[i] = detect_fixations(recs[i], c.fixation, extractor);
  return out;
}

void warn_stride(const ProjectConfig& c, const std::vector<Recording>& recs, std::ostream& log) {
  for (const auto& r : recs)
    if (stride_exceeds_recommendation(c.slitscan.stride, r.frames.fps()))
      log << "warning: stride " << c.slitscan.stride << " keeps fewer than a quarter of the samples of a 25 fps stream ("
          << r.id << " at " << r.frames.fps() << " fps); fine details may be lost\n";
}

std::string matrix_csv(const DistanceMatrix& m, const std::vector<std::string>& ids) {
  std::ostringstream out;
  out << std::setprecision(17) << "id";
  for (const auto& id : ids) out << "," << id;
  out << "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << "," << m(i, j);
    out << "\n";
  }
  return out.str();
}

}  // namespace

int cmd_quality(const Inputs& in, std::ostream& log) {
  return guarded(log, [&] {
    const auto recs = load_inputs(in);
    const fs::path dir = in.config.output_dir;
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "recording_id,total_samples,invalid_samples,loss_fraction,longest_invalid_run_frames,invalid_runs\n";
    for (const auto& r : recs) {
      const DataQualityReport q = data_quality(r);
      write_file_atomic(dir / (r.id + "_quality.json"), data_quality_to_json(q) + "\n");
      csv << r.id << "," << q.total_samples << "," << q.invalid_samples << "," << std::setprecision(17)
          << q.loss_fraction << "," << q.longest_invalid_run_frames << "," << q.invalid_runs.size() << "\n";
      log << r.id << ": " << q.invalid_samples << "/" << q.total_samples << " invalid samples ("
          << std::setprecision(4) << 100.0 * q.loss_fraction << "%), longest gap " << q.longest_invalid_run_frames
          << " frames\n";
    }
    write_file_atomic(dir / "quality_summary.csv", csv.str());
    return static_cast<int>(kOk);
  });
}

int cmd_render(const Inputs& in, std::ostream& log) {
  return guarded(log, [&] {
    const ProjectConfig& c = in.config;
    const auto recs = load_inputs(in);
    warn_stride(c, recs, log);
    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    const auto fixations = detect_all(c, recs);
    const Annotated ann = load_annotations(c, recs, fixations);
    SpiralParams params = c.spiral;
    params.stride = c.slitscan.stride;
    params.validate();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = recs[i];
      const SlitscanSequence seq = extract_sequence(r, c.slitscan.mode, c.slitscan.height, c.slitscan.stride);
      const std::vector<Annotation> none;
      const OverlaySpec overlay = make_overlay(fixations[i], ann.available ? ann.per_recording[i] : none,
                                               ann.scheme, {}, c.slitscan.stride, seq.size());
      write_png(dir / (r.id + "_spiral.png"), render_spiral(seq, params, overlay));
      write_png(dir / (r.id + "_linear.png"), render_linear(seq, c.slitscan.linear_max_width));
      write_file_atomic(dir / (r.id + "_geometry.json"), geometry_to_json(build_geometry(seq.size(), params), params));
      log << r.id << ": " << seq.size() << " scanlines, " << fixations[i].size() << " fixations\n";
    }
    return static_cast<int>(kOk);
  });
}

int cmd_compare(const Inputs& in, std::ostream& log) {
  return guarded(log, [&]() -> int {
    const ProjectConfig& c = in.config;
    if (c.recordings.size() + in.raw.size() < 2) {
      log << "error: compare needs at least two recordings\n";
      return kInsufficientInputs;
    }
    if (c.compare.methods.empty()) throw ParameterError("no alignment methods configured");
    const auto recs = load_inputs(in);
    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    const auto fixations = detect_all(c, recs);
    std::vector<std::string> ids;
    std::vector<ScanpathSequence> features;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      ids.push_back(recs[i].id);
      features.emplace_back(feature_sequence(recs[i].id, fixations[i]));
    }
    const Annotated ann = load_annotations(c, recs, fixations);
    std::vector<ScanpathSequence> symbols;
    if (ann.available)
      for (std::size_t i = 0; i < recs.size(); ++i)
        symbols.emplace_back(to_symbol_sequence(ids[i], fixations[i].size(), ann.per_recording[i], ann.scheme));

    std::vector<std::pair<std::string, DistanceMatrix>> matrices;
    for (AlignmentMethod m : c.compare.methods) {
      const std::string name = std::string("feature_") + to_string(m);
      matrices.emplace_back(name, pairwise_matrix(features, m, c.compare.alignment));
      if (ann.available)
        matrices.emplace_back(std::string("aoi_") + to_string(m), pairwise_matrix(symbols, m, c.compare.alignment));
    }
    for (const auto& [name, m] : matrices) {
      write_file_atomic(dir / ("matrix_" + name + ".json"), distance_matrix_to_json(m, name, c.compare.alignment) + "\n");
      write_file_atomic(dir / ("matrix_" + name + ".csv"), matrix_csv(m, ids));
    }

    std::ostringstream corr;
    corr << "matrix_a,matrix_b,pearson\n" << std::setprecision(17);
    for (std::size_t a = 0; a < matrices.size(); ++a)
      for (std::size_t b = a + 1; b < matrices.size(); ++b) {
        corr << matrices[a].first << "," << matrices[b].first << ",";
        try {
          corr << pearson(matrices[a].second, matrices[b].second) << "\n";
        } catch (const std::exception&) {
          corr << "nan\n";  // fewer than three recordings or a constant matrix
        }
      }
    write_file_atomic(dir / "correlations.csv", corr.str());

    const DistanceMatrix& primary = matrices.front().second;
    const Dendrogram dendrogram = hca_average_linkage(primary);
    write_file_atomic(dir / "dendrogram.json", dendrogram_to_json(dendrogram, ids) + "\n");
    write_png(dir / "dendrogram.png", render_dendrogram(dendrogram));
    const int k = std::clamp(c.compare.clusters, 1, static_cast<int>(ids.size()));
    nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
    for (const auto& group : cut_dendrogram_k(dendrogram, k)) {
      nlohmann::ordered_json names = nlohmann::ordered_json::array();
      for (int leaf : group) names.push_back(ids[static_cast<std::size_t>(leaf)]);
      clusters.push_back(names);
    }
    write_file_atomic(dir / "clusters.json", clusters.dump() + "\n");

    const Embedding2D emb = SmacofEmbedder(c.embedding).embed(primary);
    write_file_atomic(dir / "embedding.json", embedding_to_json(emb, ids) + "\n");

    SpiralParams params = c.spiral;
    params.stride = c.slitscan.stride;
    std::vector<Image> glyphs(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) {
      glyphs[i] = render_glyph(extract_sequence(recs[i], c.slitscan.mode, c.slitscan.height, c.slitscan.stride),
                               params, c.compare.glyph_px);
    });
    LayoutOptions layout_opts;
    const int canvas = c.compare.canvas_px > 0
                           ? c.compare.canvas_px
                           : 2 * min_canvas_px(recs.size(), c.compare.glyph_px, layout_opts.margin_px);
    const GlyphLayout layout = layout_glyphs(emb, c.compare.glyph_px, canvas, layout_opts);
    write_png(dir / "glyphs.png", render_glyph_layout(layout, glyphs));

    log << "compared " << ids.size() << " recordings with " << matrices.size() << " matrices; stress "
        << emb.stress << " after " << emb.iterations_run << " iterations\n";
    return kOk;
  });
}

int cmd_query(const Inputs& in, const QueryArgs& q, std::ostream& log) {
  return guarded(log, [&]() -> int {
    const ProjectConfig& c = in.config;
    const auto recs = load_inputs(in);
    const auto fixations = detect_all(c, recs);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < recs.size(); ++i) index[recs[i].id] = i;
    const auto src = index.find(q.recording_id);
    if (src == index.end()) {
      log << "error: unknown query recording '" << q.recording_id << "'\n";
      return kInvalidArguments;
    }
    const auto& src_fix = fixations[src->second];
    if (q.start_fixation < 0 || q.end_fixation < q.start_fixation ||
        q.end_fixation >= static_cast<int>(src_fix.size())) {
      log << "error: span [" << q.start_fixation << ", " << q.end_fixation << "] is outside the "
          << src_fix.size() << " fixations of " << q.recording_id << "\n";
      return kInvalidArguments;
    }
    std::vector<std::size_t> targets;
    if (q.targets.empty()) {
      for (std::size_t i = 0; i < recs.size(); ++i) targets.push_back(i);
    } else {
      for (const auto& id : q.targets) {
        const auto it = index.find(id);
        if (it == index.end()) {
          log << "error: unknown target recording '" << id << "'\n";
          return kInvalidArguments;
        }
        targets.push_back(it->second);
      }
    }
    std::vector<FeatureSequence> target_features;
    for (std::size_t t : targets) target_features.push_back(feature_sequence(recs[t].id, fixations[t]));
    const FeatureSequence source = feature_sequence(q.recording_id, src_fix);
    const std::vector<FeatureVector> query(source.items.begin() + q.start_fixation,
                                           source.items.begin() + q.end_fixation + 1);
    const auto results = find_similar_spans(query, target_features, c.query);

    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    write_file_atomic(dir / "query.json", query_results_to_json(results) + "\n");
    SpiralParams params = c.spiral;
    params.stride = c.slitscan.stride;
    for (std::size_t t : targets) {
      std::vector<QuerySpan> spans;
      for (const auto& r : results)
        if (r.recording_id == recs[t].id) spans.push_back(r.span);
      const SlitscanSequence seq = extract_sequence(recs[t], c.slitscan.mode, c.slitscan.height, c.slitscan.stride);
      const OverlaySpec overlay = make_overlay(fixations[t], {}, LabelScheme{}, spans, c.slitscan.stride, seq.size());
      write_png(dir / (recs[t].id + "_query.png"), render_spiral(seq, params, overlay));
    }
    log << results.size() << " matching spans\n";
    return kOk;
  });
}

int cmd_serve(const Inputs& in, std::ostream& log) {
  return guarded(log, [&] {
    auto recs = load_inputs(in);
    Session session(in.config, std::move(recs));
    HttpServer server(session);
    const int port = server.bind(in.config.bind_host, in.config.port);
    log << "serving " << session.recording_ids().size() << " recordings on http://" << in.config.bind_host << ":"
        << port << "\n"
        << std::flush;
    server.listen();
    return static_cast<int>(kOk);
  });
}

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  return guarded(log, [&]() -> int {
    if (args.out_dir.empty()) throw ParameterError("synth needs an output directory");
    fs::create_directories(args.out_dir);
    synth::SceneOptions opts;
    opts.frame_count = args.frames;
    opts.seed = args.seed;
    std::vector<synth::SyntheticRecording> recs;
    if (args.kind == "gallery") {
      recs = synth::gallery_study(args.per_group, args.seed, opts);
    } else if (args.kind == "event") {
      recs.push_back(synth::event_recording("event", opts));
    } else if (args.kind == "drift") {
      const int n = args.frames;
      recs.push_back(synth::drift_recording("drift", opts, {{n / 5, n / 5 + n / 20}, {n / 2, n / 2 + n / 10}}));
    } else {
      throw ParameterError("unknown synthetic kind '" + args.kind + "' (gallery, event, drift)");
    }
    nlohmann::ordered_json project;
    project["recordings"] = nlohmann::ordered_json::array();
    for (const auto& s : recs) {
      const Recording& r = s.recording;
      write_raw_stream(args.out_dir / (r.id + ".rgb"), r.frames);
      write_gaze_csv(args.out_dir / (r.id + "_gaze.csv"), r.gaze);
      ManifestInfo info;
      info.id = r.id;
      info.kind = FrameSourceKind::RawStream;
      info.frames_path = r.id + ".rgb";
      info.width = r.frames.width();
      info.height = r.frames.height();
      info.fps = r.frames.fps();
      info.frame_count = r.frames.frame_count();
      info.gaze_csv = r.id + "_gaze.csv";
      write_manifest(args.out_dir / (r.id + ".json"), info);
      project["recordings"].push_back(r.id + ".json");
    }
    project["output_dir"] = "out";
    write_file_atomic(args.out_dir / "project.json", project.dump(2) + "\n");
    log << "wrote " << recs.size() << " synthetic recordings to " << args.out_dir.string() << "\n";
    return kOk;
  });
}

}  // namespace gazespiral::cli
