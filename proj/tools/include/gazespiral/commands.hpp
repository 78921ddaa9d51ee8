#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gazespiral/ingest.hpp"
#include "gazespiral/project.hpp"

namespace gazespiral::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kIngestFailure = 2,
  kInsufficientInputs = 3,
  kInvalidArguments = 4,
};

/// Recording given on the command line as a raw RGB24 stream plus gaze CSV.
struct RawInput {
  std::string id;
  std::filesystem::path stream;
  std::filesystem::path gaze_csv;
  int width = 0;
  int height = 0;
  double fps = 0.0;
  bool gaze_in_pixels = false;
};

/// Inputs shared by all batch commands.
struct Inputs {
  ProjectConfig config;
  std::vector<RawInput> raw;
};

/// Loads manifests and raw inputs in order. Throws IngestError.
std::vector<Recording> load_inputs(const Inputs& inputs);

struct QueryArgs {
  std::string recording_id;
  int start_fixation = 0;
  int end_fixation = 0;
  std::vector<std::string> targets;  // empty: all recordings
};

int cmd_quality(const Inputs& in, std::ostream& log);
int cmd_render(const Inputs& in, std::ostream& log);
int cmd_compare(const Inputs& in, std::ostream& log);
int cmd_query(const Inputs& in, const QueryArgs& q, std::ostream& log);
int cmd_serve(const Inputs& in, std::ostream& log);

struct SynthArgs {
  std::string kind = "gallery";  // gallery | event | drift
  std::filesystem::path out_dir;
  std::uint64_t seed = 2024;
  int frames = 250;
  int per_group = 7;
};

/// Writes synthetic recordings (raw stream, gaze CSV, manifest) and a project.json.
int cmd_synth(const SynthArgs& args, std::ostream& log);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gazespiral::cli
