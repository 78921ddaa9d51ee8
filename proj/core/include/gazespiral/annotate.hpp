#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazespiral/fixation.hpp"
#include "gazespiral/image.hpp"
#include "gazespiral/metrics.hpp"

namespace gazespiral {

/// Recording or annotation id not known to the store.
class NotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Write rejected because it duplicates an existing annotation or was based
/// on an outdated revision.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Annotation {
  std::int64_t id = 0;  // assigned by the store
  std::string recording_id;
  int start_fixation = 0;
  int end_fixation = 0;  // inclusive
  std::string label;
  Rgb color;
  std::string author;
  std::string created_at;  // ISO-8601 UTC, e.g. 2024-05-01T12:00:00.000Z

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct LabelEntry {
  std::string label;
  Rgb color;

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Symbol 0 is the background; labels[i] maps to symbol i + 1.
struct LabelScheme {
  std::vector<LabelEntry> labels;
  LabelEntry background{"background", Rgb{217, 217, 217}};

  /// Throws ParameterError on duplicate labels or colours.
  void validate() const;
  /// Symbol for `label`; throws NotFoundError when absent.
  int symbol_of(const std::string& label) const;
  Rgb color_of_symbol(int symbol) const;

  friend bool operator==(const LabelScheme&, const LabelScheme&) = default;
};

/// `{labels:[{label,color}], background:{label,color}}`.
std::string label_scheme_to_json(const LabelScheme& scheme);
LabelScheme label_scheme_from_json(const std::string& text);

/// Current time as ISO-8601 UTC with milliseconds.
std::string utc_timestamp_now();

/// In-memory annotation store with optional file persistence. Readers run
/// concurrently; writes to one recording are serialized.
class AnnotationStore {
 public:
  /// Declares a recording and its fixation count. Re-registering updates the count.
  void register_recording(const std::string& recording_id, int fixation_count);
  bool has_recording(const std::string& recording_id) const;
  std::vector<std::string> recordings() const;

  /// Appends the annotation and returns its id. An empty `created_at` is filled
  /// with the current time. When `base_revision` is given it must equal the
  /// recording's current revision.
  std::int64_t add(Annotation ann, std::optional<std::uint64_t> base_revision = std::nullopt);
  /// Returns false when no annotation has that id.
  bool remove(const std::string& recording_id, std::int64_t id);
  std::optional<Annotation> get(const std::string& recording_id, std::int64_t id) const;
  std::vector<Annotation> list(const std::string& recording_id) const;
  /// Incremented by every successful add/remove/load.
  std::uint64_t revision(const std::string& recording_id) const;

  /// `{version:1, recording_id, annotations:[...]}`.
  std::string to_json(const std::string& recording_id) const;
  /// Replaces the recording's annotations with the document's content.
  void load_json(const std::string& text);

  /// Write-then-rename persistence of one recording's annotation file.
  void save(const std::string& recording_id, const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  struct Slot {
    mutable std::shared_mutex mutex;
    int fixation_count = 0;
    std::vector<Annotation> annotations;
    std::int64_t next_id = 1;
    std::uint64_t revision = 0;
  };
  Slot& slot(const std::string& recording_id) const;

  mutable std::shared_mutex slots_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

/// One symbol per fixation; overlapping labels resolve to the most recently
/// created annotation (ties broken by the larger id).
SymbolSequence to_symbol_sequence(const std::string& recording_id, std::size_t fixation_count,
                                  std::span<const Annotation> annotations, const LabelScheme& scheme);

/// Symbol per frame: the symbol of the fixation covering the frame, background elsewhere.
std::vector<int> frame_symbols(std::span<const Fixation> fixations, int frame_count,
                               std::span<const Annotation> annotations, const LabelScheme& scheme);

/// Horizontal strip; column x shows frame floor(x * frame_count / width).
Image export_scarf(std::span<const Fixation> fixations, int frame_count, std::span<const Annotation> annotations,
                   const LabelScheme& scheme, int width_px, int height_px);

}  // namespace gazespiral
