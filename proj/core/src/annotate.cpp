#include "gazespiral/annotate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <set>

namespace gazespiral {

void LabelScheme::validate() const {
  std::set<std::string> names{background.label};
  std::set<std::string> cols{to_hex_color(background.color)};
  for (const auto& e : labels) {
    if (e.label.empty()) throw ParameterError("empty label in scheme");
    if (!names.insert(e.label).second) throw ParameterError("duplicate label: " + e.label);
    if (!cols.insert(to_hex_color(e.color)).second) throw ParameterError("duplicate colour for label " + e.label);
  }
}

int LabelScheme::symbol_of(const std::string& label) const {
  if (label == background.label) return 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i].label == label) return static_cast<int>(i) + 1;
  throw NotFoundError("label not in scheme: " + label);
}

Rgb LabelScheme::color_of_symbol(int symbol) const {
  if (symbol == 0) return background.color;
  if (symbol < 0 || symbol > static_cast<int>(labels.size())) throw NotFoundError("symbol out of range");
  return labels[static_cast<std::size_t>(symbol - 1)].color;
}

std::string label_scheme_to_json(const LabelScheme& scheme) {
  nlohmann::ordered_json j;
  auto& arr = j["labels"] = nlohmann::ordered_json::array();
  for (const auto& e : scheme.labels) arr.push_back({{"label", e.label}, {"color", to_hex_color(e.color)}});
  j["background"] = {{"label", scheme.background.label}, {"color", to_hex_color(scheme.background.color)}};
  return j.dump(2);
}

LabelScheme label_scheme_from_json(const std::string& text) {
  LabelScheme s;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& e : j.at("labels"))
      s.labels.push_back({e.at("label").get<std::string>(), parse_hex_color(e.at("color").get<std::string>())});
    if (j.contains("background")) {
      const auto& b = j.at("background");
      s.background = {b.at("label").get<std::string>(), parse_hex_color(b.at("color").get<std::string>())};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("label scheme json: ") + e.what());
  }
  s.validate();
  return s;
}

std::string utc_timestamp_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t secs = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// --- store -------------------------------------------------------------------------

void AnnotationStore::register_recording(const std::string& recording_id, int fixation_count) {
  if (fixation_count < 0) throw ParameterError("fixation count must be >= 0");
  std::unique_lock lock(slots_mutex_);
  auto& s = slots_[recording_id];
  if (!s) s = std::make_unique<Slot>();
  std::unique_lock slot_lock(s->mutex);
  s->fixation_count = fixation_count;
}

bool AnnotationStore::has_recording(const std::string& recording_id) const {
  std::shared_lock lock(slots_mutex_);
  return slots_.count(recording_id) > 0;
}

std::vector<std::string> AnnotationStore::recordings() const {
  std::shared_lock lock(slots_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : slots_) out.push_back(id);
  return out;
}

AnnotationStore::Slot& AnnotationStore::slot(const std::string& recording_id) const {
  std::shared_lock lock(slots_mutex_);
  const auto it = slots_.find(recording_id);
  if (it == slots_.end()) throw NotFoundError("unknown recording: " + recording_id);
  return *it->second;  // slots are never erased, so the reference outlives the lock
}

namespace {

void check_span(const Annotation& a, int fixation_count) {
  if (a.start_fixation < 0 || a.end_fixation < a.start_fixation || a.end_fixation >= fixation_count)
    throw ParameterError("invalid annotation span [" + std::to_string(a.start_fixation) + ", " +
                         std::to_string(a.end_fixation) + "] for " + std::to_string(fixation_count) + " fixations");
  if (a.label.empty()) throw ParameterError("annotation label must not be empty");
}

}  // namespace

std::int64_t AnnotationStore::add(Annotation ann, std::optional<std::uint64_t> base_revision) {
  Slot& s = slot(ann.recording_id);
  std::unique_lock lock(s.mutex);
  check_span(ann, s.fixation_count);
  if (base_revision && *base_revision != s.revision)
    throw ConflictError("stale revision " + std::to_string(*base_revision) + ", current is " +
                        std::to_string(s.revision));
  for (const Annotation& existing : s.annotations)
    if (existing.start_fixation == ann.start_fixation && existing.end_fixation == ann.end_fixation &&
        existing.label == ann.label)
      throw ConflictError("annotation already exists with id " + std::to_string(existing.id));
  if (ann.created_at.empty()) ann.created_at = utc_timestamp_now();
  ann.id = s.next_id++;
  s.annotations.push_back(std::move(ann));
  ++s.revision;
  return s.annotations.back().id;
}

bool AnnotationStore::remove(const std::string& recording_id, std::int64_t id) {
  Slot& s = slot(recording_id);
  std::unique_lock lock(s.mutex);
  const auto it = std::find_if(s.annotations.begin(), s.annotations.end(),
                               [&](const Annotation& a) { return a.id == id; });
  if (it == s.annotations.end()) return false;
  s.annotations.erase(it);
  ++s.revision;
  return true;
}

std::optional<Annotation> AnnotationStore::get(const std::string& recording_id, std::int64_t id) const {
  const Slot& s = slot(recording_id);
  std::shared_lock lock(s.mutex);
  for (const Annotation& a : s.annotations)
    if (a.id == id) return a;
  return std::nullopt;
}

std::vector<Annotation> AnnotationStore::list(const std::string& recording_id) const {
  const Slot& s = slot(recording_id);
  std::shared_lock lock(s.mutex);
  return s.annotations;
}

std::uint64_t AnnotationStore::revision(const std::string& recording_id) const {
  const Slot& s = slot(recording_id);
  std::shared_lock lock(s.mutex);
  return s.revision;
}

std::string AnnotationStore::to_json(const std::string& recording_id) const {
  const auto anns = list(recording_id);
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["recording_id"] = recording_id;
  auto& arr = j["annotations"] = nlohmann::ordered_json::array();
  for (const Annotation& a : anns)
    arr.push_back({{"id", a.id},
                   {"start_fixation", a.start_fixation},
                   {"end_fixation", a.end_fixation},
                   {"label", a.label},
                   {"color", to_hex_color(a.color)},
                   {"author", a.author},
                   {"created_at", a.created_at}});
  return j.dump(2);
}

void AnnotationStore::load_json(const std::string& text) {
  std::string recording_id;
  std::vector<Annotation> anns;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported annotation file version");
    recording_id = j.at("recording_id").get<std::string>();
    for (const auto& e : j.at("annotations")) {
      Annotation a;
      a.id = e.at("id").get<std::int64_t>();
      a.recording_id = recording_id;
      a.start_fixation = e.at("start_fixation").get<int>();
      a.end_fixation = e.at("end_fixation").get<int>();
      a.label = e.at("label").get<std::string>();
      a.color = parse_hex_color(e.at("color").get<std::string>());
      a.author = e.value("author", "");
      a.created_at = e.value("created_at", "");
      anns.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("annotation json: ") + e.what());
  }
  Slot& s = slot(recording_id);
  std::unique_lock lock(s.mutex);
  std::int64_t max_id = 0;
  for (const Annotation& a : anns) {
    try {
      check_span(a, s.fixation_count);
    } catch (const ParameterError& e) {
      throw ParseError(std::string("annotation ") + std::to_string(a.id) + ": " + e.what());
    }
    max_id = std::max(max_id, a.id);
  }
  s.annotations = std::move(anns);
  s.next_id = max_id + 1;
  ++s.revision;
}

void AnnotationStore::save(const std::string& recording_id, const std::filesystem::path& path) const {
  write_file_atomic(path, to_json(recording_id));
}

void AnnotationStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open annotation file " + path.string());
  load_json(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

// --- symbol mapping ---------------------------------------------------------------

SymbolSequence to_symbol_sequence(const std::string& recording_id, std::size_t fixation_count,
                                  std::span<const Annotation> annotations, const LabelScheme& scheme) {
  SymbolSequence seq;
  seq.recording_id = recording_id;
  seq.items.assign(fixation_count, 0);
  std::vector<const Annotation*> order;
  for (const Annotation& a : annotations) order.push_back(&a);
  std::sort(order.begin(), order.end(), [](const Annotation* x, const Annotation* y) {
    return std::tie(x->created_at, x->id) < std::tie(y->created_at, y->id);
  });
  // Later annotations overwrite earlier ones.
  for (const Annotation* a : order) {
    const int symbol = scheme.symbol_of(a->label);
    const auto last = std::min<std::size_t>(static_cast<std::size_t>(a->end_fixation) + 1, fixation_count);
    for (std::size_t f = static_cast<std::size_t>(std::max(0, a->start_fixation)); f < last; ++f)
      seq.items[f] = symbol;
  }
  return seq;
}

std::vector<int> frame_symbols(std::span<const Fixation> fixations, int frame_count,
                               std::span<const Annotation> annotations, const LabelScheme& scheme) {
  const auto symbols = to_symbol_sequence({}, fixations.size(), annotations, scheme);
  std::vector<int> out(static_cast<std::size_t>(std::max(0, frame_count)), 0);
  for (std::size_t i = 0; i < fixations.size(); ++i)
    for (int f = std::max(0, fixations[i].start_frame); f <= fixations[i].end_frame && f < frame_count; ++f)
      out[static_cast<std::size_t>(f)] = symbols.items[i];
  return out;
}

Image export_scarf(std::span<const Fixation> fixations, int frame_count, std::span<const Annotation> annotations,
                   const LabelScheme& scheme, int width_px, int height_px) {
  if (frame_count < 1) throw ParameterError("scarf needs at least one frame");
  if (width_px < 1 || height_px < 1) throw ParameterError("scarf dimensions must be positive");
  const auto symbols = frame_symbols(fixations, frame_count, annotations, scheme);
  Image img(width_px, height_px);
  for (int x = 0; x < width_px; ++x) {
    const auto frame = static_cast<std::size_t>(static_cast<std::int64_t>(x) * frame_count / width_px);
    const Rgb c = scheme.color_of_symbol(symbols[frame]);
    for (int y = 0; y < height_px; ++y) img.at(x, y) = c;
  }
  return img;
}

}  // namespace gazespiral
