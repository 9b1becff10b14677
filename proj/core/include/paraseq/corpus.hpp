#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace paraseq {

// Fixed modality dimensions carried by the record schema.
inline constexpr int kTextDim = 768;
inline constexpr int kVisionDim = 1280;
inline constexpr int kFontDim = 128;
inline constexpr int kJointDim = 1280;
inline constexpr int kNumLabels = 4;

/// Basic/Theorem/Proof targets plus the reject Overlap class assigned to
/// extracted paragraphs spanning blocks of different categories. Overlap is a
/// real training target but never enters mean-F1 averaging.
enum class Label : int { Basic = 0, Theorem = 1, Proof = 2, Overlap = 3 };

const char* label_name(Label l);
std::optional<Label> label_from_name(const std::string& name);

struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double page_width = 0, page_height = 0;
  bool operator==(const BBox&) const = default;
};

struct FontRun {
  std::string name;
  double size = 0;
  bool operator==(const FontRun&) const = default;
};

struct ParagraphRecord {
  std::string doc_id;
  int para_index = 0;   // 0-based, contiguous within a document
  int page_number = 1;  // 1-based
  BBox bbox;
  Label label = Label::Basic;
  std::vector<FontRun> font_runs;
  std::optional<std::string> text;
  std::optional<std::string> bitmap_ref;
  std::map<std::string, std::vector<float>> embeddings;  // "text" | "vision" | "font"

  bool operator==(const ParagraphRecord&) const = default;
};

struct DocumentSequence {
  std::string doc_id;
  int total_pages = 1;
  std::vector<ParagraphRecord> paragraphs;  // sorted by (page_number, para_index)

  bool operator==(const DocumentSequence&) const = default;
};

using Corpus = std::vector<DocumentSequence>;

class CorpusError : public std::runtime_error {
public:
  explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
};

/// Loads a JSONL corpus (one paragraph object per line), groups records by
/// doc_id in first-seen order and validates every invariant. Errors carry the
/// offending line number or doc_id/field.
Corpus load_corpus(const std::string& path);

/// Writes the canonical JSONL form; load_corpus(save_corpus(c)) == c.
void save_corpus(const std::string& path, const Corpus& corpus);

std::size_t paragraph_count(const Corpus& corpus);

/// Frequency-ranked vocabulary over (font name, size rounded to 1 decimal)
/// pairs. Ids 0 and 1 are reserved for PAD and UNK; ties broken
/// lexicographically so a corpus and cap determine the mapping.
class FontVocab {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  FontVocab() = default;
  explicit FontVocab(std::vector<std::pair<std::string, std::int64_t>> entries);

  int id_of(const std::string& name, double size) const;
  std::size_t size() const { return entries_.size() + 2; }

  /// (name, size*10 as integer) pairs in id order, starting at id 2.
  const std::vector<std::pair<std::string, std::int64_t>>& entries() const { return entries_; }

  static std::int64_t round_size(double size);

private:
  std::vector<std::pair<std::string, std::int64_t>> entries_;
  std::map<std::pair<std::string, std::int64_t>, int> index_;
};

FontVocab build_font_vocab(const Corpus& corpus, std::size_t max_size);

/// One id per font run, left-padded with PAD to exactly maxlen; sequences
/// longer than maxlen keep the last maxlen ids (proof-ending cues sit at the
/// tail). Unknown fonts map to UNK.
std::vector<int> encode_font_sequence(const ParagraphRecord& record, const FontVocab& vocab,
                                      int maxlen);

struct GeomFeatures {
  double page_norm = 0;            // page_number / total_pages
  double x_norm = 0;               // x0 / page_width (top-left anchor)
  double y_norm = 0;               // y0 / page_height
  int same_page_as_prev = 0;       // 1 iff previous paragraph shares the page
  bool operator==(const GeomFeatures&) const = default;
};

std::vector<GeomFeatures> compute_geom_features(const DocumentSequence& doc);

inline constexpr int kGeomDim = 4;
inline constexpr int kGeomDimExtended = 6;

/// Row-major [N, 4] (or [N, 6] with the extended layout mode, which appends
/// x1/page_width and y1/page_height).
std::vector<double> geom_feature_matrix(const DocumentSequence& doc, bool extended = false);

/// Document-granularity split, deterministic in the seed; both sides
/// non-empty or an error is raised.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double val_fraction,
                                       std::uint64_t seed);

}  // namespace paraseq
