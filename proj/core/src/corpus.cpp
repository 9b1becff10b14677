#include "paraseq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "paraseq/rng.hpp"

namespace paraseq {

using json = nlohmann::ordered_json;

const char* label_name(Label l) {
  switch (l) {
    case Label::Basic: return "basic";
    case Label::Theorem: return "theorem";
    case Label::Proof: return "proof";
    case Label::Overlap: return "overlap";
  }
  return "?";
}

std::optional<Label> label_from_name(const std::string& name) {
  if (name == "basic") return Label::Basic;
  if (name == "theorem") return Label::Theorem;
  if (name == "proof") return Label::Proof;
  if (name == "overlap") return Label::Overlap;
  return std::nullopt;
}

namespace {

[[noreturn]] void fail_line(std::size_t line_no, const std::string& msg) {
  throw CorpusError("line " + std::to_string(line_no) + ": " + msg);
}

[[noreturn]] void fail_doc(const std::string& doc_id, const std::string& field,
                           const std::string& msg) {
  throw CorpusError("doc '" + doc_id + "', field '" + field + "': " + msg);
}

ParagraphRecord parse_record(const json& j, std::size_t line_no, int* total_pages_out) {
  ParagraphRecord r;
  try {
    r.doc_id = j.at("doc_id").get<std::string>();
    r.para_index = j.at("para_index").get<int>();
    r.page_number = j.at("page_number").get<int>();
    *total_pages_out = j.at("total_pages").get<int>();
    const auto& bb = j.at("bbox");
    if (!bb.is_array() || bb.size() != 4) fail_line(line_no, "bbox must be [x0,y0,x1,y1]");
    r.bbox.x0 = bb[0].get<double>();
    r.bbox.y0 = bb[1].get<double>();
    r.bbox.x1 = bb[2].get<double>();
    r.bbox.y1 = bb[3].get<double>();
    const auto& ps = j.at("page_size");
    if (!ps.is_array() || ps.size() != 2) fail_line(line_no, "page_size must be [w,h]");
    r.bbox.page_width = ps[0].get<double>();
    r.bbox.page_height = ps[1].get<double>();
    const auto lbl = label_from_name(j.at("label").get<std::string>());
    if (!lbl) fail_line(line_no, "unknown label '" + j.at("label").get<std::string>() + "'");
    r.label = *lbl;
    for (const auto& fr : j.at("font_runs")) {
      if (!fr.is_array() || fr.size() != 2) fail_line(line_no, "font run must be [name, size]");
      r.font_runs.push_back({fr[0].get<std::string>(), fr[1].get<double>()});
    }
    if (j.contains("text") && !j.at("text").is_null()) r.text = j.at("text").get<std::string>();
    if (j.contains("bitmap_ref") && !j.at("bitmap_ref").is_null())
      r.bitmap_ref = j.at("bitmap_ref").get<std::string>();
    const std::pair<const char*, const char*> emb_keys[] = {
        {"emb_text", "text"}, {"emb_vision", "vision"}, {"emb_font", "font"}};
    for (const auto& [key, modality] : emb_keys) {
      if (j.contains(key) && !j.at(key).is_null())
        r.embeddings[modality] = j.at(key).get<std::vector<float>>();
    }
  } catch (const CorpusError&) {
    throw;
  } catch (const json::exception& e) {
    fail_line(line_no, e.what());
  }
  return r;
}

void validate_record(const ParagraphRecord& r) {
  const auto& b = r.bbox;
  if (!(0 <= b.x0 && b.x0 <= b.x1 && b.x1 <= b.page_width))
    fail_doc(r.doc_id, "bbox", "x coordinates violate 0 <= x0 <= x1 <= page_width");
  if (!(0 <= b.y0 && b.y0 <= b.y1 && b.y1 <= b.page_height))
    fail_doc(r.doc_id, "bbox", "y coordinates violate 0 <= y0 <= y1 <= page_height");
  const std::pair<const char*, int> dims[] = {
      {"text", kTextDim}, {"vision", kVisionDim}, {"font", kFontDim}};
  for (const auto& [modality, want] : dims) {
    auto it = r.embeddings.find(modality);
    if (it != r.embeddings.end() && static_cast<int>(it->second.size()) != want)
      fail_doc(r.doc_id, std::string("emb_") + modality,
               "dimension " + std::to_string(it->second.size()) + ", expected " +
                   std::to_string(want));
  }
}

void validate_document(const DocumentSequence& doc) {
  if (doc.total_pages <= 0) fail_doc(doc.doc_id, "total_pages", "must be positive");
  int prev_page = 0;
  for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
    const auto& p = doc.paragraphs[i];
    if (p.para_index != static_cast<int>(i))
      fail_doc(doc.doc_id, "para_index",
               "indices not contiguous from 0 (saw " + std::to_string(p.para_index) +
                   " at position " + std::to_string(i) + ")");
    if (p.page_number < 1 || p.page_number > doc.total_pages)
      fail_doc(doc.doc_id, "page_number",
               std::to_string(p.page_number) + " outside [1," + std::to_string(doc.total_pages) + "]");
    if (p.page_number < prev_page)
      fail_doc(doc.doc_id, "page_number", "pages not sorted along para_index order");
    prev_page = p.page_number;
    validate_record(p);
  }
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file '" + path + "'");

  std::vector<std::string> doc_order;
  std::map<std::string, DocumentSequence> docs;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    int total_pages = 0;
    ParagraphRecord r = parse_record(j, line_no, &total_pages);
    auto [it, inserted] = docs.try_emplace(r.doc_id);
    if (inserted) {
      it->second.doc_id = r.doc_id;
      it->second.total_pages = total_pages;
      doc_order.push_back(r.doc_id);
    } else if (it->second.total_pages != total_pages) {
      fail_doc(r.doc_id, "total_pages", "inconsistent across records");
    }
    for (const auto& existing : it->second.paragraphs)
      if (existing.para_index == r.para_index)
        fail_line(line_no, "duplicate paragraph (doc '" + r.doc_id + "', para_index " +
                               std::to_string(r.para_index) + ")");
    it->second.paragraphs.push_back(std::move(r));
  }

  Corpus corpus;
  corpus.reserve(doc_order.size());
  for (const auto& id : doc_order) {
    DocumentSequence& doc = docs[id];
    std::sort(doc.paragraphs.begin(), doc.paragraphs.end(),
              [](const ParagraphRecord& a, const ParagraphRecord& b) {
                return std::pair(a.page_number, a.para_index) < std::pair(b.page_number, b.para_index);
              });
    validate_document(doc);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot open '" + path + "' for writing");
  for (const auto& doc : corpus) {
    for (const auto& p : doc.paragraphs) {
      json j;
      j["doc_id"] = p.doc_id;
      j["para_index"] = p.para_index;
      j["page_number"] = p.page_number;
      j["total_pages"] = doc.total_pages;
      j["bbox"] = {p.bbox.x0, p.bbox.y0, p.bbox.x1, p.bbox.y1};
      j["page_size"] = {p.bbox.page_width, p.bbox.page_height};
      j["label"] = label_name(p.label);
      json runs = json::array();
      for (const auto& fr : p.font_runs) runs.push_back({fr.name, fr.size});
      j["font_runs"] = std::move(runs);
      j["text"] = p.text ? json(*p.text) : json(nullptr);
      j["bitmap_ref"] = p.bitmap_ref ? json(*p.bitmap_ref) : json(nullptr);
      const std::pair<const char*, const char*> emb_keys[] = {
          {"emb_text", "text"}, {"emb_vision", "vision"}, {"emb_font", "font"}};
      for (const auto& [key, modality] : emb_keys) {
        auto it = p.embeddings.find(modality);
        j[key] = (it == p.embeddings.end()) ? json(nullptr) : json(it->second);
      }
      out << j.dump() << '\n';
    }
  }
}

std::size_t paragraph_count(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& d : corpus) n += d.paragraphs.size();
  return n;
}

std::int64_t FontVocab::round_size(double size) {
  return static_cast<std::int64_t>(std::llround(size * 10.0));
}

FontVocab::FontVocab(std::vector<std::pair<std::string, std::int64_t>> entries)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    index_[entries_[i]] = static_cast<int>(i) + 2;
}

int FontVocab::id_of(const std::string& name, double size) const {
  auto it = index_.find({name, round_size(size)});
  return it == index_.end() ? kUnk : it->second;
}

FontVocab build_font_vocab(const Corpus& corpus, std::size_t max_size) {
  if (max_size == 0) throw std::invalid_argument("build_font_vocab: max_size must be positive");
  if (corpus.empty()) throw std::invalid_argument("build_font_vocab: corpus is empty");

  std::map<std::pair<std::string, std::int64_t>, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& p : doc.paragraphs)
      for (const auto& run : p.font_runs)
        ++freq[{run.name, FontVocab::round_size(run.size)}];

  std::vector<std::pair<std::pair<std::string, std::int64_t>, std::size_t>> ranked(freq.begin(),
                                                                                   freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::pair<std::string, std::int64_t>> entries;
  entries.reserve(ranked.size());
  for (auto& [key, count] : ranked) entries.push_back(std::move(key));
  return FontVocab(std::move(entries));
}

std::vector<int> encode_font_sequence(const ParagraphRecord& record, const FontVocab& vocab,
                                      int maxlen) {
  if (maxlen < 1) throw std::invalid_argument("encode_font_sequence: maxlen must be >= 1");
  std::vector<int> ids;
  ids.reserve(record.font_runs.size());
  for (const auto& run : record.font_runs) ids.push_back(vocab.id_of(run.name, run.size));
  if (static_cast<int>(ids.size()) > maxlen)
    ids.erase(ids.begin(), ids.end() - maxlen);  // keep the tail
  std::vector<int> out(static_cast<std::size_t>(maxlen), FontVocab::kPad);
  std::copy(ids.begin(), ids.end(), out.end() - static_cast<std::ptrdiff_t>(ids.size()));
  return out;
}

std::vector<GeomFeatures> compute_geom_features(const DocumentSequence& doc) {
  if (doc.total_pages <= 0)
    throw std::invalid_argument("compute_geom_features: total_pages must be positive (doc '" +
                                doc.doc_id + "')");
  std::vector<GeomFeatures> out;
  out.reserve(doc.paragraphs.size());
  for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
    const auto& p = doc.paragraphs[i];
    GeomFeatures g;
    g.page_norm = static_cast<double>(p.page_number) / doc.total_pages;
    g.x_norm = p.bbox.page_width > 0 ? p.bbox.x0 / p.bbox.page_width : 0.0;
    g.y_norm = p.bbox.page_height > 0 ? p.bbox.y0 / p.bbox.page_height : 0.0;
    g.same_page_as_prev =
        (i > 0 && doc.paragraphs[i - 1].page_number == p.page_number) ? 1 : 0;
    out.push_back(g);
  }
  return out;
}

std::vector<double> geom_feature_matrix(const DocumentSequence& doc, bool extended) {
  const auto feats = compute_geom_features(doc);
  const int cols = extended ? kGeomDimExtended : kGeomDim;
  std::vector<double> m(feats.size() * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    double* row = m.data() + i * static_cast<std::size_t>(cols);
    row[0] = feats[i].page_norm;
    row[1] = feats[i].x_norm;
    row[2] = feats[i].y_norm;
    row[3] = feats[i].same_page_as_prev;
    if (extended) {
      const auto& b = doc.paragraphs[i].bbox;
      row[4] = b.page_width > 0 ? b.x1 / b.page_width : 0.0;
      row[5] = b.page_height > 0 ? b.y1 / b.page_height : 0.0;
    }
  }
  return m;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double val_fraction,
                                       std::uint64_t seed) {
  if (corpus.size() < 2) throw std::invalid_argument("split_corpus: need at least 2 documents");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("split_corpus: val_fraction must lie in (0,1)");
  const std::size_t n = corpus.size();
  const std::size_t val_n =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (val_n == 0 || val_n == n)
    throw std::invalid_argument("split_corpus: fraction " + std::to_string(val_fraction) +
                                " leaves an empty side for " + std::to_string(n) + " documents");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Corpus train, val;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < val_n)
      val.push_back(corpus[order[i]]);
    else
      train.push_back(corpus[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace paraseq
