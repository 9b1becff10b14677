#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "paraseq/corpus.hpp"
#include "paraseq/synth.hpp"

using namespace paraseq;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::string record_line(const std::string& doc, int idx, int page, int total_pages,
                        const std::string& label, const std::string& extra = "") {
  return "{\"doc_id\":\"" + doc + "\",\"para_index\":" + std::to_string(idx) +
         ",\"page_number\":" + std::to_string(page) +
         ",\"total_pages\":" + std::to_string(total_pages) +
         ",\"bbox\":[10,20,100,60],\"page_size\":[612,792],\"label\":\"" + label +
         "\",\"font_runs\":[[\"cmr10\",10.0]],\"text\":null,\"bitmap_ref\":null" + extra + "}";
}

ParagraphRecord make_record(const std::string& doc, int idx,
                            std::vector<FontRun> runs = {{"cmr10", 10.0}}) {
  ParagraphRecord r;
  r.doc_id = doc;
  r.para_index = idx;
  r.page_number = 1;
  r.bbox = {10, 20, 100, 60, 612, 792};
  r.label = Label::Basic;
  r.font_runs = std::move(runs);
  return r;
}

}  // namespace

TEST_CASE("load_corpus: empty file yields empty corpus") {
  TempFile f("paraseq_empty.jsonl");
  std::ofstream(f.path).close();
  CHECK(load_corpus(f.path).empty());
}

TEST_CASE("load_corpus: one document with three paragraphs") {
  TempFile f("paraseq_three.jsonl");
  {
    std::ofstream out(f.path);
    out << record_line("d1", 0, 1, 2, "basic") << '\n';
    out << record_line("d1", 1, 1, 2, "theorem") << '\n';
    out << record_line("d1", 2, 2, 2, "proof") << '\n';
  }
  auto corpus = load_corpus(f.path);
  REQUIRE(corpus.size() == 1);
  REQUIRE(corpus[0].paragraphs.size() == 3);
  CHECK(corpus[0].doc_id == "d1");
  CHECK(corpus[0].paragraphs[1].label == Label::Theorem);
}

TEST_CASE("load_corpus: duplicate paragraph is rejected") {
  TempFile f("paraseq_dup.jsonl");
  {
    std::ofstream out(f.path);
    out << record_line("d1", 0, 1, 1, "basic") << '\n';
    out << record_line("d1", 0, 1, 1, "proof") << '\n';
  }
  CHECK_THROWS_WITH_AS(load_corpus(f.path), doctest::Contains("duplicate paragraph"), CorpusError);
}

TEST_CASE("load_corpus: malformed line carries its line number") {
  TempFile f("paraseq_bad.jsonl");
  {
    std::ofstream out(f.path);
    out << record_line("d1", 0, 1, 1, "basic") << '\n';
    out << "{not json}\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(f.path), doctest::Contains("line 2"), CorpusError);
}

TEST_CASE("load_corpus: invariant violations name doc and field") {
  TempFile f("paraseq_inv.jsonl");
  {
    std::ofstream out(f.path);
    out << record_line("d9", 0, 1, 1, "basic") << '\n';
    out << record_line("d9", 2, 1, 1, "basic") << '\n';  // gap in para_index
  }
  CHECK_THROWS_WITH_AS(load_corpus(f.path), doctest::Contains("d9"), CorpusError);
  CHECK_THROWS_WITH_AS(load_corpus(f.path), doctest::Contains("para_index"), CorpusError);
}

TEST_CASE("load_corpus: embedding dimension is validated") {
  TempFile f("paraseq_emb.jsonl");
  {
    std::ofstream out(f.path);
    out << record_line("d1", 0, 1, 1, "basic", ",\"emb_font\":[1.0,2.0]") << '\n';
  }
  CHECK_THROWS_WITH_AS(load_corpus(f.path), doctest::Contains("emb_font"), CorpusError);
}

TEST_CASE("corpus round-trips through serialization") {
  SynthConfig cfg;
  cfg.docs = 6;
  cfg.mean_len = 8;
  cfg.seed = 42;
  Corpus corpus = synth_corpus(cfg);
  TempFile f("paraseq_roundtrip.jsonl");
  save_corpus(f.path, corpus);
  Corpus again = load_corpus(f.path);
  CHECK(again == corpus);
}

TEST_CASE("font vocab: singleton corpus maps the one font to id 2") {
  Corpus corpus(1);
  corpus[0].doc_id = "d";
  corpus[0].total_pages = 1;
  corpus[0].paragraphs.push_back(make_record("d", 0));
  auto vocab = build_font_vocab(corpus, 100);
  CHECK(vocab.size() == 3);  // PAD, UNK, cmr10
  CHECK(vocab.id_of("cmr10", 10.0) == 2);
  CHECK(vocab.id_of("missing", 10.0) == FontVocab::kUnk);
}

TEST_CASE("font vocab: equal frequencies break ties lexicographically") {
  Corpus corpus(1);
  corpus[0].doc_id = "d";
  corpus[0].total_pages = 1;
  corpus[0].paragraphs.push_back(make_record("d", 0, {{"zfont", 9.0}, {"afont", 9.0}}));
  auto vocab = build_font_vocab(corpus, 100);
  CHECK(vocab.id_of("afont", 9.0) == 2);
  CHECK(vocab.id_of("zfont", 9.0) == 3);
}

TEST_CASE("font vocab: cap at 4031 over 5000 distinct fonts gives 4033 ids") {
  Corpus corpus(1);
  corpus[0].doc_id = "d";
  corpus[0].total_pages = 1;
  auto& rec = corpus[0].paragraphs.emplace_back(make_record("d", 0, {}));
  for (int i = 0; i < 5000; ++i) rec.font_runs.push_back({"font" + std::to_string(i), 10.0});
  auto vocab = build_font_vocab(corpus, 4031);
  CHECK(vocab.size() == 4033);
}

TEST_CASE("font vocab: zero cap is an error, sizes round to one decimal") {
  Corpus corpus(1);
  corpus[0].doc_id = "d";
  corpus[0].total_pages = 1;
  corpus[0].paragraphs.push_back(make_record("d", 0, {{"cmr10", 10.04}}));
  CHECK_THROWS_AS(build_font_vocab(corpus, 0), std::invalid_argument);
  auto vocab = build_font_vocab(corpus, 10);
  CHECK(vocab.id_of("cmr10", 10.0) == 2);   // 10.04 rounds to 10.0
  CHECK(vocab.id_of("cmr10", 10.06) == FontVocab::kUnk);  // rounds to 10.1
}

TEST_CASE("encode_font_sequence: left padding, tail truncation, UNK") {
  Corpus corpus(1);
  corpus[0].doc_id = "d";
  corpus[0].total_pages = 1;
  corpus[0].paragraphs.push_back(
      make_record("d", 0, {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}}));
  auto vocab = build_font_vocab(corpus, 100);
  const int ida = vocab.id_of("a", 1.0), idb = vocab.id_of("b", 1.0), idc = vocab.id_of("c", 1.0);

  auto rec3 = make_record("d", 0, {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}});
  CHECK(encode_font_sequence(rec3, vocab, 5) == std::vector<int>{0, 0, ida, idb, idc});

  auto rec7 = make_record("d", 0, {{"x", 1.0}, {"x", 1.0}, {"a", 1.0}, {"b", 1.0}, {"c", 1.0},
                                   {"a", 1.0}, {"b", 1.0}});
  CHECK(encode_font_sequence(rec7, vocab, 5) == std::vector<int>{ida, idb, idc, ida, idb});

  auto unk = make_record("d", 0, {{"nope", 3.0}});
  CHECK(encode_font_sequence(unk, vocab, 3) == std::vector<int>{0, 0, FontVocab::kUnk});

  CHECK_THROWS_AS(encode_font_sequence(rec3, vocab, 0), std::invalid_argument);
}

TEST_CASE("encode_font_sequence: output length is always maxlen") {
  SynthConfig cfg;
  cfg.docs = 4;
  cfg.seed = 9;
  Corpus corpus = synth_corpus(cfg);
  auto vocab = build_font_vocab(corpus, 50);
  for (const auto& doc : corpus)
    for (const auto& p : doc.paragraphs)
      CHECK(encode_font_sequence(p, vocab, 7).size() == 7);
}

TEST_CASE("geom features: direct formula and page-break conventions") {
  DocumentSequence doc;
  doc.doc_id = "d";
  doc.total_pages = 10;
  auto p0 = make_record("d", 0);
  p0.page_number = 3;
  p0.bbox = {0, 0, 100, 50, 612, 792};
  auto p1 = make_record("d", 1);
  p1.page_number = 3;
  p1.bbox = {61.2, 79.2, 100, 100, 612, 792};
  auto p2 = make_record("d", 2);
  p2.page_number = 4;
  doc.paragraphs = {p0, p1, p2};

  auto g = compute_geom_features(doc);
  REQUIRE(g.size() == 3);
  CHECK(g[0].page_norm == doctest::Approx(0.3));
  CHECK(g[0].x_norm == doctest::Approx(0.0));
  CHECK(g[0].y_norm == doctest::Approx(0.0));
  CHECK(g[0].same_page_as_prev == 0);  // first paragraph
  CHECK(g[1].x_norm == doctest::Approx(0.1));
  CHECK(g[1].y_norm == doctest::Approx(0.1));
  CHECK(g[1].same_page_as_prev == 1);
  CHECK(g[2].same_page_as_prev == 0);  // page break

  DocumentSequence bad = doc;
  bad.total_pages = 0;
  CHECK_THROWS_AS(compute_geom_features(bad), std::invalid_argument);
}

TEST_CASE("geom features stay inside [0,1]; extended mode adds two columns") {
  SynthConfig cfg;
  cfg.docs = 5;
  cfg.seed = 31;
  Corpus corpus = synth_corpus(cfg);
  for (const auto& doc : corpus) {
    auto g = compute_geom_features(doc);
    for (const auto& f : g) {
      CHECK(f.page_norm >= 0);
      CHECK(f.page_norm <= 1);
      CHECK(f.x_norm >= 0);
      CHECK(f.x_norm <= 1);
      CHECK(f.y_norm >= 0);
      CHECK(f.y_norm <= 1);
    }
    CHECK(geom_feature_matrix(doc, false).size() == g.size() * 4);
    CHECK(geom_feature_matrix(doc, true).size() == g.size() * 6);
  }
}

TEST_CASE("split_corpus: sizes, determinism, disjointness, count preservation") {
  SynthConfig cfg;
  cfg.docs = 10;
  cfg.seed = 77;
  Corpus corpus = synth_corpus(cfg);

  auto [train, val] = split_corpus(corpus, 0.3, 7);
  CHECK(train.size() == 7);
  CHECK(val.size() == 3);

  auto [train2, val2] = split_corpus(corpus, 0.3, 7);
  CHECK(train == train2);
  CHECK(val == val2);

  std::set<std::string> ids;
  for (const auto& d : train) ids.insert(d.doc_id);
  for (const auto& d : val) ids.insert(d.doc_id);
  CHECK(ids.size() == corpus.size());
  CHECK(paragraph_count(train) + paragraph_count(val) == paragraph_count(corpus));

  // different seeds generally shuffle membership
  auto [train3, val3] = split_corpus(corpus, 0.3, 8);
  bool differs = !(val == val3);
  auto [train4, val4] = split_corpus(corpus, 0.3, 9);
  differs = differs || !(val == val4);
  CHECK(differs);
}

TEST_CASE("split_corpus: minimal and invalid cases") {
  SynthConfig cfg;
  cfg.docs = 2;
  cfg.seed = 5;
  Corpus corpus = synth_corpus(cfg);
  auto [train, val] = split_corpus(corpus, 0.5, 1);
  CHECK(train.size() == 1);
  CHECK(val.size() == 1);

  CHECK_THROWS_AS(split_corpus(corpus, 0.01, 1), std::invalid_argument);  // empty val side
  Corpus single(corpus.begin(), corpus.begin() + 1);
  CHECK_THROWS_AS(split_corpus(single, 0.5, 1), std::invalid_argument);
}
