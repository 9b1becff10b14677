#include "paraseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "paraseq/rng.hpp"

namespace paraseq {

std::array<double, 4> reference_prevalence() {
  std::array<double, 4> p{};
  for (int i = 0; i < 4; ++i)
    p[static_cast<std::size_t>(i)] =
        static_cast<double>(kReferenceClassCounts[i]) / static_cast<double>(kReferenceTotal);
  return p;
}

std::vector<double> synth_default_transition() {
  const auto pi = reference_prevalence();
  // rows: basic, theorem, proof, overlap (theorem/proof self-transition 0.85)
  std::vector<double> p = {
      0, 0,     0,    0,      // basic row solved below
      0.025, 0.85,  0.12, 0.005,
      0.10,  0.045, 0.85, 0.005,
      0.50,  0.15,  0.30, 0.05,
  };
  // stationarity: pi_j = sum_i pi_i * P[i][j]  =>  solve the basic row
  double row0_rest = 0;
  for (int j = 1; j < 4; ++j) {
    double inflow = 0;
    for (int i = 1; i < 4; ++i) inflow += pi[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i) * 4 + j];
    const double v = (pi[static_cast<std::size_t>(j)] - inflow) / pi[0];
    p[static_cast<std::size_t>(j)] = v;
    row0_rest += v;
  }
  p[0] = 1.0 - row0_rest;
  return p;
}

namespace {

void validate_transition(const std::vector<double>& t) {
  if (t.size() != 16) throw std::invalid_argument("synth: transition matrix must be 4x4");
  for (int i = 0; i < 4; ++i) {
    double row = 0;
    for (int j = 0; j < 4; ++j) {
      const double v = t[static_cast<std::size_t>(i) * 4 + j];
      if (v < 0) throw std::invalid_argument("synth: negative transition probability");
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw std::invalid_argument("synth: transition row " + std::to_string(i) +
                                  " sums to " + std::to_string(row) + ", expected 1");
  }
}

std::vector<float> class_feature(Rng& rng, const std::vector<double>& mean, double noise) {
  std::vector<float> v(mean.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<float>(mean[i] + noise * rng.normal());
  return v;
}

std::vector<std::vector<double>> class_means(const Rng& base, std::uint64_t stream, int dim) {
  std::vector<std::vector<double>> means(4, std::vector<double>(static_cast<std::size_t>(dim)));
  Rng rng = base.fork(stream);
  for (auto& m : means) {
    double norm = 0;
    for (auto& x : m) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : m) x /= norm;
  }
  return means;
}

const char* kBasicWords[] = {"the", "we", "in", "this", "it", "for", "as", "a", "note", "observe"};
const char* kTheoremWords[] = {"Theorem", "Lemma", "Proposition", "Definition", "Corollary",
                               "Remark"};
const char* kProofWords[] = {"Proof", "Proof.", "Proof:"};

std::string synth_text(Rng& rng, Label label) {
  switch (label) {
    case Label::Theorem:
      return std::string(kTheoremWords[rng.below(std::size(kTheoremWords))]) + " 1. Statement text.";
    case Label::Proof:
      return std::string(kProofWords[rng.below(std::size(kProofWords))]) + " We argue directly.";
    case Label::Basic:
    case Label::Overlap:
      return std::string(kBasicWords[rng.below(std::size(kBasicWords))]) + " paragraph body text.";
  }
  return "";
}

std::vector<FontRun> synth_font_runs(Rng& rng, Label label) {
  std::vector<FontRun> runs;
  const int body = 1 + static_cast<int>(rng.below(4));
  switch (label) {
    case Label::Theorem:
      runs.push_back({"cmbx10", 10.0});
      for (int i = 0; i < body; ++i) runs.push_back({"cmti10", 10.0});
      break;
    case Label::Proof:
      runs.push_back({"cmti10", 10.0});
      for (int i = 0; i < body; ++i) runs.push_back({"cmr10", 10.0});
      runs.push_back({"cmsy10", 10.0});  // QED cue at the tail
      break;
    case Label::Basic:
      for (int i = 0; i < body + 1; ++i)
        runs.push_back({rng.uniform() < 0.15 ? "cmmi10" : "cmr10", 10.0});
      break;
    case Label::Overlap:
      runs.push_back({"cmr10", 10.0});
      runs.push_back({"cmti10", 10.0});
      break;
  }
  return runs;
}

}  // namespace

std::array<double, 4> stationary_distribution(const std::vector<double>& transition) {
  validate_transition(transition);
  std::array<double, 4> pi{0.25, 0.25, 0.25, 0.25};
  for (int iter = 0; iter < 2000; ++iter) {
    std::array<double, 4> next{};
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i)
        next[static_cast<std::size_t>(j)] +=
            pi[static_cast<std::size_t>(i)] * transition[static_cast<std::size_t>(i) * 4 + j];
    pi = next;
  }
  return pi;
}

Corpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.docs < 1) throw std::invalid_argument("synth: docs must be >= 1");
  const std::vector<double> trans =
      cfg.transition.empty() ? synth_default_transition() : cfg.transition;
  validate_transition(trans);
  const std::array<double, 4> start = stationary_distribution(trans);

  Rng base(cfg.seed);
  Rng labels_rng = base.fork(1);
  Rng feat_rng = base.fork(2);
  Rng misc_rng = base.fork(3);

  const auto font_means = class_means(base, 10, kFontDim);
  const auto text_means = cfg.emit_text_emb ? class_means(base, 11, kTextDim)
                                            : std::vector<std::vector<double>>{};
  const auto vision_means = cfg.emit_vision_emb ? class_means(base, 12, kVisionDim)
                                                : std::vector<std::vector<double>>{};

  // document lengths
  std::vector<int> lengths(static_cast<std::size_t>(cfg.docs));
  std::size_t total = 0;
  for (auto& len : lengths) {
    len = std::max(3, static_cast<int>(std::llround(misc_rng.normal(cfg.mean_len, cfg.mean_len / 3.0))));
    total += static_cast<std::size_t>(len);
  }

  // labels: Markov chain per document, or exact global quotas
  std::vector<std::vector<Label>> doc_labels(static_cast<std::size_t>(cfg.docs));
  if (cfg.exact_prevalence) {
    const auto pi = reference_prevalence();
    std::vector<Label> pool;
    pool.reserve(total);
    std::array<std::size_t, 4> quota{};
    std::array<double, 4> remainder{};
    std::size_t assigned = 0;
    for (int c = 0; c < 4; ++c) {
      const double exact = pi[static_cast<std::size_t>(c)] * static_cast<double>(total);
      quota[static_cast<std::size_t>(c)] = static_cast<std::size_t>(exact);
      remainder[static_cast<std::size_t>(c)] = exact - static_cast<double>(quota[static_cast<std::size_t>(c)]);
      assigned += quota[static_cast<std::size_t>(c)];
    }
    while (assigned < total) {  // largest remainder
      int best = 0;
      for (int c = 1; c < 4; ++c)
        if (remainder[static_cast<std::size_t>(c)] > remainder[static_cast<std::size_t>(best)]) best = c;
      ++quota[static_cast<std::size_t>(best)];
      remainder[static_cast<std::size_t>(best)] = -1;
      ++assigned;
    }
    for (int c = 0; c < 4; ++c)
      pool.insert(pool.end(), quota[static_cast<std::size_t>(c)], static_cast<Label>(c));
    labels_rng.shuffle(pool);
    std::size_t next = 0;
    for (int d = 0; d < cfg.docs; ++d) {
      doc_labels[static_cast<std::size_t>(d)].assign(pool.begin() + static_cast<std::ptrdiff_t>(next),
                                                     pool.begin() + static_cast<std::ptrdiff_t>(next + static_cast<std::size_t>(lengths[static_cast<std::size_t>(d)])));
      next += static_cast<std::size_t>(lengths[static_cast<std::size_t>(d)]);
    }
  } else {
    for (int d = 0; d < cfg.docs; ++d) {
      auto& ls = doc_labels[static_cast<std::size_t>(d)];
      ls.reserve(static_cast<std::size_t>(lengths[static_cast<std::size_t>(d)]));
      int state = static_cast<int>(labels_rng.categorical(std::span<const double>(start.data(), 4)));
      ls.push_back(static_cast<Label>(state));
      for (int t = 1; t < lengths[static_cast<std::size_t>(d)]; ++t) {
        state = static_cast<int>(
            labels_rng.categorical(std::span<const double>(trans.data() + state * 4, 4)));
        ls.push_back(static_cast<Label>(state));
      }
    }
  }

  constexpr double kPageW = 612, kPageH = 792;
  constexpr int kSlotsPerPage = 6;

  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.docs));
  for (int d = 0; d < cfg.docs; ++d) {
    DocumentSequence doc;
    doc.doc_id = "synth-" + std::to_string(d);
    const int len = lengths[static_cast<std::size_t>(d)];
    doc.total_pages = (len + kSlotsPerPage - 1) / kSlotsPerPage;
    for (int i = 0; i < len; ++i) {
      ParagraphRecord r;
      r.doc_id = doc.doc_id;
      r.para_index = i;
      r.page_number = i / kSlotsPerPage + 1;
      const int slot = i % kSlotsPerPage;
      r.bbox.page_width = kPageW;
      r.bbox.page_height = kPageH;
      r.bbox.x0 = 72;
      r.bbox.x1 = 540;
      r.bbox.y0 = 72 + slot * 110;
      r.bbox.y1 = r.bbox.y0 + 90;
      r.label = doc_labels[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)];
      const auto c = static_cast<std::size_t>(static_cast<int>(r.label));
      if (cfg.emit_font_runs) r.font_runs = synth_font_runs(misc_rng, r.label);
      if (cfg.emit_text) r.text = synth_text(misc_rng, r.label);
      if (cfg.emit_font_emb) r.embeddings["font"] = class_feature(feat_rng, font_means[c], cfg.noise);
      if (cfg.emit_text_emb) r.embeddings["text"] = class_feature(feat_rng, text_means[c], cfg.noise);
      if (cfg.emit_vision_emb)
        r.embeddings["vision"] = class_feature(feat_rng, vision_means[c], cfg.noise);
      doc.paragraphs.push_back(std::move(r));
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace paraseq
