#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "paraseq/corpus.hpp"

namespace paraseq {

/// Constant-Basic predictor.
std::vector<Label> baseline_dummy(std::size_t n);
std::vector<Label> baseline_dummy(const Corpus& val);

/// First whitespace token, lowercased, stripped of non-alphanumeric edges;
/// empty when the text carries no such token.
std::string first_word(const std::string& text);

struct TopkLexicons {
  std::size_t k = 0;
  // basic, theorem, proof; most frequent first-words, ties lexicographic
  std::array<std::vector<std::string>, 3> words;
  std::size_t skipped_records = 0;  // training paragraphs without text
};

TopkLexicons build_topk_lexicons(const Corpus& train, std::size_t k);

/// First-word lexicon baseline: a paragraph takes the class whose lexicon
/// contains its first word, priority theorem > proof > basic on multi-hit;
/// no hit (or missing text, reported via skipped) falls back to Basic.
std::vector<Label> baseline_topk_first_word(const Corpus& train, const Corpus& val, std::size_t k,
                                            std::size_t* skipped_val = nullptr);
std::vector<Label> apply_topk_lexicons(const TopkLexicons& lex, const Corpus& val,
                                       std::size_t* skipped_val = nullptr);

}  // namespace paraseq
