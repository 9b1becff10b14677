#include "paraseq/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <map>

namespace paraseq {

std::vector<Label> baseline_dummy(std::size_t n) {
  return std::vector<Label>(n, Label::Basic);
}

std::vector<Label> baseline_dummy(const Corpus& val) {
  return baseline_dummy(paragraph_count(val));
}

std::string first_word(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  std::size_t j = i;
  while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
  std::string w = text.substr(i, j - i);
  while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.front()))) w.erase(w.begin());
  while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back()))) w.pop_back();
  std::transform(w.begin(), w.end(), w.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return w;
}

TopkLexicons build_topk_lexicons(const Corpus& train, std::size_t k) {
  TopkLexicons lex;
  lex.k = k;
  std::array<std::map<std::string, std::size_t>, 3> counts;
  for (const auto& doc : train) {
    for (const auto& p : doc.paragraphs) {
      const int c = static_cast<int>(p.label);
      if (c >= 3) continue;  // the reject class gets no lexicon
      if (!p.text) {
        ++lex.skipped_records;
        continue;
      }
      const std::string w = first_word(*p.text);
      if (!w.empty()) ++counts[static_cast<std::size_t>(c)][w];
    }
  }
  if (lex.skipped_records > 0)
    std::cerr << "warning: top-k lexicons skipped " << lex.skipped_records
              << " training paragraphs without text\n";
  for (int c = 0; c < 3; ++c) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts[static_cast<std::size_t>(c)].begin(),
                                                            counts[static_cast<std::size_t>(c)].end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (ranked.size() > k) ranked.resize(k);
    for (auto& [w, n] : ranked) lex.words[static_cast<std::size_t>(c)].push_back(w);
    std::sort(lex.words[static_cast<std::size_t>(c)].begin(), lex.words[static_cast<std::size_t>(c)].end());
  }
  return lex;
}

std::vector<Label> apply_topk_lexicons(const TopkLexicons& lex, const Corpus& val,
                                       std::size_t* skipped_val) {
  auto contains = [](const std::vector<std::string>& sorted, const std::string& w) {
    return std::binary_search(sorted.begin(), sorted.end(), w);
  };
  std::vector<Label> out;
  std::size_t skipped = 0;
  for (const auto& doc : val) {
    for (const auto& p : doc.paragraphs) {
      if (!p.text) {
        ++skipped;
        out.push_back(Label::Basic);
        continue;
      }
      const std::string w = first_word(*p.text);
      if (contains(lex.words[static_cast<std::size_t>(static_cast<int>(Label::Theorem))], w))
        out.push_back(Label::Theorem);
      else if (contains(lex.words[static_cast<std::size_t>(static_cast<int>(Label::Proof))], w))
        out.push_back(Label::Proof);
      else
        out.push_back(Label::Basic);
    }
  }
  if (skipped > 0)
    std::cerr << "warning: top-k baseline defaulted " << skipped
              << " textless validation paragraphs to basic\n";
  if (skipped_val) *skipped_val = skipped;
  return out;
}

std::vector<Label> baseline_topk_first_word(const Corpus& train, const Corpus& val, std::size_t k,
                                            std::size_t* skipped_val) {
  return apply_topk_lexicons(build_topk_lexicons(train, k), val, skipped_val);
}

}  // namespace paraseq
