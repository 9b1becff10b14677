#pragma once

#include <stdexcept>
#include <vector>

namespace paraseq {

struct SeqChunk {
  int start = 0;
  int len = 0;
  bool operator==(const SeqChunk&) const = default;
};

/// Consecutive chunks of at most maxlen paragraphs; never reorders, covers
/// [0, n) exactly. Documents longer than maxlen are treated as independent
/// sequences chunk by chunk.
inline std::vector<SeqChunk> split_long_documents(int n, int maxlen) {
  if (maxlen < 1) throw std::invalid_argument("split_long_documents: maxlen must be >= 1");
  if (n < 0) throw std::invalid_argument("split_long_documents: negative length");
  std::vector<SeqChunk> chunks;
  for (int start = 0; start < n; start += maxlen)
    chunks.push_back({start, std::min(maxlen, n - start)});
  return chunks;
}

}  // namespace paraseq
