#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

// Brute-force and direct-formula oracles, independent of the library's
// implementation paths.
namespace testsupport {

// log sum over all L^N label sequences of exp(score); plain enumeration.
inline double crf_enum_log_partition(std::span<const double> emissions,  // [N,L]
                                     std::span<const double> trans,      // [L,L]
                                     std::span<const double> start, std::span<const double> stop,
                                     int n, int l) {
  double mx = -1e300;
  std::vector<double> scores;
  std::vector<int> seq(static_cast<std::size_t>(n), 0);
  const long total = static_cast<long>(std::pow(l, n));
  scores.reserve(static_cast<std::size_t>(total));
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = 0; t < n; ++t) {
      seq[static_cast<std::size_t>(t)] = static_cast<int>(c % l);
      c /= l;
    }
    double s = start[static_cast<std::size_t>(seq[0])] + stop[static_cast<std::size_t>(seq[static_cast<std::size_t>(n - 1)])];
    for (int t = 0; t < n; ++t) s += emissions[static_cast<std::size_t>(t) * l + seq[static_cast<std::size_t>(t)]];
    for (int t = 1; t < n; ++t) s += trans[static_cast<std::size_t>(seq[static_cast<std::size_t>(t - 1)]) * l + seq[static_cast<std::size_t>(t)]];
    scores.push_back(s);
    mx = std::max(mx, s);
  }
  double acc = 0;
  for (double s : scores) acc += std::exp(s - mx);
  return mx + std::log(acc);
}

// argmax sequence by enumeration in lexicographic order with strict
// improvement, i.e. the lexicographically smallest maximizer.
inline std::vector<int> crf_enum_argmax(std::span<const double> emissions,
                                        std::span<const double> trans,
                                        std::span<const double> start,
                                        std::span<const double> stop, int n, int l) {
  std::vector<int> best_seq, seq(static_cast<std::size_t>(n), 0);
  double best = -1e300;
  const long total = static_cast<long>(std::pow(l, n));
  for (long code = 0; code < total; ++code) {
    long c = code;
    // least-significant digit is the last position, so `code` order is
    // lexicographic over sequences
    for (int t = n - 1; t >= 0; --t) {
      seq[static_cast<std::size_t>(t)] = static_cast<int>(c % l);
      c /= l;
    }
    double s = start[static_cast<std::size_t>(seq[0])] + stop[static_cast<std::size_t>(seq[static_cast<std::size_t>(n - 1)])];
    for (int t = 0; t < n; ++t) s += emissions[static_cast<std::size_t>(t) * l + seq[static_cast<std::size_t>(t)]];
    for (int t = 1; t < n; ++t) s += trans[static_cast<std::size_t>(seq[static_cast<std::size_t>(t - 1)]) * l + seq[static_cast<std::size_t>(t)]];
    if (s > best) {
      best = s;
      best_seq = seq;
    }
  }
  return best_seq;
}

inline std::vector<double> softmax_oracle(std::span<const double> x) {
  double denom = 0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) denom += std::exp(x[i]);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / denom;
  return out;
}

inline double cross_entropy_oracle(std::span<const double> logits, std::span<const int> targets,
                                   int classes) {
  double acc = 0;
  const std::size_t b = targets.size();
  for (std::size_t i = 0; i < b; ++i) {
    double denom = 0;
    for (int c = 0; c < classes; ++c) denom += std::exp(logits[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c)]);
    acc += std::log(denom) - logits[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(targets[i])];
  }
  return acc / static_cast<double>(b);
}

}  // namespace testsupport
