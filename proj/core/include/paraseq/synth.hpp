#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "paraseq/corpus.hpp"

namespace paraseq {

// Reference class counts ((basic, theorem, proof, overlap) paragraphs in the
// corpus the models were originally validated on); prevalence derived from
// these drives the default label chain.
inline constexpr std::int64_t kReferenceClassCounts[4] = {314501, 85801, 125524, 3470};
inline constexpr std::int64_t kReferenceTotal = 314501 + 85801 + 125524 + 3470;

std::array<double, 4> reference_prevalence();

struct SynthConfig {
  int docs = 100;
  double mean_len = 30;        // paragraphs per document (approx.)
  double noise = 1.0;          // class-conditional feature noise; 0 = separable
  std::uint64_t seed = 0;
  std::vector<double> transition;  // row-major 4x4; empty selects the default chain
  bool emit_text_emb = false;
  bool emit_vision_emb = false;
  bool emit_font_emb = true;
  bool emit_text = true;       // synthesized first words (for the lexicon baseline)
  bool emit_font_runs = true;
  bool exact_prevalence = false;  // label quotas matching reference_prevalence()
};

/// Default order-one label chain: theorem/proof rows pinned at self-transition
/// 0.85, basic row solved so the stationary distribution equals
/// reference_prevalence() exactly.
std::vector<double> synth_default_transition();

/// Stationary distribution of a 4x4 row-stochastic matrix (power iteration).
std::array<double, 4> stationary_distribution(const std::vector<double>& transition);

/// Labels follow the Markov chain, per-class features are unit-mean-vector
/// Gaussians with the configured noise, geometry follows a synthetic
/// letter-size pagination, and font runs / first words carry class-typical
/// cues. Deterministic in the seed.
Corpus synth_corpus(const SynthConfig& cfg);

}  // namespace paraseq
