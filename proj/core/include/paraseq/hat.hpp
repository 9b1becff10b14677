#pragma once

#include <cstdint>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/encoder_block.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/sequence.hpp"
#include "paraseq/sw_transformer.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

struct HatConfig {
  int model_dim = kJointDim;
  int segment = 16;  // segment size, same role as the SW window
  int heads = 20;
  double ff_multiplier = 1.5;
  int interleave_reps = 2;  // paper variants: 2 or 3
  int swe_blocks = 1;
  int cwe_blocks = 1;
  int maxlen = 1024;
  bool use_geo = true;
  int geo_dim = kGeomDim;
  int num_classes = kNumLabels;
};

/// Hierarchical attention with interleaving layers. Each segment gets a
/// learned summary token; every rep runs the segment-wise encoder (SWE) over
/// the segments and then the context-wise encoder (CWE) over all summary
/// tokens. The CWE delta of a segment's summary is broadcast back onto its
/// member rows, so zeroed CWE weights collapse the model to a pure SWE stack.
template <class Real>
class HatEncoder {
public:
  HatEncoder(HatConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.segment < 1) throw std::invalid_argument("HatEncoder: segment must be >= 1");
    if (cfg_.interleave_reps < 1)
      throw std::invalid_argument("HatEncoder: interleave_reps must be >= 1");
    Rng rng(seed);
    const int d = cfg_.model_dim;
    summary_ = params_.add("summary", glorot_uniform<Real>(rng, 1, d));
    pos_ = params_.add("pos", Tensor<Real>::zeros({cfg_.segment + 1, d}));
    const int max_segments = (cfg_.maxlen + cfg_.segment - 1) / cfg_.segment;
    cwe_pos_ = params_.add("cwe_pos", Tensor<Real>::zeros({max_segments, d}));
    if (cfg_.use_geo) geo_proj_ = Dense<Real>::init(params_, "geo", rng, cfg_.geo_dim, d);
    EncoderBlockConfig bc{d, cfg_.heads, cfg_.ff_multiplier};
    for (int r = 0; r < cfg_.interleave_reps; ++r) {
      for (int b = 0; b < cfg_.swe_blocks; ++b)
        swe_.push_back(EncoderBlock<Real>::init(
            params_, "swe." + std::to_string(r) + "." + std::to_string(b), rng, bc));
      for (int b = 0; b < cfg_.cwe_blocks; ++b)
        cwe_.push_back(EncoderBlock<Real>::init(
            params_, "cwe." + std::to_string(r) + "." + std::to_string(b), rng, bc));
    }
    head_ = Dense<Real>::init(params_, "head", rng, d, cfg_.num_classes);
  }

  const HatConfig& config() const { return cfg_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }
  std::size_t param_count() const { return params_.count_values(); }

  Tensor<Real> forward(const Tensor<Real>& features, const Tensor<Real>& geo) const {
    const int n = features.dim(0), d = cfg_.model_dim, k = cfg_.segment;
    if (features.dim(1) != d)
      throw ShapeError("HatEncoder: features " + shape_str(features.shape()) + " vs model_dim " +
                       std::to_string(d));
    if (cfg_.use_geo && (!geo.defined() || geo.dim(0) != n || geo.dim(1) != cfg_.geo_dim))
      throw ShapeError("HatEncoder: geometric features must be [N," + std::to_string(cfg_.geo_dim) +
                       "]");
    const auto chunks = split_long_documents(n, k);
    const int num_segments = static_cast<int>(chunks.size());
    if (num_segments > cwe_pos_.dim(0))
      throw ShapeError("HatEncoder: " + std::to_string(n) + " rows exceed maxlen " +
                       std::to_string(cfg_.maxlen));

    Tensor<Real> content = features;
    if (cfg_.use_geo) content = add(content, geo_proj_(geo));

    // Segment s holds its summary token at row 0 and members at rows 1..k.
    std::vector<Tensor<Real>> segs(static_cast<std::size_t>(num_segments));
    std::vector<Tensor<Real>> masks(static_cast<std::size_t>(num_segments));
    for (int s = 0; s < num_segments; ++s) {
      const SeqChunk& c = chunks[static_cast<std::size_t>(s)];
      Tensor<Real> rows = slice(content, 0, c.start, c.len);
      if (c.len < k) rows = concat(rows, Tensor<Real>::zeros({k - c.len, d}), 0);
      Tensor<Real> summary = add(summary_, slice(cwe_pos_, 0, s, 1));
      Tensor<Real> x = add(concat(summary, rows, 0), pos_);
      segs[static_cast<std::size_t>(s)] = x;
      masks[static_cast<std::size_t>(s)] = SwTransformer<Real>::window_mask(k + 1, c.len + 1);
    }

    const Tensor<Real> no_mask;  // CWE attends over all summaries
    Tensor<Real> ones_col = Tensor<Real>::full({k + 1, 1}, Real(1));
    for (int r = 0; r < cfg_.interleave_reps; ++r) {
      for (int b = 0; b < cfg_.swe_blocks; ++b)
        for (int s = 0; s < num_segments; ++s)
          segs[static_cast<std::size_t>(s)] =
              swe_[static_cast<std::size_t>(r * cfg_.swe_blocks + b)].forward(
                  segs[static_cast<std::size_t>(s)], masks[static_cast<std::size_t>(s)]);

      std::vector<Tensor<Real>> summary_rows;
      summary_rows.reserve(static_cast<std::size_t>(num_segments));
      for (int s = 0; s < num_segments; ++s)
        summary_rows.push_back(slice(segs[static_cast<std::size_t>(s)], 0, 0, 1));
      Tensor<Real> summaries =
          num_segments == 1 ? summary_rows[0] : concat(summary_rows, 0);  // [S, d]
      Tensor<Real> updated = summaries;
      for (int b = 0; b < cfg_.cwe_blocks; ++b)
        updated = cwe_[static_cast<std::size_t>(r * cfg_.cwe_blocks + b)].forward(updated, no_mask);
      Tensor<Real> delta = sub(updated, summaries);
      for (int s = 0; s < num_segments; ++s) {
        Tensor<Real> delta_s = slice(delta, 0, s, 1);             // [1, d]
        Tensor<Real> broadcast = matmul(ones_col, delta_s);      // [k+1, d]
        segs[static_cast<std::size_t>(s)] = add(segs[static_cast<std::size_t>(s)], broadcast);
      }
    }

    std::vector<Tensor<Real>> member_states;
    member_states.reserve(static_cast<std::size_t>(num_segments));
    for (int s = 0; s < num_segments; ++s)
      member_states.push_back(
          slice(segs[static_cast<std::size_t>(s)], 0, 1, chunks[static_cast<std::size_t>(s)].len));
    Tensor<Real> states = member_states.size() == 1 ? member_states[0] : concat(member_states, 0);
    return head_(states);
  }

  std::vector<int> predict(const Tensor<Real>& features, const Tensor<Real>& geo) const {
    Tensor<Real> logits = forward(features, geo);
    std::vector<int> out(static_cast<std::size_t>(logits.dim(0)));
    for (int i = 0; i < logits.dim(0); ++i) {
      int arg = 0;
      for (int c = 1; c < cfg_.num_classes; ++c)
        if (logits.at(i, c) > logits.at(i, arg)) arg = c;
      out[static_cast<std::size_t>(i)] = arg;
    }
    return out;
  }

private:
  HatConfig cfg_;
  ParamSet<Real> params_;
  Tensor<Real> summary_, pos_, cwe_pos_;
  Dense<Real> geo_proj_;
  std::vector<EncoderBlock<Real>> swe_, cwe_;
  Dense<Real> head_;
};

}  // namespace paraseq
