#pragma once

#include <cstdint>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/encoder_block.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/sequence.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

struct SwConfig {
  int model_dim = kJointDim;
  int window = 16;
  int heads = 20;
  double ff_multiplier = 1.5;
  int encoder_blocks = 1;
  int maxlen = 1024;
  bool use_geo = true;
  int geo_dim = kGeomDim;
  int num_classes = kNumLabels;
};

template <class Real>
struct SwCapture {
  struct Window {
    int offset = 0;
    int real_rows = 0;
    AttnCapture<Real> attn;  // first encoder block
  };
  std::vector<Window> windows;
};

/// Sliding-window transformer over per-paragraph feature rows: the sequence
/// is cut into non-overlapping windows of `window` rows (the remainder window
/// is mask-padded, not dropped), each window runs through the encoder stack
/// with learned in-window position embeddings and projected geometric
/// features added to the content, and an affine head emits per-paragraph
/// logits. Attention never crosses a window boundary, which is what brings
/// the cost down to O(N * window).
template <class Real>
class SwTransformer {
public:
  SwTransformer(SwConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.window < 1) throw std::invalid_argument("SwTransformer: window must be >= 1");
    Rng rng(seed);
    // zero-init keeps untrained attention insensitive to position
    pos_ = params_.add("pos", Tensor<Real>::zeros({cfg_.window, cfg_.model_dim}));
    if (cfg_.use_geo)
      geo_proj_ = Dense<Real>::init(params_, "geo", rng, cfg_.geo_dim, cfg_.model_dim);
    EncoderBlockConfig bc{cfg_.model_dim, cfg_.heads, cfg_.ff_multiplier};
    for (int i = 0; i < cfg_.encoder_blocks; ++i)
      blocks_.push_back(EncoderBlock<Real>::init(params_, "enc." + std::to_string(i), rng, bc));
    head_ = Dense<Real>::init(params_, "head", rng, cfg_.model_dim, cfg_.num_classes);
  }

  const SwConfig& config() const { return cfg_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }
  std::size_t param_count() const { return params_.count_values(); }

  /// features: [N, model_dim]; geo: [N, geo_dim] (required iff use_geo).
  /// Returns per-paragraph logits [N, num_classes].
  Tensor<Real> forward(const Tensor<Real>& features, const Tensor<Real>& geo,
                       SwCapture<Real>* capture = nullptr) const {
    const int n = features.dim(0), d = cfg_.model_dim, k = cfg_.window;
    if (features.dim(1) != d)
      throw ShapeError("SwTransformer: features " + shape_str(features.shape()) +
                       " vs model_dim " + std::to_string(d));
    if (cfg_.use_geo && (!geo.defined() || geo.dim(0) != n || geo.dim(1) != cfg_.geo_dim))
      throw ShapeError("SwTransformer: geometric features must be [N," +
                       std::to_string(cfg_.geo_dim) + "]");

    Tensor<Real> content = features;
    if (cfg_.use_geo) content = add(content, geo_proj_(geo));

    std::vector<Tensor<Real>> window_logits;
    for (const SeqChunk& w : split_long_documents(n, k)) {
      Tensor<Real> x = slice(content, 0, w.start, w.len);
      if (w.len < k) x = concat(x, Tensor<Real>::zeros({k - w.len, d}), 0);
      x = add(x, pos_);
      Tensor<Real> mask = window_mask(k, w.len);
      AttnCapture<Real> attn;
      for (std::size_t b = 0; b < blocks_.size(); ++b)
        x = blocks_[b].forward(x, mask, (capture && b == 0) ? &attn : nullptr);
      if (capture) capture->windows.push_back({w.start, w.len, std::move(attn)});
      window_logits.push_back(head_(slice(x, 0, 0, w.len)));
    }
    return window_logits.size() == 1 ? window_logits[0] : concat(window_logits, 0);
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

  /// Additive mask: rows beyond `real` may only see themselves; real rows see
  /// every real row in the window.
  static Tensor<Real> window_mask(int k, int real) {
    std::vector<Real> m(static_cast<std::size_t>(k) * k, static_cast<Real>(kMaskedScore));
    for (int i = 0; i < k; ++i) {
      m[static_cast<std::size_t>(i) * k + i] = Real(0);
      if (i < real)
        for (int j = 0; j < real; ++j) m[static_cast<std::size_t>(i) * k + j] = Real(0);
    }
    return Tensor<Real>::from_data({k, k}, std::move(m));
  }

private:
  SwConfig cfg_;
  ParamSet<Real> params_;
  Tensor<Real> pos_;
  Dense<Real> geo_proj_;
  std::vector<EncoderBlock<Real>> blocks_;
  Dense<Real> head_;
};

}  // namespace paraseq
