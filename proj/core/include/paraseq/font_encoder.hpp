#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

enum class RecurrentCell { Lstm, Gru, BiLstm };

inline const char* cell_name(RecurrentCell c) {
  switch (c) {
    case RecurrentCell::Lstm: return "lstm";
    case RecurrentCell::Gru: return "gru";
    case RecurrentCell::BiLstm: return "bilstm";
  }
  return "?";
}

struct FontEncoderConfig {
  int vocab_size = 0;  // includes PAD/UNK
  int embed_dim = 32;
  RecurrentCell cell = RecurrentCell::Lstm;
  int hidden = 128;
  int maxlen = 1000;
  int num_classes = kNumLabels;

  /// Configuration at the scale of the reference setup: vocabulary of 4031
  /// fonts plus PAD/UNK and a 128-cell LSTM. embed_dim 364 puts the LSTM
  /// variant at 1,720,944 parameters (~1.72M).
  static FontEncoderConfig paper_scale() {
    FontEncoderConfig c;
    c.vocab_size = 4033;
    c.embed_dim = 364;
    c.cell = RecurrentCell::Lstm;
    c.hidden = 128;
    c.maxlen = 1000;
    return c;
  }
};

/// Font-sequence classifier: embedding -> recurrent encoder -> affine head.
/// PAD ids (0) pass the recurrent state through unchanged, which makes the
/// outputs invariant to extra left padding; the final state doubles as the
/// 128-dim font feature used by fusion and the sequence models.
template <class Real>
class FontEncoder {
public:
  struct Output {
    Tensor<Real> feature;  // [1, hidden]
    Tensor<Real> logits;   // [1, num_classes]
  };

  FontEncoder(FontEncoderConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.vocab_size < 2) throw std::invalid_argument("FontEncoder: vocab_size must be >= 2");
    Rng rng(seed);
    embedding_ = params_.add("embedding", glorot_uniform<Real>(rng, cfg_.vocab_size, cfg_.embed_dim));
    const bool bidir = cfg_.cell == RecurrentCell::BiLstm;
    init_direction("fwd", rng);
    if (bidir) {
      init_direction("bwd", rng);
      reduce_ = Dense<Real>::init(params_, "reduce", rng, 2 * cfg_.hidden, cfg_.hidden);
    }
    head_ = Dense<Real>::init(params_, "head", rng, cfg_.hidden, cfg_.num_classes);
  }

  const FontEncoderConfig& config() const { return cfg_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }
  std::size_t param_count() const { return params_.count_values(); }

  Output forward(const std::vector<int>& ids) const {
    for (int id : ids)
      if (id < 0 || id >= cfg_.vocab_size)
        throw std::out_of_range("FontEncoder: id " + std::to_string(id) + " outside [0," +
                                std::to_string(cfg_.vocab_size) + ")");
    // PAD steps are exact state pass-throughs, so the scan only needs the
    // non-PAD subsequence (in order).
    std::vector<int> active;
    active.reserve(ids.size());
    for (int id : ids)
      if (id != FontVocab::kPad) active.push_back(id);

    Tensor<Real> feature;
    if (cfg_.cell == RecurrentCell::BiLstm) {
      Tensor<Real> fwd = run_lstm("fwd", active, /*reverse=*/false);
      Tensor<Real> bwd = run_lstm("bwd", active, /*reverse=*/true);
      feature = reduce_(concat(fwd, bwd, 1));
    } else if (cfg_.cell == RecurrentCell::Lstm) {
      feature = run_lstm("fwd", active, false);
    } else {
      feature = run_gru("fwd", active, false);
    }
    return {feature, head_(feature)};
  }

private:
  void init_direction(const std::string& dir, Rng& rng) {
    const int h = cfg_.hidden, e = cfg_.embed_dim;
    const int gates = cfg_.cell == RecurrentCell::Gru ? 3 : 4;
    params_.add(dir + ".wx", glorot_uniform<Real>(rng, e, gates * h));
    params_.add(dir + ".wh", orthogonal<Real>(rng, h, gates * h));
    params_.add(dir + ".b", Tensor<Real>::zeros({gates * h}));
  }

  Tensor<Real> run_lstm(const std::string& dir, const std::vector<int>& active, bool reverse) const {
    const int h = cfg_.hidden;
    const auto& wx = params_.get(dir + ".wx");
    const auto& wh = params_.get(dir + ".wh");
    const auto& b = params_.get(dir + ".b");
    Tensor<Real> hs = Tensor<Real>::zeros({1, h});
    Tensor<Real> cs = Tensor<Real>::zeros({1, h});
    const std::size_t n = active.size();
    for (std::size_t s = 0; s < n; ++s) {
      const int id = reverse ? active[n - 1 - s] : active[s];
      Tensor<Real> x = gather_rows(embedding_, {id});
      Tensor<Real> z = add_rowwise(add(matmul(x, wx), matmul(hs, wh)), b);
      Tensor<Real> i = sigmoid(slice(z, 1, 0, h));
      Tensor<Real> f = sigmoid(slice(z, 1, h, h));
      Tensor<Real> g = tanh(slice(z, 1, 2 * h, h));
      Tensor<Real> o = sigmoid(slice(z, 1, 3 * h, h));
      cs = add(mul(f, cs), mul(i, g));
      hs = mul(o, tanh(cs));
    }
    return hs;
  }

  Tensor<Real> run_gru(const std::string& dir, const std::vector<int>& active, bool reverse) const {
    const int h = cfg_.hidden;
    const auto& wx = params_.get(dir + ".wx");
    const auto& wh = params_.get(dir + ".wh");
    const auto& b = params_.get(dir + ".b");
    Tensor<Real> hs = Tensor<Real>::zeros({1, h});
    const std::size_t n = active.size();
    for (std::size_t s = 0; s < n; ++s) {
      const int id = reverse ? active[n - 1 - s] : active[s];
      Tensor<Real> x = gather_rows(embedding_, {id});
      Tensor<Real> xz = add_rowwise(matmul(x, wx), b);  // [1, 3h]
      Tensor<Real> hz = matmul(hs, wh);                 // [1, 3h]
      Tensor<Real> r = sigmoid(add(slice(xz, 1, 0, h), slice(hz, 1, 0, h)));
      Tensor<Real> u = sigmoid(add(slice(xz, 1, h, h), slice(hz, 1, h, h)));
      Tensor<Real> cand = tanh(add(slice(xz, 1, 2 * h, h), mul(r, slice(hz, 1, 2 * h, h))));
      // h' = (1-u) * cand + u * h
      Tensor<Real> one = Tensor<Real>::full({1, h}, Real(1));
      hs = add(mul(sub(one, u), cand), mul(u, hs));
    }
    return hs;
  }

  FontEncoderConfig cfg_;
  ParamSet<Real> params_;
  Tensor<Real> embedding_;
  Dense<Real> reduce_;
  Dense<Real> head_;
};

}  // namespace paraseq
