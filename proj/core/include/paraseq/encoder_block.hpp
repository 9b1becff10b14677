#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "paraseq/flops.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

// Additive attention-mask value; exp(kMaskedScore - max) underflows to an
// exact 0 weight in both float and double.
inline constexpr double kMaskedScore = -1e30;

template <class Real>
struct AttnRecord {
  int head = 0;
  int rows = 0;
  std::vector<Real> weights;  // [rows, rows] softmax weights
};

template <class Real>
using AttnCapture = std::vector<AttnRecord<Real>>;

struct EncoderBlockConfig {
  int model_dim = 0;
  int heads = 1;
  double ff_multiplier = 1.5;

  int ff_dim() const {
    const int d = static_cast<int>(std::lround(ff_multiplier * model_dim));
    return d < 1 ? 1 : d;
  }
};

/// Pre-norm transformer encoder block: x + MHA(LN(x)), then + FF(LN(.)).
template <class Real>
struct EncoderBlock {
  EncoderBlockConfig cfg;
  Tensor<Real> ln1_g, ln1_b, ln2_g, ln2_b;
  Dense<Real> wq, wk, wv, wo, ff1, ff2;

  static EncoderBlock init(ParamSet<Real>& params, const std::string& prefix, Rng& rng,
                           EncoderBlockConfig cfg) {
    if (cfg.heads < 1 || cfg.model_dim % cfg.heads != 0)
      throw ShapeError("encoder block: heads " + std::to_string(cfg.heads) +
                       " must divide model_dim " + std::to_string(cfg.model_dim));
    EncoderBlock b;
    b.cfg = cfg;
    const int d = cfg.model_dim;
    b.ln1_g = params.add(prefix + ".ln1.g", Tensor<Real>::full({d}, Real(1)));
    b.ln1_b = params.add(prefix + ".ln1.b", Tensor<Real>::zeros({d}));
    b.wq = Dense<Real>::init(params, prefix + ".wq", rng, d, d);
    b.wk = Dense<Real>::init(params, prefix + ".wk", rng, d, d);
    b.wv = Dense<Real>::init(params, prefix + ".wv", rng, d, d);
    b.wo = Dense<Real>::init(params, prefix + ".wo", rng, d, d);
    b.ln2_g = params.add(prefix + ".ln2.g", Tensor<Real>::full({d}, Real(1)));
    b.ln2_b = params.add(prefix + ".ln2.b", Tensor<Real>::zeros({d}));
    b.ff1 = Dense<Real>::init(params, prefix + ".ff1", rng, d, cfg.ff_dim());
    b.ff2 = Dense<Real>::init(params, prefix + ".ff2", rng, cfg.ff_dim(), d);
    return b;
  }

  /// `mask` is an additive [T,T] score matrix (0 = allowed, kMaskedScore =
  /// blocked) or an undefined tensor for full attention.
  Tensor<Real> forward(const Tensor<Real>& x, const Tensor<Real>& mask,
                       AttnCapture<Real>* capture = nullptr) const {
    const int t = x.dim(0), d = cfg.model_dim, heads = cfg.heads;
    const int hd = d / heads;
    Tensor<Real> h = layer_norm_rows(x, ln1_g, ln1_b);
    Tensor<Real> q = wq(h), k = wk(h), v = wv(h);
    const Real inv_scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
    std::vector<Tensor<Real>> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int hh = 0; hh < heads; ++hh) {
      Tensor<Real> qh = slice(q, 1, hh * hd, hd);
      Tensor<Real> kh = slice(k, 1, hh * hd, hd);
      Tensor<Real> vh = slice(v, 1, hh * hd, hd);
      Tensor<Real> s = scale(matmul(qh, transpose(kh)), inv_scale);
      attnflops::add(static_cast<std::uint64_t>(t) * t * hd);
      if (mask.defined()) s = add(s, mask);
      Tensor<Real> w = softmax(s, 1);
      if (capture) {
        AttnRecord<Real> rec;
        rec.head = hh;
        rec.rows = t;
        rec.weights.assign(w.values().begin(), w.values().end());
        capture->push_back(std::move(rec));
      }
      head_outs.push_back(matmul(w, vh));
      attnflops::add(static_cast<std::uint64_t>(t) * t * hd);
    }
    Tensor<Real> att = heads == 1 ? head_outs[0] : concat(head_outs, 1);
    Tensor<Real> a = add(x, wo(att));
    Tensor<Real> f = ff2(relu(ff1(layer_norm_rows(a, ln2_g, ln2_b))));
    return add(a, f);
  }
};

}  // namespace paraseq
