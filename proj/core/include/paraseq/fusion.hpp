#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/rng.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

enum class FusionMechanism {
  Concat,             // raw feature concatenation
  DockConcat,         // docking layers then concatenation
  Bilinear,           // pairwise low-rank bilinear on raw features
  DockBilinearGated,  // docked pairwise bilinear with sigmoid gate
  DockGmu,            // docked gated multimodal unit
  DockAttention,      // docked cross-modal attention (single head)
  DockMultiHead,      // docked cross-modal attention, per-head subspaces
  EmbraceBalanced,    // docked, stochastic coordinate assembly, probs 1/3 each
  EmbraceWeighted,    // same with probs proportional to raw modality dims
};

const char* fusion_mechanism_name(FusionMechanism m);
FusionMechanism fusion_mechanism_from_name(const std::string& name);

struct ModalDims {
  int text = kTextDim;
  int vision = kVisionDim;
  int font = kFontDim;
  int total() const { return text + vision + font; }
};

struct FusionConfig {
  FusionMechanism mechanism = FusionMechanism::DockAttention;
  ModalDims dims;
  int joint_dim = kJointDim;
  int heads = 8;            // DockMultiHead only
  int bilinear_rank = 64;   // low-rank factor size for bilinear mechanisms
  std::vector<int> stacked_dims;  // dense fusion layers applied after the mechanism
  int num_classes = kNumLabels;

  /// Width of the mechanism output before any stacked fusion layers.
  int mechanism_dim() const {
    switch (mechanism) {
      case FusionMechanism::Concat: return dims.total();
      case FusionMechanism::DockConcat: return 3 * joint_dim;
      default: return joint_dim;
    }
  }
  /// Advertised joint-embedding width (after stacked layers, if any).
  int output_dim() const { return stacked_dims.empty() ? mechanism_dim() : stacked_dims.back(); }
};

/// Late fusion over frozen per-paragraph modality features: the model owns the
/// docking layers, the fusion mechanism, optional stacked dense layers, and
/// the 4-class head. Backbone features arrive as plain inputs and are never
/// mutated.
template <class Real>
class FusionModel {
public:
  enum class EmbraceMode { Expectation, Sampled };

  struct Output {
    Tensor<Real> joint;   // [B, output_dim]
    Tensor<Real> logits;  // [B, num_classes]
  };

  FusionModel(FusionConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    const int j = cfg_.joint_dim;
    const bool docked = cfg_.mechanism != FusionMechanism::Concat &&
                        cfg_.mechanism != FusionMechanism::Bilinear;
    if (docked) {
      dock_[0] = Dense<Real>::init(params_, "dock.text", rng, cfg_.dims.text, j);
      dock_[1] = Dense<Real>::init(params_, "dock.vision", rng, cfg_.dims.vision, j);
      dock_[2] = Dense<Real>::init(params_, "dock.font", rng, cfg_.dims.font, j);
    }
    switch (cfg_.mechanism) {
      case FusionMechanism::Concat:
      case FusionMechanism::DockConcat:
      case FusionMechanism::EmbraceBalanced:
      case FusionMechanism::EmbraceWeighted:
        break;
      case FusionMechanism::Bilinear:
        init_bilinear(rng, cfg_.dims.text, cfg_.dims.vision, cfg_.dims.font, /*gated=*/false);
        break;
      case FusionMechanism::DockBilinearGated:
        init_bilinear(rng, j, j, j, /*gated=*/true);
        break;
      case FusionMechanism::DockGmu:
        for (int m = 0; m < 3; ++m)
          gmu_h_[static_cast<std::size_t>(m)] =
              Dense<Real>::init(params_, std::string("gmu.h.") + kModalityNames[m], rng, j, j);
        gmu_gate_ = Dense<Real>::init(params_, "gmu.gate", rng, 3 * j, 3 * j);
        break;
      case FusionMechanism::DockAttention:
      case FusionMechanism::DockMultiHead: {
        if (cfg_.mechanism == FusionMechanism::DockAttention) cfg_.heads = 1;
        if (cfg_.heads < 1 || j % cfg_.heads != 0)
          throw ShapeError("fusion: heads " + std::to_string(cfg_.heads) +
                           " must divide joint dim " + std::to_string(j));
        for (int m = 0; m < 3; ++m) {
          const std::string mn = kModalityNames[m];
          attn_q_[static_cast<std::size_t>(m)] = Dense<Real>::init(params_, "attn.q." + mn, rng, j, j);
          attn_k_[static_cast<std::size_t>(m)] = Dense<Real>::init(params_, "attn.k." + mn, rng, j, j);
          attn_v_[static_cast<std::size_t>(m)] = Dense<Real>::init(params_, "attn.v." + mn, rng, j, j);
        }
        // Head-mixing projection exists only in the genuinely multi-head
        // configuration; at heads=1 the model coincides with DockAttention.
        if (cfg_.heads > 1) attn_headmix_ = Dense<Real>::init(params_, "attn.headmix", rng, j, j);
        attn_out_ = Dense<Real>::init(params_, "attn.out", rng, j, j);
        break;
      }
    }
    int width = cfg_.mechanism_dim();
    for (std::size_t i = 0; i < cfg_.stacked_dims.size(); ++i) {
      stacked_.push_back(Dense<Real>::init(params_, "stacked." + std::to_string(i), rng, width,
                                           cfg_.stacked_dims[i]));
      width = cfg_.stacked_dims[i];
    }
    head_ = Dense<Real>::init(params_, "head", rng, width, cfg_.num_classes);
  }

  const FusionConfig& config() const { return cfg_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }
  std::size_t param_count() const { return params_.count_values(); }

  /// Per-modality affine + ReLU to the joint dimension (docking layers).
  std::array<Tensor<Real>, 3> dock(const Tensor<Real>& text, const Tensor<Real>& vision,
                                   const Tensor<Real>& font) const {
    return {relu(dock_[0](text)), relu(dock_[1](vision)), relu(dock_[2](font))};
  }

  static Tensor<Real> fuse_concat(const Tensor<Real>& text, const Tensor<Real>& vision,
                                  const Tensor<Real>& font) {
    return concat(concat(text, vision, 1), font, 1);
  }

  Tensor<Real> fuse_gmu(const std::array<Tensor<Real>, 3>& docked) const {
    const int b = docked[0].dim(0), j = cfg_.joint_dim;
    std::array<Tensor<Real>, 3> h;
    for (int m = 0; m < 3; ++m)
      h[static_cast<std::size_t>(m)] = tanh(gmu_h_[static_cast<std::size_t>(m)](docked[static_cast<std::size_t>(m)]));
    Tensor<Real> gate_in = fuse_concat(docked[0], docked[1], docked[2]);
    Tensor<Real> logits = gmu_gate_(gate_in);  // [B, 3j]
    // per-coordinate softmax over the three modalities
    Tensor<Real> stacked = concat(
        {reshape(slice(logits, 1, 0, j), {1, b * j}), reshape(slice(logits, 1, j, j), {1, b * j}),
         reshape(slice(logits, 1, 2 * j, j), {1, b * j})},
        0);                                   // [3, B*j]
    Tensor<Real> z = softmax(stacked, 0);     // columns sum to 1
    Tensor<Real> out;
    for (int m = 0; m < 3; ++m) {
      Tensor<Real> zm = reshape(slice(z, 0, m, 1), {b, j});
      Tensor<Real> term = mul(zm, h[static_cast<std::size_t>(m)]);
      out = m == 0 ? term : add(out, term);
    }
    return out;
  }

  /// Per-coordinate gate weights [3, B*j]; columns form a simplex.
  Tensor<Real> gmu_gates(const std::array<Tensor<Real>, 3>& docked) const {
    const int b = docked[0].dim(0), j = cfg_.joint_dim;
    Tensor<Real> logits = gmu_gate_(fuse_concat(docked[0], docked[1], docked[2]));
    Tensor<Real> stacked = concat(
        {reshape(slice(logits, 1, 0, j), {1, b * j}), reshape(slice(logits, 1, j, j), {1, b * j}),
         reshape(slice(logits, 1, 2 * j, j), {1, b * j})},
        0);
    return softmax(stacked, 0);
  }

  Tensor<Real> fuse_bilinear(const std::array<Tensor<Real>, 3>& inputs) const {
    std::array<Tensor<Real>, 3> z;
    for (int p = 0; p < 3; ++p) {
      const auto& [ia, ib] = kBilinearPairs[p];
      const std::string pn = "bilinear." + std::to_string(p);
      Tensor<Real> hx = matmul(inputs[static_cast<std::size_t>(ia)], params_.get(pn + ".u"));
      Tensor<Real> hy = matmul(inputs[static_cast<std::size_t>(ib)], params_.get(pn + ".v"));
      Tensor<Real> h = mul(hx, hy);  // [B, r]
      if (bilinear_gated_) {
        Tensor<Real> g = sigmoid(add_rowwise(
            matmul(inputs[static_cast<std::size_t>(ib)], params_.get(pn + ".wg")), params_.get(pn + ".bg")));
        h = mul(h, g);
      }
      z[static_cast<std::size_t>(p)] =
          add_rowwise(matmul(h, params_.get(pn + ".p")), params_.get(pn + ".bp"));
    }
    return bilinear_combine_(fuse_concat(z[0], z[1], z[2]));
  }

  /// EmbraceNet: each output coordinate is copied from exactly one modality
  /// (Sampled) or from the probability-weighted mixture (Expectation).
  Tensor<Real> fuse_embrace(const std::array<Tensor<Real>, 3>& docked,
                            const std::array<double, 3>& probs, EmbraceMode mode,
                            std::uint64_t sample_seed) const {
    const double psum = probs[0] + probs[1] + probs[2];
    if (!(std::abs(psum - 1.0) < 1e-9) || probs[0] < 0 || probs[1] < 0 || probs[2] < 0)
      throw std::invalid_argument("fuse_embrace: probs must form a 3-simplex");
    const int b = docked[0].dim(0), j = docked[0].dim(1);
    if (mode == EmbraceMode::Expectation) {
      Tensor<Real> out = scale(docked[0], static_cast<Real>(probs[0]));
      out = add(out, scale(docked[1], static_cast<Real>(probs[1])));
      return add(out, scale(docked[2], static_cast<Real>(probs[2])));
    }
    Rng rng(sample_seed);
    std::array<std::vector<Real>, 3> masks;
    for (auto& m : masks) m.assign(static_cast<std::size_t>(b) * j, Real(0));
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < j; ++c) {
        const std::size_t pick = rng.categorical(std::span<const double>(probs.data(), 3));
        masks[pick][static_cast<std::size_t>(r) * j + c] = Real(1);
      }
    Tensor<Real> out;
    for (int m = 0; m < 3; ++m) {
      Tensor<Real> term =
          mul(Tensor<Real>::from_data({b, j}, std::move(masks[static_cast<std::size_t>(m)])),
              docked[static_cast<std::size_t>(m)]);
      out = m == 0 ? term : add(out, term);
    }
    return out;
  }

  std::array<double, 3> embrace_probs() const {
    if (cfg_.mechanism == FusionMechanism::EmbraceWeighted) {
      const double total = cfg_.dims.total();
      return {cfg_.dims.text / total, cfg_.dims.vision / total, cfg_.dims.font / total};
    }
    return {1.0 / 3, 1.0 / 3, 1.0 / 3};
  }

  /// Each modality queries the other two; scaled dot-product weights over the
  /// two keys, attended values summed across modalities, then affine + ReLU.
  /// With heads > 1 the projections are consumed in per-head subspaces and a
  /// head-mixing affine follows the concatenation.
  Tensor<Real> fuse_cross_attention(const std::array<Tensor<Real>, 3>& docked) const {
    const int j = cfg_.joint_dim;
    const int heads = cfg_.heads;
    const int hd = j / heads;
    std::array<Tensor<Real>, 3> q, k, v;
    for (int m = 0; m < 3; ++m) {
      q[static_cast<std::size_t>(m)] = attn_q_[static_cast<std::size_t>(m)](docked[static_cast<std::size_t>(m)]);
      k[static_cast<std::size_t>(m)] = attn_k_[static_cast<std::size_t>(m)](docked[static_cast<std::size_t>(m)]);
      v[static_cast<std::size_t>(m)] = attn_v_[static_cast<std::size_t>(m)](docked[static_cast<std::size_t>(m)]);
    }
    const Real inv_scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
    Tensor<Real> summed;
    for (int m = 0; m < 3; ++m) {
      const int o1 = (m + 1) % 3, o2 = (m + 2) % 3;
      std::vector<Tensor<Real>> head_outs;
      for (int h = 0; h < heads; ++h) {
        Tensor<Real> qh = slice(q[static_cast<std::size_t>(m)], 1, h * hd, hd);
        Tensor<Real> k1 = slice(k[static_cast<std::size_t>(o1)], 1, h * hd, hd);
        Tensor<Real> k2 = slice(k[static_cast<std::size_t>(o2)], 1, h * hd, hd);
        Tensor<Real> s1 = scale(sum_rows(mul(qh, k1)), inv_scale);  // [B,1]
        Tensor<Real> s2 = scale(sum_rows(mul(qh, k2)), inv_scale);
        Tensor<Real> w = softmax(concat(s1, s2, 1), 1);             // [B,2]
        Tensor<Real> att = add(rowscale(slice(v[static_cast<std::size_t>(o1)], 1, h * hd, hd), slice(w, 1, 0, 1)),
                               rowscale(slice(v[static_cast<std::size_t>(o2)], 1, h * hd, hd), slice(w, 1, 1, 1)));
        head_outs.push_back(att);
      }
      Tensor<Real> att_m = heads == 1 ? head_outs[0] : concat(head_outs, 1);
      summed = m == 0 ? att_m : add(summed, att_m);
    }
    if (cfg_.heads > 1) summed = attn_headmix_(summed);
    return relu(attn_out_(summed));
  }

  /// Attention weights of modality `m` over the other two, one row per batch
  /// element and head: [B*heads, 2].
  Tensor<Real> cross_attention_weights(const std::array<Tensor<Real>, 3>& docked, int m) const {
    const int j = cfg_.joint_dim;
    const int heads = cfg_.heads;
    const int hd = j / heads;
    const int o1 = (m + 1) % 3, o2 = (m + 2) % 3;
    Tensor<Real> qm = attn_q_[static_cast<std::size_t>(m)](docked[static_cast<std::size_t>(m)]);
    Tensor<Real> k1 = attn_k_[static_cast<std::size_t>(o1)](docked[static_cast<std::size_t>(o1)]);
    Tensor<Real> k2 = attn_k_[static_cast<std::size_t>(o2)](docked[static_cast<std::size_t>(o2)]);
    const Real inv_scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(hd)));
    std::vector<Tensor<Real>> rows;
    for (int h = 0; h < heads; ++h) {
      Tensor<Real> qh = slice(qm, 1, h * hd, hd);
      Tensor<Real> s1 = scale(sum_rows(mul(qh, slice(k1, 1, h * hd, hd))), inv_scale);
      Tensor<Real> s2 = scale(sum_rows(mul(qh, slice(k2, 1, h * hd, hd))), inv_scale);
      rows.push_back(softmax(concat(s1, s2, 1), 1));
    }
    return concat(rows, 0);
  }

  Tensor<Real> classify_head(const Tensor<Real>& joint) const { return head_(joint); }

  Output forward(const Tensor<Real>& text, const Tensor<Real>& vision, const Tensor<Real>& font,
                 EmbraceMode embrace_mode = EmbraceMode::Expectation,
                 std::uint64_t sample_seed = 0) const {
    Tensor<Real> fused;
    switch (cfg_.mechanism) {
      case FusionMechanism::Concat:
        fused = fuse_concat(text, vision, font);
        break;
      case FusionMechanism::Bilinear:
        fused = fuse_bilinear({text, vision, font});
        break;
      case FusionMechanism::DockConcat: {
        auto d = dock(text, vision, font);
        fused = fuse_concat(d[0], d[1], d[2]);
        break;
      }
      case FusionMechanism::DockBilinearGated:
        fused = fuse_bilinear(dock(text, vision, font));
        break;
      case FusionMechanism::DockGmu:
        fused = fuse_gmu(dock(text, vision, font));
        break;
      case FusionMechanism::DockAttention:
      case FusionMechanism::DockMultiHead:
        fused = fuse_cross_attention(dock(text, vision, font));
        break;
      case FusionMechanism::EmbraceBalanced:
      case FusionMechanism::EmbraceWeighted:
        fused = fuse_embrace(dock(text, vision, font), embrace_probs(), embrace_mode, sample_seed);
        break;
    }
    for (const auto& layer : stacked_) fused = relu(layer(fused));
    return {fused, head_(fused)};
  }

private:
  static constexpr const char* kModalityNames[3] = {"text", "vision", "font"};
  // (text,vision), (vision,font), (text,font)
  static constexpr std::pair<int, int> kBilinearPairs[3] = {{0, 1}, {1, 2}, {0, 2}};

  void init_bilinear(Rng& rng, int dt, int dv, int df, bool gated) {
    bilinear_gated_ = gated;
    const int dims[3] = {dt, dv, df};
    const int r = cfg_.bilinear_rank, j = cfg_.joint_dim;
    for (int p = 0; p < 3; ++p) {
      const auto& [ia, ib] = kBilinearPairs[p];
      const std::string pn = "bilinear." + std::to_string(p);
      params_.add(pn + ".u", glorot_uniform<Real>(rng, dims[ia], r));
      params_.add(pn + ".v", glorot_uniform<Real>(rng, dims[ib], r));
      params_.add(pn + ".p", glorot_uniform<Real>(rng, r, j));
      params_.add(pn + ".bp", Tensor<Real>::zeros({j}));
      if (gated) {
        params_.add(pn + ".wg", glorot_uniform<Real>(rng, dims[ib], r));
        params_.add(pn + ".bg", Tensor<Real>::zeros({r}));
      }
    }
    bilinear_combine_ = Dense<Real>::init(params_, "bilinear.combine", rng, 3 * j, j);
  }

  FusionConfig cfg_;
  ParamSet<Real> params_;
  std::array<Dense<Real>, 3> dock_;
  std::array<Dense<Real>, 3> gmu_h_;
  Dense<Real> gmu_gate_;
  bool bilinear_gated_ = false;
  Dense<Real> bilinear_combine_;
  std::array<Dense<Real>, 3> attn_q_, attn_k_, attn_v_;
  Dense<Real> attn_headmix_;
  Dense<Real> attn_out_;
  std::vector<Dense<Real>> stacked_;
  Dense<Real> head_;
};

inline const char* fusion_mechanism_name(FusionMechanism m) {
  switch (m) {
    case FusionMechanism::Concat: return "concat";
    case FusionMechanism::DockConcat: return "dock-concat";
    case FusionMechanism::Bilinear: return "bilinear";
    case FusionMechanism::DockBilinearGated: return "bilinear-gated";
    case FusionMechanism::DockGmu: return "gmu";
    case FusionMechanism::DockAttention: return "xattn";
    case FusionMechanism::DockMultiHead: return "multihead";
    case FusionMechanism::EmbraceBalanced: return "embrace-balanced";
    case FusionMechanism::EmbraceWeighted: return "embrace-weighted";
  }
  return "?";
}

inline FusionMechanism fusion_mechanism_from_name(const std::string& name) {
  for (FusionMechanism m :
       {FusionMechanism::Concat, FusionMechanism::DockConcat, FusionMechanism::Bilinear,
        FusionMechanism::DockBilinearGated, FusionMechanism::DockGmu, FusionMechanism::DockAttention,
        FusionMechanism::DockMultiHead, FusionMechanism::EmbraceBalanced,
        FusionMechanism::EmbraceWeighted})
    if (name == fusion_mechanism_name(m)) return m;
  throw std::invalid_argument("unknown fusion mechanism '" + name + "'");
}

}  // namespace paraseq
