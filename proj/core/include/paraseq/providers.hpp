#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/font_encoder.hpp"
#include "paraseq/fusion.hpp"
#include "paraseq/vision.hpp"

namespace paraseq {

/// Frozen backbone contract: paragraph -> fixed-dim feature vector,
/// deterministic per input. Fusion and the sequence heads train on top of
/// these without ever mutating them.
class FeatureProvider {
public:
  virtual ~FeatureProvider() = default;
  virtual int dim() const = 0;
  virtual std::vector<float> features(const ParagraphRecord& record) const = 0;
};

/// Reads precomputed vectors from the record's embeddings map.
class EmbeddedProvider : public FeatureProvider {
public:
  explicit EmbeddedProvider(std::string modality) : modality_(std::move(modality)) {
    if (modality_ == "text")
      dim_ = kTextDim;
    else if (modality_ == "vision")
      dim_ = kVisionDim;
    else if (modality_ == "font")
      dim_ = kFontDim;
    else
      throw std::invalid_argument("EmbeddedProvider: unknown modality '" + modality_ + "'");
  }

  int dim() const override { return dim_; }

  std::vector<float> features(const ParagraphRecord& record) const override {
    auto it = record.embeddings.find(modality_);
    if (it == record.embeddings.end())
      throw std::runtime_error("record " + record.doc_id + "#" + std::to_string(record.para_index) +
                               " has no '" + modality_ + "' embedding");
    return it->second;
  }

private:
  std::string modality_;
  int dim_ = 0;
};

/// Vision features: embedded vector when present, otherwise computed from the
/// referenced bitmap through invert -> normalize -> stub projection.
class StubVisionProvider : public FeatureProvider {
public:
  explicit StubVisionProvider(std::string bitmap_dir = "") : dir_(std::move(bitmap_dir)) {}

  int dim() const override { return kVisionDim; }

  std::vector<float> features(const ParagraphRecord& record) const override {
    auto it = record.embeddings.find("vision");
    if (it != record.embeddings.end()) return it->second;
    if (!record.bitmap_ref)
      throw std::runtime_error("record " + record.doc_id + "#" + std::to_string(record.para_index) +
                               " has neither a vision embedding nor a bitmap_ref");
    std::filesystem::path p(*record.bitmap_ref);
    if (p.is_relative() && !dir_.empty()) p = std::filesystem::path(dir_) / p;
    GrayBitmap img = read_pgm(p.string());
    return stub_vision_embed(normalize_bitmap(invert_colors(img)));
  }

private:
  std::string dir_;
};

/// Font features from a trained encoder: embedded vector when present,
/// otherwise the encoder's final-state feature over the record's font runs.
class FontModelProvider : public FeatureProvider {
public:
  FontModelProvider(const FontEncoder<float>* model, const FontVocab* vocab)
      : model_(model), vocab_(vocab) {}

  int dim() const override { return model_->config().hidden; }

  std::vector<float> features(const ParagraphRecord& record) const override {
    auto it = record.embeddings.find("font");
    if (it != record.embeddings.end()) return it->second;
    const auto ids = encode_font_sequence(record, *vocab_, model_->config().maxlen);
    auto out = model_->forward(ids);
    return std::vector<float>(out.feature.values().begin(), out.feature.values().end());
  }

private:
  const FontEncoder<float>* model_;
  const FontVocab* vocab_;
};

/// Joint multimodal features from a trained fusion model over three
/// per-modality providers.
class FusionJointProvider : public FeatureProvider {
public:
  FusionJointProvider(const FusionModel<float>* model, std::shared_ptr<FeatureProvider> text,
                      std::shared_ptr<FeatureProvider> vision, std::shared_ptr<FeatureProvider> font)
      : model_(model), text_(std::move(text)), vision_(std::move(vision)), font_(std::move(font)) {}

  int dim() const override { return model_->config().output_dim(); }

  std::vector<float> features(const ParagraphRecord& record) const override {
    auto row = [](std::vector<float> v) {
      const int d = static_cast<int>(v.size());
      return Tensor<float>::from_data({1, d}, std::move(v));
    };
    auto out = model_->forward(row(text_->features(record)), row(vision_->features(record)),
                               row(font_->features(record)));
    return std::vector<float>(out.joint.values().begin(), out.joint.values().end());
  }

private:
  const FusionModel<float>* model_;
  std::shared_ptr<FeatureProvider> text_, vision_, font_;
};

/// Per-document sequence-model input: frozen content features, geometric
/// features (trailing layout columns), gold labels.
template <class Real>
struct DocFeatures {
  std::string doc_id;
  Tensor<Real> content;  // [N, D]
  Tensor<Real> geo;      // [N, 4] (or [N, 6] in extended mode)
  std::vector<int> labels;
};

template <class Real>
std::vector<DocFeatures<Real>> build_doc_features(const Corpus& corpus,
                                                  const FeatureProvider& provider,
                                                  bool extended_geo = false) {
  std::vector<DocFeatures<Real>> out;
  out.reserve(corpus.size());
  const int d = provider.dim();
  const int gd = extended_geo ? kGeomDimExtended : kGeomDim;
  for (const auto& doc : corpus) {
    DocFeatures<Real> df;
    df.doc_id = doc.doc_id;
    const int n = static_cast<int>(doc.paragraphs.size());
    std::vector<Real> content;
    content.reserve(static_cast<std::size_t>(n) * d);
    df.labels.reserve(static_cast<std::size_t>(n));
    for (const auto& p : doc.paragraphs) {
      const auto row = provider.features(p);
      if (static_cast<int>(row.size()) != d)
        throw std::runtime_error("provider returned " + std::to_string(row.size()) +
                                 " dims, expected " + std::to_string(d));
      for (float v : row) content.push_back(static_cast<Real>(v));
      df.labels.push_back(static_cast<int>(p.label));
    }
    df.content = Tensor<Real>::from_data({n, d}, std::move(content));
    const auto geo = geom_feature_matrix(doc, extended_geo);
    std::vector<Real> geo_r(geo.size());
    for (std::size_t i = 0; i < geo.size(); ++i) geo_r[i] = static_cast<Real>(geo[i]);
    df.geo = Tensor<Real>::from_data({n, gd}, std::move(geo_r));
    out.push_back(std::move(df));
  }
  return out;
}

/// Content with the geometric columns appended (the per-paragraph and CRF
/// heads consume layout this way; the transformers project-and-add instead).
template <class Real>
Tensor<Real> with_geo_columns(const DocFeatures<Real>& df, bool use_geo) {
  return use_geo ? concat(df.content, df.geo, 1) : df.content;
}

}  // namespace paraseq
