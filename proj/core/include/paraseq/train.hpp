#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "paraseq/baselines.hpp"
#include "paraseq/corpus.hpp"
#include "paraseq/crf.hpp"
#include "paraseq/font_encoder.hpp"
#include "paraseq/fusion.hpp"
#include "paraseq/hat.hpp"
#include "paraseq/linear_model.hpp"
#include "paraseq/metrics.hpp"
#include "paraseq/providers.hpp"
#include "paraseq/sequence.hpp"
#include "paraseq/sw_transformer.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

struct TrainConfig {
  int epochs = 30;
  int batch_docs = 8;  // documents per optimizer step
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int patience = 3;  // early stop on validation mean-F1 plateau
  std::vector<float> class_weights;
  bool use_geo = true;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double val_mean_f1 = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  Metrics best_val;
};

class TrainingDiverged : public std::runtime_error {
public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// Shared training loop: shuffled document batches per epoch, Adam updates,
/// NaN abort, early stop on validation mean-F1 plateau, best-epoch parameters
/// restored on exit. Deterministic in cfg.seed.
template <class Real, class DocLoss, class EvalFn>
TrainResult train_documents(ParamSet<Real>& params, std::size_t n_docs, DocLoss&& doc_loss,
                            EvalFn&& eval_val, const TrainConfig& cfg) {
  if (n_docs == 0) throw std::invalid_argument("train: no training documents");
  typename Adam<Real>::Config ac;
  ac.lr = static_cast<Real>(cfg.lr);
  Adam<Real> opt(ac);
  Rng base(cfg.seed);

  TrainResult result;
  double best_f1 = -1;
  std::vector<std::vector<Real>> best_snapshot;
  int stale = 0;

  std::vector<std::size_t> order(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) order[i] = i;

  const int batch = std::max(1, cfg.batch_docs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = base.fork(static_cast<std::uint64_t>(epoch) + 1);
    erng.shuffle(order);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < n_docs; at += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(n_docs, at + static_cast<std::size_t>(batch));
      Tape<Real> tape;
      Tensor<Real> acc;
      for (std::size_t i = at; i < end; ++i) {
        Tensor<Real> l = doc_loss(order[i]);
        acc = acc.defined() ? add(acc, l) : l;
      }
      Tensor<Real> loss = scale(acc, Real(1) / static_cast<Real>(end - at));
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        throw TrainingDiverged("loss is not finite at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batches) +
                               " (lr=" + std::to_string(cfg.lr) + ")");
      tape.backward(loss);
      opt.step(params);
      params.zero_grad();
      loss_sum += lv;
      ++batches;
    }

    Metrics val = eval_val();
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    st.val_accuracy = val.accuracy;
    st.val_mean_f1 = val.mean_f1;
    result.history.push_back(st);

    if (val.mean_f1 > best_f1) {
      best_f1 = val.mean_f1;
      best_snapshot = params.snapshot();
      result.best_epoch = epoch;
      result.best_val = val;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (!best_snapshot.empty()) params.restore(best_snapshot);
  return result;
}

// ---------------------------------------------------------------------------
// per-model glue

template <class Real>
std::vector<int> predict_font(const FontEncoder<Real>& model, const DocumentSequence& doc,
                              const FontVocab& vocab) {
  std::vector<int> out;
  out.reserve(doc.paragraphs.size());
  for (const auto& p : doc.paragraphs) {
    auto ids = encode_font_sequence(p, vocab, model.config().maxlen);
    auto fwd = model.forward(ids);
    int arg = 0;
    for (int c = 1; c < model.config().num_classes; ++c)
      if (fwd.logits.at(0, c) > fwd.logits.at(0, arg)) arg = c;
    out.push_back(arg);
  }
  return out;
}

template <class Real>
Metrics evaluate_font(const FontEncoder<Real>& model, const Corpus& val, const FontVocab& vocab) {
  std::vector<int> pred, gold;
  for (const auto& doc : val) {
    auto p = predict_font(model, doc, vocab);
    pred.insert(pred.end(), p.begin(), p.end());
    for (const auto& r : doc.paragraphs) gold.push_back(static_cast<int>(r.label));
  }
  return evaluate(pred, gold);
}

template <class Real>
TrainResult train_font_encoder(FontEncoder<Real>& model, const Corpus& train, const Corpus& val,
                               const FontVocab& vocab, const TrainConfig& cfg) {
  std::vector<Real> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  auto doc_loss = [&](std::size_t di) {
    const auto& doc = train[di];
    std::vector<Tensor<Real>> logits;
    std::vector<int> labels;
    for (const auto& p : doc.paragraphs) {
      auto ids = encode_font_sequence(p, vocab, model.config().maxlen);
      logits.push_back(model.forward(ids).logits);
      labels.push_back(static_cast<int>(p.label));
    }
    Tensor<Real> all = logits.size() == 1 ? logits[0] : concat(logits, 0);
    return cross_entropy(all, labels, weights);
  };
  auto eval_val = [&] { return evaluate_font(model, val, vocab); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

template <class Real>
struct FusionBatch {
  Tensor<Real> text, vision, font;
  std::vector<int> labels;
};

template <class Real>
FusionBatch<Real> fusion_batch(const DocumentSequence& doc) {
  EmbeddedProvider text("text"), vision("vision"), font("font");
  const int n = static_cast<int>(doc.paragraphs.size());
  std::vector<Real> tv, vv, fv;
  FusionBatch<Real> b;
  for (const auto& p : doc.paragraphs) {
    for (float x : text.features(p)) tv.push_back(static_cast<Real>(x));
    for (float x : vision.features(p)) vv.push_back(static_cast<Real>(x));
    for (float x : font.features(p)) fv.push_back(static_cast<Real>(x));
    b.labels.push_back(static_cast<int>(p.label));
  }
  b.text = Tensor<Real>::from_data({n, kTextDim}, std::move(tv));
  b.vision = Tensor<Real>::from_data({n, kVisionDim}, std::move(vv));
  b.font = Tensor<Real>::from_data({n, kFontDim}, std::move(fv));
  return b;
}

template <class Real>
Metrics evaluate_fusion(const FusionModel<Real>& model, const Corpus& val) {
  std::vector<int> pred, gold;
  for (const auto& doc : val) {
    auto b = fusion_batch<Real>(doc);
    auto out = model.forward(b.text, b.vision, b.font);  // expectation mode
    for (int i = 0; i < out.logits.dim(0); ++i) {
      int arg = 0;
      for (int c = 1; c < model.config().num_classes; ++c)
        if (out.logits.at(i, c) > out.logits.at(i, arg)) arg = c;
      pred.push_back(arg);
    }
    gold.insert(gold.end(), b.labels.begin(), b.labels.end());
  }
  return evaluate(pred, gold);
}

template <class Real>
TrainResult train_fusion(FusionModel<Real>& model, const Corpus& train, const Corpus& val,
                         const TrainConfig& cfg) {
  std::vector<Real> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  std::uint64_t step = 0;
  auto doc_loss = [&](std::size_t di) {
    const auto& doc = train[di];
    auto b = fusion_batch<Real>(doc);
    // EmbraceNet trains in sampled mode; other mechanisms ignore the flag.
    auto out = model.forward(b.text, b.vision, b.font,
                             FusionModel<Real>::EmbraceMode::Sampled,
                             cfg.seed ^ (0x5eedu + 0x9E3779B9u * step++));
    return cross_entropy(out.logits, b.labels, weights);
  };
  auto eval_val = [&] { return evaluate_fusion(model, val); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

// sequence heads over frozen per-paragraph features ------------------------

/// maxlen <= 0 evaluates whole documents (context-free heads and the CRF);
/// positive maxlen chunks long documents the way training does.
template <class Real, class Model>
Metrics evaluate_seq(const Model& model, const std::vector<DocFeatures<Real>>& docs,
                     const TrainConfig& cfg, int maxlen) {
  std::vector<int> pred, gold;
  for (const auto& df : docs) {
    const int n = df.content.dim(0);
    const auto chunks =
        maxlen > 0 ? split_long_documents(n, maxlen) : std::vector<SeqChunk>{{0, n}};
    for (const SeqChunk& ch : chunks) {
      std::vector<int> p;
      if constexpr (requires { model.predict(df.content, df.geo); }) {
        Tensor<Real> c = slice(df.content, 0, ch.start, ch.len);
        Tensor<Real> g = slice(df.geo, 0, ch.start, ch.len);
        p = model.predict(c, g);
      } else {
        Tensor<Real> x = with_geo_columns(df, cfg.use_geo);
        p = model.predict(slice(x, 0, ch.start, ch.len));
      }
      pred.insert(pred.end(), p.begin(), p.end());
    }
    gold.insert(gold.end(), df.labels.begin(), df.labels.end());
  }
  return evaluate(pred, gold);
}

template <class Real>
TrainResult train_linear(LinearModel<Real>& model, const std::vector<DocFeatures<Real>>& train,
                         const std::vector<DocFeatures<Real>>& val, const TrainConfig& cfg) {
  std::vector<Real> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  auto doc_loss = [&](std::size_t di) {
    const auto& df = train[di];
    return cross_entropy(model.forward(with_geo_columns(df, cfg.use_geo)), df.labels, weights);
  };
  auto eval_val = [&] { return evaluate_seq<Real>(model, val, cfg, 0); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

template <class Real>
TrainResult train_crf(CrfModel<Real>& model, const std::vector<DocFeatures<Real>>& train,
                      const std::vector<DocFeatures<Real>>& val, const TrainConfig& cfg) {
  auto doc_loss = [&](std::size_t di) {
    const auto& df = train[di];
    Tensor<Real> em = model.emissions(with_geo_columns(df, cfg.use_geo));
    return scale(model.nll(em, df.labels), Real(1) / static_cast<Real>(df.labels.size()));
  };
  auto eval_val = [&] { return evaluate_seq<Real>(model, val, cfg, 0); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

template <class Real>
TrainResult train_sw(SwTransformer<Real>& model, const std::vector<DocFeatures<Real>>& train,
                     const std::vector<DocFeatures<Real>>& val, const TrainConfig& cfg) {
  std::vector<Real> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  const int maxlen = model.config().maxlen;
  auto doc_loss = [&](std::size_t di) {
    const auto& df = train[di];
    const int n = df.content.dim(0);
    Tensor<Real> acc;
    for (const SeqChunk& ch : split_long_documents(n, maxlen)) {
      Tensor<Real> logits = model.forward(slice(df.content, 0, ch.start, ch.len),
                                          slice(df.geo, 0, ch.start, ch.len));
      std::vector<int> labels(df.labels.begin() + ch.start, df.labels.begin() + ch.start + ch.len);
      Tensor<Real> l = scale(cross_entropy(logits, labels, weights),
                             static_cast<Real>(ch.len) / static_cast<Real>(n));
      acc = acc.defined() ? add(acc, l) : l;
    }
    return acc;
  };
  auto eval_val = [&] { return evaluate_seq<Real>(model, val, cfg, maxlen); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

template <class Real>
TrainResult train_hat(HatEncoder<Real>& model, const std::vector<DocFeatures<Real>>& train,
                      const std::vector<DocFeatures<Real>>& val, const TrainConfig& cfg) {
  std::vector<Real> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  const int maxlen = model.config().maxlen;
  auto doc_loss = [&](std::size_t di) {
    const auto& df = train[di];
    const int n = df.content.dim(0);
    Tensor<Real> acc;
    for (const SeqChunk& ch : split_long_documents(n, maxlen)) {
      Tensor<Real> logits = model.forward(slice(df.content, 0, ch.start, ch.len),
                                          slice(df.geo, 0, ch.start, ch.len));
      std::vector<int> labels(df.labels.begin() + ch.start, df.labels.begin() + ch.start + ch.len);
      Tensor<Real> l = scale(cross_entropy(logits, labels, weights),
                             static_cast<Real>(ch.len) / static_cast<Real>(n));
      acc = acc.defined() ? add(acc, l) : l;
    }
    return acc;
  };
  auto eval_val = [&] { return evaluate_seq<Real>(model, val, cfg, maxlen); };
  return train_documents<Real>(model.params(), train.size(), doc_loss, eval_val, cfg);
}

}  // namespace paraseq
