#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "paraseq/checkpoint.hpp"
#include "paraseq/crf.hpp"
#include "paraseq/font_encoder.hpp"
#include "paraseq/fusion.hpp"
#include "paraseq/hat.hpp"
#include "paraseq/linear_model.hpp"
#include "paraseq/sw_transformer.hpp"

namespace paraseq {

using model_json = nlohmann::ordered_json;

/// Sequence-model sidecar: which frozen features the head consumes and how
/// layout enters.
struct SeqMeta {
  std::string features = "font";  // font | text | vision
  bool use_geo = true;
  bool extended_geo = false;
};

inline model_json seq_meta_json(const SeqMeta& m) {
  return {{"features", m.features}, {"use_geo", m.use_geo}, {"extended_geo", m.extended_geo}};
}

inline SeqMeta seq_meta_from_json(const model_json& j) {
  SeqMeta m;
  m.features = j.at("features").get<std::string>();
  m.use_geo = j.at("use_geo").get<bool>();
  m.extended_geo = j.at("extended_geo").get<bool>();
  return m;
}

// ---------------------------------------------------------------------------
// font encoder

inline void save_font_model(const std::string& path, const FontEncoder<float>& model,
                            const FontVocab& vocab) {
  const auto& c = model.config();
  model_json j{{"cell", cell_name(c.cell)},     {"vocab_size", c.vocab_size},
               {"embed_dim", c.embed_dim},      {"hidden", c.hidden},
               {"maxlen", c.maxlen},            {"num_classes", c.num_classes}};
  model_json entries = model_json::array();
  for (const auto& [name, decis] : vocab.entries()) entries.push_back({name, decis});
  j["vocab"] = std::move(entries);
  write_checkpoint(path, make_checkpoint("font", j.dump(), model.params()));
}

struct FontBundle {
  FontEncoderConfig config;
  FontVocab vocab;
  std::unique_ptr<FontEncoder<float>> model;
};

inline FontBundle load_font_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "font")
    throw CheckpointError("expected a font checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  FontBundle b;
  const std::string cell = j.at("cell").get<std::string>();
  b.config.cell = cell == "gru"      ? RecurrentCell::Gru
                  : cell == "bilstm" ? RecurrentCell::BiLstm
                                     : RecurrentCell::Lstm;
  b.config.vocab_size = j.at("vocab_size").get<int>();
  b.config.embed_dim = j.at("embed_dim").get<int>();
  b.config.hidden = j.at("hidden").get<int>();
  b.config.maxlen = j.at("maxlen").get<int>();
  b.config.num_classes = j.at("num_classes").get<int>();
  std::vector<std::pair<std::string, std::int64_t>> entries;
  for (const auto& e : j.at("vocab"))
    entries.emplace_back(e[0].get<std::string>(), e[1].get<std::int64_t>());
  b.vocab = FontVocab(std::move(entries));
  b.model = std::make_unique<FontEncoder<float>>(b.config, 0);
  fill_params(b.model->params(), ckpt);
  return b;
}

// ---------------------------------------------------------------------------
// fusion

inline void save_fusion_model(const std::string& path, const FusionModel<float>& model) {
  const auto& c = model.config();
  model_json j{{"mechanism", fusion_mechanism_name(c.mechanism)},
               {"dims", {c.dims.text, c.dims.vision, c.dims.font}},
               {"joint_dim", c.joint_dim},
               {"heads", c.heads},
               {"bilinear_rank", c.bilinear_rank},
               {"stacked_dims", c.stacked_dims},
               {"num_classes", c.num_classes}};
  write_checkpoint(path, make_checkpoint("fusion", j.dump(), model.params()));
}

inline std::unique_ptr<FusionModel<float>> load_fusion_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "fusion")
    throw CheckpointError("expected a fusion checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  FusionConfig c;
  c.mechanism = fusion_mechanism_from_name(j.at("mechanism").get<std::string>());
  c.dims.text = j.at("dims")[0].get<int>();
  c.dims.vision = j.at("dims")[1].get<int>();
  c.dims.font = j.at("dims")[2].get<int>();
  c.joint_dim = j.at("joint_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.bilinear_rank = j.at("bilinear_rank").get<int>();
  c.stacked_dims = j.at("stacked_dims").get<std::vector<int>>();
  c.num_classes = j.at("num_classes").get<int>();
  auto model = std::make_unique<FusionModel<float>>(c, 0);
  fill_params(model->params(), ckpt);
  return model;
}

// ---------------------------------------------------------------------------
// sequence heads

inline void save_linear_model(const std::string& path, const LinearModel<float>& model,
                              const SeqMeta& meta) {
  model_json j{{"dim", model.dim()}, {"num_classes", model.num_classes()}};
  j["meta"] = seq_meta_json(meta);
  write_checkpoint(path, make_checkpoint("linear", j.dump(), model.params()));
}

inline void save_crf_model(const std::string& path, const CrfModel<float>& model,
                           const SeqMeta& meta) {
  model_json j{{"feature_dim", model.config().feature_dim},
               {"num_classes", model.config().num_labels},
               {"meta", seq_meta_json(meta)}};
  write_checkpoint(path, make_checkpoint("crf", j.dump(), model.params()));
}

inline void save_sw_model(const std::string& path, const SwTransformer<float>& model,
                          const SeqMeta& meta) {
  const auto& c = model.config();
  model_json j{{"model_dim", c.model_dim},
               {"window", c.window},
               {"heads", c.heads},
               {"ff_multiplier", c.ff_multiplier},
               {"encoder_blocks", c.encoder_blocks},
               {"maxlen", c.maxlen},
               {"use_geo", c.use_geo},
               {"geo_dim", c.geo_dim},
               {"num_classes", c.num_classes},
               {"meta", seq_meta_json(meta)}};
  write_checkpoint(path, make_checkpoint("sw", j.dump(), model.params()));
}

inline void save_hat_model(const std::string& path, const HatEncoder<float>& model,
                           const SeqMeta& meta) {
  const auto& c = model.config();
  model_json j{{"model_dim", c.model_dim},
               {"segment", c.segment},
               {"heads", c.heads},
               {"ff_multiplier", c.ff_multiplier},
               {"interleave_reps", c.interleave_reps},
               {"swe_blocks", c.swe_blocks},
               {"cwe_blocks", c.cwe_blocks},
               {"maxlen", c.maxlen},
               {"use_geo", c.use_geo},
               {"geo_dim", c.geo_dim},
               {"num_classes", c.num_classes},
               {"meta", seq_meta_json(meta)}};
  write_checkpoint(path, make_checkpoint("hat", j.dump(), model.params()));
}

struct LinearBundle {
  std::unique_ptr<LinearModel<float>> model;
  SeqMeta meta;
};
struct CrfBundle {
  std::unique_ptr<CrfModel<float>> model;
  SeqMeta meta;
};
struct SwBundle {
  std::unique_ptr<SwTransformer<float>> model;
  SeqMeta meta;
};
struct HatBundle {
  std::unique_ptr<HatEncoder<float>> model;
  SeqMeta meta;
};

inline LinearBundle load_linear_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "linear")
    throw CheckpointError("expected a linear checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  LinearBundle b;
  b.meta = seq_meta_from_json(j.at("meta"));
  b.model = std::make_unique<LinearModel<float>>(j.at("dim").get<int>(),
                                                 j.at("num_classes").get<int>(), 0);
  fill_params(b.model->params(), ckpt);
  return b;
}

inline CrfBundle load_crf_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "crf")
    throw CheckpointError("expected a crf checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  CrfBundle b;
  b.meta = seq_meta_from_json(j.at("meta"));
  CrfConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.num_labels = j.at("num_classes").get<int>();
  b.model = std::make_unique<CrfModel<float>>(c, 0);
  fill_params(b.model->params(), ckpt);
  return b;
}

inline SwBundle load_sw_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "sw")
    throw CheckpointError("expected a sw checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  SwBundle b;
  b.meta = seq_meta_from_json(j.at("meta"));
  SwConfig c;
  c.model_dim = j.at("model_dim").get<int>();
  c.window = j.at("window").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_multiplier = j.at("ff_multiplier").get<double>();
  c.encoder_blocks = j.at("encoder_blocks").get<int>();
  c.maxlen = j.at("maxlen").get<int>();
  c.use_geo = j.at("use_geo").get<bool>();
  c.geo_dim = j.at("geo_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  b.model = std::make_unique<SwTransformer<float>>(c, 0);
  fill_params(b.model->params(), ckpt);
  return b;
}

inline HatBundle load_hat_model(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "hat")
    throw CheckpointError("expected a hat checkpoint, found '" + ckpt.model_kind + "'");
  const model_json j = model_json::parse(ckpt.config_json);
  HatBundle b;
  b.meta = seq_meta_from_json(j.at("meta"));
  HatConfig c;
  c.model_dim = j.at("model_dim").get<int>();
  c.segment = j.at("segment").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ff_multiplier = j.at("ff_multiplier").get<double>();
  c.interleave_reps = j.at("interleave_reps").get<int>();
  c.swe_blocks = j.at("swe_blocks").get<int>();
  c.cwe_blocks = j.at("cwe_blocks").get<int>();
  c.maxlen = j.at("maxlen").get<int>();
  c.use_geo = j.at("use_geo").get<bool>();
  c.geo_dim = j.at("geo_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  b.model = std::make_unique<HatEncoder<float>>(c, 0);
  fill_params(b.model->params(), ckpt);
  return b;
}

}  // namespace paraseq
