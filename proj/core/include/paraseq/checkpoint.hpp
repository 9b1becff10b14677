#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paraseq/nn.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

class CheckpointError : public std::runtime_error {
public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

/// Versioned parameter container: header (format version, model kind, config
/// JSON) followed by named little-endian float32 blobs with explicit shapes.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  std::string model_kind;
  std::string config_json;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<float>>>> tensors;

  const std::pair<Shape, std::vector<float>>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Captures a parameter set into a checkpoint (values stored as float32).
template <class Real>
Checkpoint make_checkpoint(const std::string& model_kind, const std::string& config_json,
                           const ParamSet<Real>& params) {
  Checkpoint c;
  c.model_kind = model_kind;
  c.config_json = config_json;
  for (const auto& [name, t] : params) {
    std::vector<float> vals(t.size());
    auto src = t.values();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(src[i]);
    c.tensors.emplace_back(name, std::make_pair(t.shape(), std::move(vals)));
  }
  return c;
}

/// Restores parameter values, validating that names and shapes line up with
/// the model built from the checkpoint's config.
template <class Real>
void fill_params(ParamSet<Real>& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.size())
    throw CheckpointError("checkpoint carries " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (auto& [name, t] : params) {
    const auto* stored = ckpt.find(name);
    if (!stored) throw CheckpointError("checkpoint is missing parameter '" + name + "'");
    if (stored->first != t.shape())
      throw CheckpointError("parameter '" + name + "': checkpoint shape " +
                            shape_str(stored->first) + " vs model shape " + shape_str(t.shape()));
    auto dst = t.values_mut();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Real>(stored->second[i]);
  }
}

}  // namespace paraseq
