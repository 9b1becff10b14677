#pragma once

#include <cstdint>

#include "paraseq/corpus.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

/// Per-paragraph affine classifier over frozen features; the sequential
/// models' context-free comparison point.
template <class Real>
class LinearModel {
public:
  LinearModel(int dim, int num_classes, std::uint64_t seed) : dim_(dim), classes_(num_classes) {
    Rng rng(seed);
    head_ = Dense<Real>::init(params_, "head", rng, dim, num_classes);
  }

  int dim() const { return dim_; }
  int num_classes() const { return classes_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }

  Tensor<Real> forward(const Tensor<Real>& x) const { return head_(x); }

  std::vector<int> predict(const Tensor<Real>& x) const {
    Tensor<Real> logits = forward(x);
    std::vector<int> out(static_cast<std::size_t>(logits.dim(0)));
    for (int i = 0; i < logits.dim(0); ++i) {
      int arg = 0;
      for (int c = 1; c < classes_; ++c)
        if (logits.at(i, c) > logits.at(i, arg)) arg = c;
      out[static_cast<std::size_t>(i)] = arg;
    }
    return out;
  }

private:
  int dim_, classes_;
  ParamSet<Real> params_;
  Dense<Real> head_;
};

}  // namespace paraseq
