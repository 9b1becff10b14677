#pragma once

#include <cstdint>
#include <vector>

#include "paraseq/corpus.hpp"
#include "paraseq/nn.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

struct CrfConfig {
  int feature_dim = 0;
  int num_labels = kNumLabels;
};

/// Linear-chain order-one CRF over per-paragraph features: affine emission
/// map plus transition/start/stop scores, globally normalized. Training goes
/// through nll() on the tape; decoding is plain Viterbi.
template <class Real>
class CrfModel {
public:
  CrfModel(CrfConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    emit_ = Dense<Real>::init(params_, "emit", rng, cfg_.feature_dim, cfg_.num_labels);
    params_.add("trans", Tensor<Real>::zeros({cfg_.num_labels, cfg_.num_labels}));
    params_.add("start", Tensor<Real>::zeros({cfg_.num_labels}));
    params_.add("stop", Tensor<Real>::zeros({cfg_.num_labels}));
  }

  const CrfConfig& config() const { return cfg_; }
  ParamSet<Real>& params() { return params_; }
  const ParamSet<Real>& params() const { return params_; }

  Tensor<Real> emissions(const Tensor<Real>& features) const { return emit_(features); }

  /// log sum over all label sequences of exp(score), by the forward
  /// recursion in log space.
  Tensor<Real> log_partition(const Tensor<Real>& emissions) const {
    const int n = emissions.dim(0), l = cfg_.num_labels;
    const auto& trans = params_.get("trans");
    Tensor<Real> start = reshape(params_.get("start"), {1, l});
    Tensor<Real> stop = reshape(params_.get("stop"), {1, l});
    Tensor<Real> alpha = add(slice(emissions, 0, 0, 1), start);  // [1, l]
    for (int t = 1; t < n; ++t) {
      // M[i][j] = alpha[i] + trans[i][j]; reduce over i in log space
      Tensor<Real> m = add_colwise(trans, reshape(alpha, {l, 1}));
      Tensor<Real> reduced = transpose(logsumexp_rows(transpose(m)));  // [1, l]
      alpha = add(reduced, slice(emissions, 0, t, 1));
    }
    return reshape(logsumexp_rows(add(alpha, stop)), {1});
  }

  /// Gold-path score via one-hot/count contractions, so gradients flow into
  /// emissions and every CRF parameter.
  Tensor<Real> path_score(const Tensor<Real>& emissions, const std::vector<int>& labels) const {
    const int n = emissions.dim(0), l = cfg_.num_labels;
    if (static_cast<int>(labels.size()) != n)
      throw ShapeError("path_score: " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(n) + " rows");
    for (int y : labels)
      if (y < 0 || y >= l) throw std::out_of_range("path_score: label out of range");

    std::vector<Real> onehot(static_cast<std::size_t>(n) * l, Real(0));
    for (int t = 0; t < n; ++t) onehot[static_cast<std::size_t>(t) * l + labels[static_cast<std::size_t>(t)]] = Real(1);
    std::vector<Real> trans_count(static_cast<std::size_t>(l) * l, Real(0));
    for (int t = 1; t < n; ++t)
      trans_count[static_cast<std::size_t>(labels[static_cast<std::size_t>(t - 1)]) * l + labels[static_cast<std::size_t>(t)]] += Real(1);
    std::vector<Real> first(static_cast<std::size_t>(l), Real(0)), last(static_cast<std::size_t>(l), Real(0));
    first[static_cast<std::size_t>(labels.front())] = Real(1);
    last[static_cast<std::size_t>(labels.back())] = Real(1);

    Tensor<Real> s = sum(mul(emissions, Tensor<Real>::from_data({n, l}, std::move(onehot))));
    s = add(s, sum(mul(params_.get("trans"), Tensor<Real>::from_data({l, l}, std::move(trans_count)))));
    s = add(s, sum(mul(params_.get("start"), Tensor<Real>::from_data({l}, std::move(first)))));
    s = add(s, sum(mul(params_.get("stop"), Tensor<Real>::from_data({l}, std::move(last)))));
    return s;
  }

  /// Negative log likelihood: log_partition - score(gold).
  Tensor<Real> nll(const Tensor<Real>& emissions, const std::vector<int>& labels) const {
    return sub(log_partition(emissions), path_score(emissions, labels));
  }

  /// Argmax label sequence; score ties resolve toward the lowest label index
  /// at every backpointer and at the final state.
  std::vector<int> viterbi(const Tensor<Real>& emissions) const {
    const int n = emissions.dim(0), l = cfg_.num_labels;
    if (n < 1) throw ShapeError("viterbi: empty sequence");
    auto em = emissions.values();
    auto tr = params_.get("trans").values();
    auto st = params_.get("start").values();
    auto sp = params_.get("stop").values();

    std::vector<double> delta(static_cast<std::size_t>(l));
    std::vector<std::vector<int>> back(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(l), 0));
    for (int j = 0; j < l; ++j) delta[static_cast<std::size_t>(j)] = static_cast<double>(st[static_cast<std::size_t>(j)]) + em[static_cast<std::size_t>(j)];
    for (int t = 1; t < n; ++t) {
      std::vector<double> next(static_cast<std::size_t>(l));
      for (int j = 0; j < l; ++j) {
        int arg = 0;
        double best = delta[0] + static_cast<double>(tr[static_cast<std::size_t>(j)]);
        for (int i = 1; i < l; ++i) {
          const double cand = delta[static_cast<std::size_t>(i)] + static_cast<double>(tr[static_cast<std::size_t>(i) * l + j]);
          if (cand > best) {
            best = cand;
            arg = i;
          }
        }
        next[static_cast<std::size_t>(j)] = best + em[static_cast<std::size_t>(t) * l + j];
        back[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = arg;
      }
      delta = std::move(next);
    }
    int arg = 0;
    double best = delta[0] + static_cast<double>(sp[0]);
    for (int j = 1; j < l; ++j) {
      const double cand = delta[static_cast<std::size_t>(j)] + static_cast<double>(sp[static_cast<std::size_t>(j)]);
      if (cand > best) {
        best = cand;
        arg = j;
      }
    }
    std::vector<int> path(static_cast<std::size_t>(n));
    path[static_cast<std::size_t>(n - 1)] = arg;
    for (int t = n - 1; t > 0; --t)
      path[static_cast<std::size_t>(t - 1)] = back[static_cast<std::size_t>(t)][static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
    return path;
  }

  std::vector<int> predict(const Tensor<Real>& features) const { return viterbi(emissions(features)); }

private:
  CrfConfig cfg_;
  ParamSet<Real> params_;
  Dense<Real> emit_;
};

}  // namespace paraseq
