#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paraseq/rng.hpp"
#include "paraseq/tensor.hpp"

namespace paraseq {

/// Glorot/Xavier uniform init for a dense map of shape [fan_in, fan_out].
template <class Real>
Tensor<Real> glorot_uniform(Rng& rng, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<Real> v(static_cast<std::size_t>(fan_in) * fan_out);
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-limit, limit));
  return Tensor<Real>::from_data({fan_in, fan_out}, std::move(v));
}

/// Orthogonal init for recurrent maps: QR of a Gaussian matrix via modified
/// Gram-Schmidt, computed in double. For rows > cols the columns are
/// orthonormal; the transpose case is handled by orthogonalizing the wide way.
template <class Real>
Tensor<Real> orthogonal(Rng& rng, int rows, int cols) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  std::vector<std::vector<double>> q(static_cast<std::size_t>(small),
                                     std::vector<double>(static_cast<std::size_t>(big)));
  for (auto& col : q)
    for (auto& x : col) x = rng.normal();
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (int k = 0; k < big; ++k) dot += q[i][static_cast<std::size_t>(k)] * q[j][static_cast<std::size_t>(k)];
      for (int k = 0; k < big; ++k) q[i][static_cast<std::size_t>(k)] -= dot * q[j][static_cast<std::size_t>(k)];
    }
    double norm = 0;
    for (int k = 0; k < big; ++k) norm += q[i][static_cast<std::size_t>(k)] * q[i][static_cast<std::size_t>(k)];
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("orthogonal: degenerate draw");
    for (int k = 0; k < big; ++k) q[i][static_cast<std::size_t>(k)] /= norm;
  }
  std::vector<Real> v(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double x = (rows >= cols) ? q[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)]
                                      : q[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      v[static_cast<std::size_t>(r) * cols + c] = static_cast<Real>(x);
    }
  return Tensor<Real>::from_data({rows, cols}, std::move(v));
}

/// Ordered, named collection of trainable tensors. Iteration order is
/// registration order, which keeps optimizers and checkpoints deterministic.
template <class Real>
class ParamSet {
public:
  Tensor<Real>& add(const std::string& name, Tensor<Real> t) {
    if (index_.count(name)) throw std::logic_error("ParamSet: duplicate parameter " + name);
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  Tensor<Real>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter " + name);
    return items_[it->second].second;
  }
  const Tensor<Real>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamSet: no parameter " + name);
    return items_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  std::size_t count_values() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  /// Deep value copy (used for best-epoch snapshots).
  std::vector<std::vector<Real>> snapshot() const {
    std::vector<std::vector<Real>> out;
    out.reserve(items_.size());
    for (const auto& [name, t] : items_)
      out.emplace_back(t.values().begin(), t.values().end());
    return out;
  }
  void restore(const std::vector<std::vector<Real>>& snap) {
    if (snap.size() != items_.size()) throw std::logic_error("ParamSet::restore: size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      auto dst = items_[i].second.values_mut();
      if (snap[i].size() != dst.size()) throw std::logic_error("ParamSet::restore: shape mismatch");
      std::copy(snap[i].begin(), snap[i].end(), dst.begin());
    }
  }

private:
  std::vector<std::pair<std::string, Tensor<Real>>> items_;
  std::map<std::string, std::size_t> index_;
};

/// Adam with bias correction. State lives here; parameters are updated in
/// place between recorded passes.
template <class Real>
class Adam {
public:
  struct Config {
    Real lr = Real(1e-3);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
  };

  explicit Adam(Config cfg = {}) : cfg_(cfg) {}

  const Config& config() const { return cfg_; }

  void step(ParamSet<Real>& params) {
    if (m_.empty()) {
      for (auto& [name, t] : params) {
        m_.emplace_back(t.size(), Real(0));
        v_.emplace_back(t.size(), Real(0));
      }
    }
    ++t_;
    const Real bc1 = Real(1) - std::pow(cfg_.beta1, static_cast<Real>(t_));
    const Real bc2 = Real(1) - std::pow(cfg_.beta2, static_cast<Real>(t_));
    std::size_t idx = 0;
    for (auto& [name, p] : params) {
      auto g = p.grad();
      auto vals = p.values_mut();
      auto& m = m_[idx];
      auto& v = v_[idx];
      for (std::size_t i = 0; i < vals.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (Real(1) - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (Real(1) - cfg_.beta2) * g[i] * g[i];
        const Real mhat = m[i] / bc1;
        const Real vhat = v[i] / bc2;
        vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      ++idx;
    }
  }

private:
  Config cfg_;
  long t_ = 0;
  std::vector<std::vector<Real>> m_, v_;
};

/// Affine map y = xW + b as a reusable building block.
template <class Real>
struct Dense {
  Tensor<Real> w, b;

  static Dense init(ParamSet<Real>& params, const std::string& prefix, Rng& rng, int in, int out) {
    Dense d;
    d.w = params.add(prefix + ".w", glorot_uniform<Real>(rng, in, out));
    d.b = params.add(prefix + ".b", Tensor<Real>::zeros({out}));
    return d;
  }

  Tensor<Real> operator()(const Tensor<Real>& x) const { return add_rowwise(matmul(x, w), b); }
};

}  // namespace paraseq
