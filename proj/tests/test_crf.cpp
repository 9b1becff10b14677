#include <cmath>

#include "doctest.h"
#include "paraseq/crf.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace paraseq;

namespace {

CrfModel<double> random_crf(Rng& rng, int feature_dim = 3) {
  CrfModel<double> model({feature_dim, 4}, rng.next_u64());
  for (const char* name : {"trans", "start", "stop"}) {
    auto v = model.params().get(name).values_mut();
    for (auto& x : v) x = rng.normal();
  }
  return model;
}

Tensor<double> random_emissions(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n) * 4);
  for (auto& x : v) x = rng.normal();
  return Tensor<double>::from_data({n, 4}, std::move(v));
}

}  // namespace

TEST_CASE("log partition: all-zero scores count sequences (N=2 -> log 16)") {
  CrfModel<double> model({2, 4}, 1);  // trans/start/stop default to zero
  auto em = Tensor<double>::zeros({2, 4});
  CHECK(model.log_partition(em).item() == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("log partition: N=1 base case is logsumexp(e + start + stop)") {
  Rng rng(2);
  auto model = random_crf(rng);
  auto em = random_emissions(rng, 1);
  double mx = -1e300;
  std::vector<double> scores(4);
  for (int j = 0; j < 4; ++j) {
    scores[static_cast<std::size_t>(j)] = em.at(0, j) +
                                          model.params().get("start").values()[static_cast<std::size_t>(j)] +
                                          model.params().get("stop").values()[static_cast<std::size_t>(j)];
    mx = std::max(mx, scores[static_cast<std::size_t>(j)]);
  }
  double acc = 0;
  for (double s : scores) acc += std::exp(s - mx);
  CHECK(model.log_partition(em).item() == doctest::Approx(mx + std::log(acc)).epsilon(1e-12));
}

TEST_CASE("log partition matches exhaustive enumeration for random instances") {
  Rng rng(3);
  for (int inst = 0; inst < 25; ++inst) {
    auto model = random_crf(rng);
    const int n = 1 + static_cast<int>(rng.below(5));
    auto em = random_emissions(rng, n);
    const double oracle = testsupport::crf_enum_log_partition(
        em.values(), model.params().get("trans").values(), model.params().get("start").values(),
        model.params().get("stop").values(), n, 4);
    CHECK(std::abs(model.log_partition(em).item() - oracle) < 1e-8);
  }
}

TEST_CASE("sequence posteriors sum to 1 for N <= 4") {
  Rng rng(4);
  for (int n = 1; n <= 4; ++n) {
    auto model = random_crf(rng);
    auto em = random_emissions(rng, n);
    const double log_z = model.log_partition(em).item();
    double total = 0;
    std::vector<int> seq(static_cast<std::size_t>(n), 0);
    const long count = static_cast<long>(std::pow(4, n));
    for (long code = 0; code < count; ++code) {
      long c = code;
      for (int t = 0; t < n; ++t) {
        seq[static_cast<std::size_t>(t)] = static_cast<int>(c % 4);
        c /= 4;
      }
      total += std::exp(model.path_score(em, seq).item() - log_z);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("nll vanishes when only one sequence is possible") {
  CrfModel<double> model({2, 4}, 5);
  const std::vector<int> gold = {2, 1, 3};
  std::vector<double> em(3 * 4, -1e9);  // every non-gold label impossible
  for (int t = 0; t < 3; ++t) em[static_cast<std::size_t>(t) * 4 + gold[static_cast<std::size_t>(t)]] = 0.0;
  auto loss = model.nll(Tensor<double>::from_data({3, 4}, std::move(em)), gold);
  CHECK(std::abs(loss.item()) < 1e-9);
}

TEST_CASE("nll gradient matches finite differences (through features)") {
  Rng rng(6);
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 2 + static_cast<int>(rng.below(4));
    CrfModel<double> model({3, 4}, rng.next_u64());
    {  // non-trivial transition scores
      auto v = model.params().get("trans").values_mut();
      for (auto& x : v) x = 0.3 * rng.normal();
    }
    ParamSet<double>& params = model.params();
    // treat the input features as an extra differentiable leaf
    ParamSet<double> all;
    std::vector<double> fv(static_cast<std::size_t>(n) * 3);
    for (auto& x : fv) x = rng.normal();
    all.add("features", Tensor<double>::from_data({n, 3}, std::move(fv)));
    for (auto& [name, t] : params) all.add(name, t);
    std::vector<int> gold(static_cast<std::size_t>(n));
    for (auto& y : gold) y = static_cast<int>(rng.below(4));
    auto loss_fn = [&] {
      auto em = model.emissions(all.get("features"));
      return model.nll(em, gold);
    };
    testsupport::check_gradients(all, loss_fn, 1e-5);
  }
}

TEST_CASE("viterbi: all-zero scores give all-Basic by the tie rule") {
  CrfModel<double> model({2, 4}, 7);
  auto path = model.viterbi(Tensor<double>::zeros({5, 4}));
  for (int y : path) CHECK(y == 0);
}

TEST_CASE("viterbi: peaked emissions with zero transitions decouple") {
  CrfModel<double> model({2, 4}, 8);
  std::vector<double> em(4 * 4, 0.0);
  const int want[4] = {2, 0, 3, 1};
  for (int t = 0; t < 4; ++t) em[static_cast<std::size_t>(t) * 4 + want[t]] = 9.0;
  auto path = model.viterbi(Tensor<double>::from_data({4, 4}, std::move(em)));
  for (int t = 0; t < 4; ++t) CHECK(path[static_cast<std::size_t>(t)] == want[t]);
}

TEST_CASE("viterbi equals exhaustive argmax on random instances") {
  Rng rng(9);
  for (int inst = 0; inst < 25; ++inst) {
    auto model = random_crf(rng);
    const int n = 1 + static_cast<int>(rng.below(6));
    auto em = random_emissions(rng, n);
    const auto oracle = testsupport::crf_enum_argmax(
        em.values(), model.params().get("trans").values(), model.params().get("start").values(),
        model.params().get("stop").values(), n, 4);
    CHECK(model.viterbi(em) == oracle);
  }
}
