#include <cmath>
#include <thread>

#include "doctest.h"
#include "paraseq/nn.hpp"
#include "paraseq/rng.hpp"
#include "paraseq/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace paraseq;

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.normal() * scale;
  return Tensor<double>::from_data(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand-multiplied oracle") {
  auto x = Tensor<double>::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  auto out = matmul(Tensor<double>::eye(3), x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(out.values()[i] == x.values()[i]);

  auto a = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
  auto b = Tensor<double>::from_data({2, 1}, {5, 6});
  auto c = matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(17));
  CHECK(c.at(1, 0) == doctest::Approx(39));
}

TEST_CASE("matmul associativity in double") {
  Rng rng(3);
  auto a = random_tensor(rng, {4, 5});
  auto b = random_tensor(rng, {5, 6});
  auto c = random_tensor(rng, {6, 3});
  auto left = matmul(matmul(a, b), c);
  auto right = matmul(a, matmul(b, c));
  for (std::size_t i = 0; i < left.size(); ++i)
    CHECK(left.values()[i] == doctest::Approx(right.values()[i]).epsilon(1e-12));
}

TEST_CASE("matmul rejects mismatched shapes with both shapes named") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), ShapeError);
}

TEST_CASE("concat shape arithmetic and slice round-trip") {
  Rng rng(5);
  auto a = random_tensor(rng, {2, 3});
  auto b = random_tensor(rng, {2, 5});
  auto c = concat(a, b, 1);
  REQUIRE(c.shape() == Shape{2, 8});
  auto back_a = slice(c, 1, 0, 3);
  auto back_b = slice(c, 1, 3, 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back_a.values()[i] == a.values()[i]);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(back_b.values()[i] == b.values()[i]);
}

TEST_CASE("softmax symmetry, stability, and direct-formula oracle") {
  auto flat = softmax(Tensor<double>::from_data({4}, {0, 0, 0, 0}));
  for (int i = 0; i < 4; ++i) CHECK(flat.values()[static_cast<std::size_t>(i)] == doctest::Approx(0.25));

  auto big = softmax(Tensor<double>::from_data({2}, {1000, 0}));
  CHECK(big.values()[0] == doctest::Approx(1.0));
  CHECK(big.values()[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(big.values()[0]));

  Rng rng(7);
  std::vector<double> raw(5);
  for (auto& x : raw) x = rng.normal();
  auto sm = softmax(Tensor<double>::from_data({5}, raw));
  auto oracle = testsupport::softmax_oracle(raw);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(sm.values()[static_cast<std::size_t>(i)] - oracle[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("softmax rows sum to 1 in float32") {
  paraseq::Rng rng(11);
  std::vector<float> v(7 * 9);
  for (auto& x : v) x = static_cast<float>(rng.normal() * 5);
  auto sm = softmax(Tensor<float>::from_data({7, 9}, std::move(v)), 1);
  for (int i = 0; i < 7; ++i) {
    float s = 0;
    for (int j = 0; j < 9; ++j) s += sm.at(i, j);
    CHECK(std::abs(s - 1.0f) < 1e-6f);
  }
}

TEST_CASE("cross entropy analytic values and oracle") {
  // uniform logits over 4 classes
  auto uniform = cross_entropy(Tensor<double>::zeros({1, 4}), std::vector<int>{2});
  CHECK(uniform.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // near-one-hot logits drive the loss to 0
  auto sharp = cross_entropy(Tensor<double>::from_data({1, 3}, {50, -50, -50}), std::vector<int>{0});
  CHECK(sharp.item() < 1e-12);

  Rng rng(13);
  std::vector<double> logits(6 * 4);
  for (auto& x : logits) x = rng.normal();
  std::vector<int> targets = {0, 3, 1, 2, 2, 0};
  auto ce = cross_entropy(Tensor<double>::from_data({6, 4}, logits), targets);
  CHECK(ce.item() ==
        doctest::Approx(testsupport::cross_entropy_oracle(logits, targets, 4)).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects fully ignored batches") {
  auto logits = Tensor<double>::zeros({2, 3});
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 1}, {}, {true, true}),
                  std::invalid_argument);
}

TEST_CASE("backward on linear and quadratic sums") {
  {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({3}, {1, 2, 3}).set_requires_grad();
    auto loss = sum(x);
    tape.backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == doctest::Approx(1.0));
  }
  {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2}, {1, 2}).set_requires_grad();
    auto loss = sum(mul(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tape<double> tape;
  auto x = Tensor<double>::from_data({2}, {1, 2}).set_requires_grad();
  auto y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("composite graph matches finite differences") {
  Rng rng(17);
  for (int inst = 0; inst < 5; ++inst) {
    ParamSet<double> params;
    params.add("a", random_tensor(rng, {3, 4}));
    params.add("b", random_tensor(rng, {4, 2}));
    params.add("v", random_tensor(rng, {2}));
    params.add("g", Tensor<double>::full({4}, 1.0));
    params.add("be", Tensor<double>::zeros({4}));
    auto loss_fn = [&] {
      auto h = layer_norm_rows(params.get("a"), params.get("g"), params.get("be"));
      auto z = add_rowwise(matmul(relu(h), params.get("b")), params.get("v"));
      auto s = softmax(z, 1);
      auto t = tanh(matmul(transpose(s), sigmoid(z)));
      auto lse = logsumexp_rows(concat(z, t, 0));
      return mean(mul(lse, lse));
    };
    testsupport::check_gradients(params, loss_fn, 1e-5);
  }
}

TEST_CASE("elementwise and structural op gradients") {
  Rng rng(19);
  ParamSet<double> params;
  params.add("x", random_tensor(rng, {3, 5}));
  params.add("y", random_tensor(rng, {3, 5}, 0.5));
  auto posify = [&] {  // keep div/log away from 0
    return add(mul(params.get("y"), params.get("y")), Tensor<double>::full({3, 5}, 0.7));
  };
  auto loss_fn = [&] {
    auto x = params.get("x");
    auto d = div(x, posify());
    auto l = log(add(mul(sigmoid(x), sigmoid(x)), Tensor<double>::full({3, 5}, 0.3)));
    auto e = exp(scale(x, 0.3));
    auto cat = concat({d, l, e}, 0);
    auto s = slice(cat, 0, 2, 5);
    auto rs = rowscale(s, sum_rows(slice(cat, 0, 0, 5)));
    auto cw = add_colwise(rs, sum_rows(s));
    return mean(mul(cw, cw));
  };
  testsupport::check_gradients(params, loss_fn, 1e-5);
}

TEST_CASE("gather_rows checks bounds and routes gradients") {
  Rng rng(23);
  ParamSet<double> params;
  params.add("table", random_tensor(rng, {6, 3}));
  CHECK_THROWS_AS(gather_rows(params.get("table"), {6}), std::out_of_range);
  auto loss_fn = [&] {
    auto rows = gather_rows(params.get("table"), {1, 1, 4, 0});
    return sum(mul(rows, rows));
  };
  testsupport::check_gradients(params, loss_fn, 1e-5);
}

TEST_CASE("adam zero gradient leaves parameters fixed") {
  ParamSet<float> params;
  params.add("w", Tensor<float>::from_data({3}, {1.f, -2.f, 3.f}));
  params.zero_grad();
  Adam<float> opt;
  const std::vector<float> before(params.get("w").values().begin(), params.get("w").values().end());
  opt.step(params);
  for (int i = 0; i < 3; ++i) CHECK(params.get("w").values()[static_cast<std::size_t>(i)] == before[static_cast<std::size_t>(i)]);
}

TEST_CASE("adam first step moves by about -lr on unit gradient") {
  ParamSet<double> params;
  params.add("w", Tensor<double>::from_data({1}, {0.5}));
  {
    Tape<double> tape;
    auto loss = sum(params.get("w"));  // gradient 1
    tape.backward(loss);
  }
  Adam<double> opt;  // lr 1e-3
  opt.step(params);
  CHECK(params.get("w").values()[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
}

TEST_CASE("adam drives |x| down on f(x)=x^2") {
  ParamSet<double> params;
  params.add("x", Tensor<double>::from_data({1}, {1.0}));
  // Adam steps are ~lr in size; keep 100*lr below the distance to 0 so the
  // trajectory cannot overshoot and |x| decreases strictly.
  Adam<double> opt({0.005, 0.9, 0.999, 1e-8});
  double prev = 1.0;
  for (int step = 0; step < 100; ++step) {
    params.zero_grad();
    {
      Tape<double> tape;
      auto x = params.get("x");
      tape.backward(sum(mul(x, x)));
    }
    opt.step(params);
    const double cur = std::abs(params.get("x").values()[0]);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(prev < 0.7);
}

TEST_CASE("orthogonal init gives orthonormal recurrent maps") {
  Rng rng(29);
  auto q = orthogonal<double>(rng, 8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double dot = 0;
      for (int r = 0; r < 8; ++r) dot += q.at(r, i) * q.at(r, j);
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("independent tapes on separate threads do not interact") {
  auto run = [](double seed_val, double* out) {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2}, {seed_val, 2 * seed_val}).set_requires_grad();
    tape.backward(sum(mul(x, x)));
    *out = x.grad()[0];
  };
  double g1 = 0, g2 = 0;
  std::thread t1(run, 1.5, &g1);
  std::thread t2(run, -3.0, &g2);
  t1.join();
  t2.join();
  CHECK(g1 == doctest::Approx(3.0));
  CHECK(g2 == doctest::Approx(-6.0));
}
