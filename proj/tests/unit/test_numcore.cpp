#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "msgf/autograd.hpp"
#include "msgf/error.hpp"
#include "msgf/gradcheck.hpp"
#include "msgf/params.hpp"
#include "msgf/tensor_io.hpp"
#include "test_support.hpp"

using namespace msgf;
using msgf::test::random_leaf;
using msgf::test::random_tensor;

namespace {

Var C(Tensor t) { return Var::constant(std::move(t)); }

}  // namespace

TEST_CASE("matmul identity and simple product") {
  Var a = C(Tensor::mat(2, 2, {1, 0, 0, 1}));
  Var b = C(Tensor::mat(2, 2, {1, 2, 3, 4}));
  CHECK(matmul(a, b).value() == b.value());
  Var r = C(Tensor::mat(1, 2, {1, 0}));
  Var c = C(Tensor::mat(2, 1, {0, 1}));
  CHECK(matmul(r, c).value() == Tensor::mat(1, 1, {0}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Var a = C(Tensor({2, 3})), b = C(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches central differences") {
  std::mt19937_64 rng(1);
  Var a = random_leaf({3, 4}, rng), b = random_leaf({4, 2}, rng);
  const Tensor w = random_tensor({3, 2}, rng);
  Var params[] = {a, b};
  auto r = check_gradients([&] { return dot(matmul(a, b), C(w)); }, params);
  CHECK(r.max_rel_error < 1e-6);
  CHECK(r.coords_checked == 20);
}

TEST_CASE("activations at reference points") {
  CHECK(sigmoid(C(Tensor::scalar(0))).item() == 0.5);
  CHECK(tanh(C(Tensor::scalar(0))).item() == 0.0);
  CHECK(leaky_relu(C(Tensor::scalar(-1))).item() == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(leaky_relu(C(Tensor::scalar(3))).item() == 3.0);
}

TEST_CASE("activations stay finite for extreme inputs") {
  Var x = C(Tensor::vec({-1e3, -50, 0, 50, 1e3}));
  for (auto kind : {Activation::sigmoid, Activation::tanh, Activation::leaky_relu}) {
    Var y = activation(x, kind);
    CHECK(y.value().all_finite());
  }
  Var s = sigmoid(x);
  CHECK(s.value()[0] >= 0.0);
  CHECK(s.value()[4] <= 1.0);
}

TEST_CASE("activation gradients") {
  std::mt19937_64 rng(2);
  for (auto kind : {Activation::sigmoid, Activation::tanh, Activation::leaky_relu}) {
    const Tensor x = random_tensor({7}, rng, 2.0);
    const Tensor w = random_tensor({7}, rng);
    CHECK(finite_difference_check([&](const Var& v) { return dot(activation(v, kind), C(w)); },
                                  x) < 1e-6);
  }
}

TEST_CASE("softmax reference rows") {
  CHECK(softmax_rows(C(Tensor::vec({0, 0}))).value() == Tensor::vec({0.5, 0.5}));
  CHECK(softmax_rows(C(Tensor::vec({1000, 1000}))).value() == Tensor::vec({0.5, 0.5}));
  Tensor s = softmax_rows(C(Tensor::vec({std::log(2.0), std::log(1.0)}))).value();
  CHECK(s[0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("softmax rows are shift invariant probability vectors") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x = random_tensor({3, 5}, rng, 30.0);
    Tensor y = softmax_rows(C(x)).value();
    Tensor shifted = x;
    for (std::size_t j = 0; j < 5; ++j) shifted.at(1, j) += 123.0;
    Tensor ys = softmax_rows(C(shifted)).value();
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(y.at(i, j) >= 0.0);
        sum += y.at(i, j);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::fabs(ys.at(1, j) - y.at(1, j)) < 1e-12);
  }
}

TEST_CASE("softmax gradient") {
  std::mt19937_64 rng(4);
  const Tensor w = random_tensor({2, 4}, rng);
  CHECK(finite_difference_check([&](const Var& v) { return dot(softmax_rows(v), C(w)); },
                                random_tensor({2, 4}, rng, 3.0)) < 1e-6);
}

TEST_CASE("concat and slice") {
  Var a = C(Tensor::vec({1})), b = C(Tensor::vec({2}));
  CHECK(concat({a, b}, 0).value() == Tensor::vec({1, 2}));
  CHECK_THROWS_AS(concat(std::span<const Var>{}, 0), ContractError);
  CHECK_THROWS_AS(concat({C(Tensor({2, 3})), C(Tensor({2, 2}))}, 0), ShapeError);

  std::mt19937_64 rng(5);
  Var x = C(random_tensor({3, 4}, rng)), y = C(random_tensor({2, 4}, rng));
  Var xy = concat({x, y}, 0);
  CHECK(slice(xy, 0, 0, 3).value() == x.value());
  CHECK(slice(xy, 0, 3, 5).value() == y.value());
  Var z = C(random_tensor({3, 2}, rng));
  Var xz = concat({x, z}, 1);
  CHECK(slice(xz, 1, 0, 4).value() == x.value());
  CHECK(slice(xz, 1, 4, 6).value() == z.value());
}

TEST_CASE("concat gradient splits back") {
  std::mt19937_64 rng(6);
  Var a = random_leaf({2, 3}, rng), b = random_leaf({2, 2}, rng);
  const Tensor w = random_tensor({2, 5}, rng);
  Var params[] = {a, b};
  CHECK(check_gradients([&] { return dot(concat({a, b}, 1), C(w)); }, params).max_rel_error <
        1e-8);
}

TEST_CASE("reductions") {
  CHECK(mean(C(Tensor::vec({2, 4}))).item() == 3.0);

  Var x = Var::leaf(Tensor::vec({1, 5, 3}));
  {
    Tape tape;
    TapeScope scope(tape);
    Var m = reduce(x, ReduceKind::max);
    CHECK(m.item() == 5.0);
    tape.backward(m);
  }
  CHECK(x.grad() == Tensor::vec({0, 1, 0}));

  Var t = Var::leaf(Tensor::vec({5, 5}));
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(reduce(t, ReduceKind::max));
  }
  CHECK(t.grad() == Tensor::vec({1, 0}));

  std::mt19937_64 rng(7);
  Var y = random_leaf({4}, rng);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(y));
  }
  CHECK(y.grad() == Tensor({4}, 1.0));

  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(mean_of(std::span<const Var>{}), EmptyReductionError);
}

TEST_CASE("axis reductions and gradient") {
  Var m = C(Tensor::mat(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(reduce(m, ReduceKind::sum, 0).value() == Tensor::vec({5, 7, 9}));
  CHECK(reduce(m, ReduceKind::mean, 1).value() == Tensor::vec({2, 5}));
  CHECK(reduce(m, ReduceKind::max, 1).value() == Tensor::vec({3, 6}));
  std::mt19937_64 rng(8);
  const Tensor w = random_tensor({3}, rng);
  CHECK(finite_difference_check(
            [&](const Var& v) { return dot(reduce(v, ReduceKind::mean, 0), C(w)); },
            random_tensor({2, 3}, rng)) < 1e-8);
}

TEST_CASE("hadamard identities and broadcast gradient") {
  std::mt19937_64 rng(9);
  Var a = C(random_tensor({2, 3, 3}, rng));
  CHECK(hadamard(a, C(Tensor({2, 3, 3}, 1.0))).value() == a.value());
  CHECK(hadamard(a, C(Tensor({2, 3, 3}, 0.0))).value() == Tensor({2, 3, 3}, 0.0));
  CHECK_THROWS_AS(hadamard(a, C(Tensor({3, 1, 1}))), ShapeError);

  Var x = random_leaf({2, 3, 4}, rng), s = random_leaf({2, 1, 1}, rng);
  const Tensor w = random_tensor({2, 3, 4}, rng);
  Var params[] = {x, s};
  CHECK(check_gradients([&] { return dot(hadamard(x, s), C(w)); }, params).max_rel_error < 1e-8);
}

TEST_CASE("add_n is exactly permutation invariant") {
  std::mt19937_64 rng(10);
  std::vector<Var> parts;
  for (int i = 0; i < 6; ++i) parts.push_back(C(random_tensor({5}, rng, 1e3)));
  const Tensor ref = add_n(parts).value();
  std::vector<std::size_t> idx(parts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Var> p;
    for (auto i : idx) p.push_back(parts[i]);
    CHECK(add_n(p).value() == ref);
  }
}

TEST_CASE("conv2d reference cases") {
  std::mt19937_64 rng(11);
  Var x = C(random_tensor({1, 5, 5}, rng));
  CHECK(conv2d(x, C(Tensor({1, 1, 1, 1}, 1.0))).value() == x.value());

  Var c = C(Tensor({1, 5, 5}, 0.7));
  Tensor y = conv2d(c, C(Tensor({1, 1, 3, 3}, 1.0))).value();
  CHECK(y.at(0, 2, 2) == doctest::Approx(6.3).epsilon(1e-14));
  CHECK(y.at(0, 0, 0) == doctest::Approx(4 * 0.7).epsilon(1e-14));

  CHECK(conv2d(C(Tensor({2, 4, 4})), C(Tensor({1, 2, 3, 3})), 2).shape() == Shape{1, 2, 2});
  CHECK_THROWS_AS(conv2d(C(Tensor({2, 4, 4})), C(Tensor({1, 3, 3, 3}))), ShapeError);
}

TEST_CASE("conv2d gradient on a 1x4x4 input") {
  std::mt19937_64 rng(12);
  Var x = random_leaf({1, 4, 4}, rng), k = random_leaf({2, 1, 3, 3}, rng);
  const Tensor w = random_tensor({2, 4, 4}, rng);
  Var params[] = {x, k};
  CHECK(check_gradients([&] { return dot(conv2d(x, k), C(w)); }, params).max_rel_error < 1e-8);
  Var params2[] = {x, k};
  const Tensor w2 = random_tensor({2, 2, 2}, rng);
  CHECK(check_gradients([&] { return dot(conv2d(x, k, 2), C(w2)); }, params2).max_rel_error <
        1e-8);
}

TEST_CASE("gru_cell reference cases") {
  ParamStore store;
  Initializer init(13);
  GruParams p = make_gru_params(store, init, "g", 3, 2);
  for (auto& np : store.params()) np.var.mutable_value().fill(0.0);
  Var h = gru_cell(C(Tensor::vec({0.4, -0.3})), C(Tensor({3}, 0.0)), p);
  CHECK(h.value() == Tensor({3}, 0.0));

  ParamStore store2;
  Initializer init2(14);
  GruParams q = make_gru_params(store2, init2, "g", 3, 2);
  q.b_z.mutable_value().fill(50.0);
  std::mt19937_64 rng(15);
  Var x = C(random_tensor({2}, rng)), h0 = C(random_tensor({3}, rng, 0.9));
  Tensor out = gru_cell(x, h0, q).value();
  // z -> 1: h_t -> candidate state computed with the same reset gate.
  Var r = sigmoid(add(add(matvec(q.w_r, x), matvec(q.u_r, h0)), q.b_r));
  Var cand = tanh(add(add(matvec(q.w_h, x), matvec(q.u_h, hadamard(r, h0))), q.b_h));
  CHECK(test::max_abs_diff(out, cand.value()) < 1e-3);
  for (double v : out.data()) CHECK(std::fabs(v) < 1.0);
}

TEST_CASE("gru_cell gradient w.r.t. every parameter") {
  ParamStore store;
  Initializer init(16);
  GruParams p = make_gru_params(store, init, "g", 4, 3);
  std::mt19937_64 rng(17);
  const Tensor x = random_tensor({3}, rng), h = random_tensor({4}, rng, 0.9);
  const Tensor w = random_tensor({4}, rng);
  std::vector<Var> params;
  for (auto& np : store.params()) params.push_back(np.var);
  auto r = check_gradients([&] { return dot(gru_cell(C(x), C(h), p), C(w)); }, params);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("backward basics") {
  std::mt19937_64 rng(18);
  Var x = random_leaf({5}, rng);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(scale(dot(x, x), 0.5));
  }
  CHECK(test::max_abs_diff(x.grad(), x.value()) < 1e-15);

  Var unused = random_leaf({3}, rng);
  x.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Var side = square(unused);
    (void)side;
    tape.backward(sum(x));
  }
  CHECK(unused.grad() == Tensor({3}, 0.0));

  Tape tape;
  TapeScope scope(tape);
  CHECK_THROWS_AS(tape.backward(square(x)), ContractError);
}

TEST_CASE("tape entries are topologically ordered") {
  std::mt19937_64 rng(19);
  Var a = random_leaf({3}, rng), b = random_leaf({3}, rng);
  Tape tape;
  TapeScope scope(tape);
  Var y = sum(tanh(hadamard(add(a, b), sigmoid(a))));
  const auto& entries = tape.entries();
  for (std::size_t k = 0; k < entries.size(); ++k)
    for (const auto& in : entries[k].inputs) {
      if (in->producer == nullptr) continue;
      bool earlier = false;
      for (std::size_t j = 0; j < k; ++j) earlier = earlier || entries[j].output == in;
      CHECK(earlier);
    }
  tape.backward(y);
}

TEST_CASE("three-layer MLP loss matches finite differences") {
  std::mt19937_64 rng(20);
  Var w1 = random_leaf({6, 4}, rng), w2 = random_leaf({5, 6}, rng), w3 = random_leaf({1, 5}, rng);
  Var b1 = random_leaf({6}, rng), b2 = random_leaf({5}, rng);
  const Tensor x = random_tensor({4}, rng);
  Var params[] = {w1, w2, w3, b1, b2};
  auto loss = [&] {
    Var h1 = tanh(add(matvec(w1, C(x)), b1));
    Var h2 = leaky_relu(add(matvec(w2, h1), b2));
    return square(matvec(w3, h2));
  };
  CHECK(check_gradients(loss, params).max_rel_error < 1e-6);
}

TEST_CASE("finite difference harness") {
  std::mt19937_64 rng(21);
  const Tensor x = random_tensor({6}, rng);
  CHECK(finite_difference_check([](const Var& v) { return sum(v); }, x) < 1e-10);
  CHECK(finite_difference_check([](const Var& v) { return sigmoid(sum(v)); }, x) < 1e-6);
}

TEST_CASE("spatial ops gradients") {
  std::mt19937_64 rng(22);
  const Tensor w = random_tensor({5, 6}, rng);
  CHECK(finite_difference_check([&](const Var& v) { return dot(box_mean(v, 3), C(w)); },
                                random_tensor({5, 6}, rng)) < 1e-8);
  const Tensor w2 = random_tensor({8}, rng);
  CHECK(finite_difference_check(
            [&](const Var& v) { return dot(roi_max_pool(v, {1, 0, 5, 4}, 2), C(w2)); },
            random_tensor({2, 5, 6}, rng)) < 1e-8);
  const Tensor w3 = random_tensor({3}, rng);
  CHECK(finite_difference_check(
            [&](const Var& v) { return dot(embedding_lookup(v, 2), C(w3)); },
            random_tensor({4, 3}, rng)) < 1e-8);
}

TEST_CASE("ops without a tape are plain functions") {
  std::mt19937_64 rng(23);
  Var a = random_leaf({3}, rng);
  Var y = tanh(a);
  CHECK_FALSE(y.requires_grad());
  CHECK(active_tape() == nullptr);
}

TEST_CASE("forward passes are bit deterministic") {
  std::mt19937_64 rng(24);
  const Tensor x = random_tensor({2, 6, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng);
  CHECK(conv2d(C(x), C(k)).value() == conv2d(C(x), C(k)).value());
}

TEST_CASE("MSGT round trip and rejection") {
  std::mt19937_64 rng(25);
  const Tensor t = random_tensor({2, 3, 4}, rng);
  const std::string bytes = encode_msgt(t);
  CHECK(bytes.substr(0, 4) == "MSGT");
  CHECK(bytes.size() == 4 + 4 + 3 * 4 + 24 * 8);
  CHECK(decode_msgt(bytes) == t);
  CHECK_THROWS_AS(decode_msgt(bytes.substr(0, bytes.size() - 1)), ParseError);
  CHECK_THROWS_AS(decode_msgt("MSGX" + bytes.substr(4)), ParseError);
}

TEST_CASE("MSGT decoder survives random mutations with typed errors only") {
  std::mt19937_64 rng(26);
  const std::string base = encode_msgt(random_tensor({3, 2}, rng));
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string m = base;
    const std::size_t pos = rng() % m.size();
    switch (trial % 3) {
      case 0: m[pos] = static_cast<char>(byte(rng)); break;
      case 1: m.erase(pos, 1 + rng() % 4); break;
      default: m.insert(pos, 1 + rng() % 3, static_cast<char>(byte(rng))); break;
    }
    try {
      Tensor t = decode_msgt(m);
      CHECK(t.numel() == numel(t.shape()));
    } catch (const Error&) {
    }
  }
}

TEST_CASE("parameter store and initializer") {
  ParamStore store;
  Initializer a(5), b(5);
  store.add("x", a.lecun({3, 4}, 4));
  CHECK_THROWS_AS(store.add("x", Tensor({1})), ContractError);
  CHECK(store.get("x").value() == b.lecun({3, 4}, 4));
  CHECK(store.total_size() == 12);
  CHECK_THROWS_AS(store.get("missing"), ContractError);
}
