// Copyright 2026 The Derender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include "support/op_gradient_suite.hpp"

using namespace derender;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

TEST_CASE("op shape algebra") {
  Tape tape;
  Rng rng(1);
  Var a = tape.leaf(ad::rand_uniform({2, 3}, rng));
  Var b = tape.leaf(ad::rand_uniform({3, 4}, rng));
  CHECK(ad::matmul(a, b).shape() == Shape{2, 4});

  Var c = tape.leaf(ad::rand_uniform({2, 3}, rng));
  CHECK(ad::add(a, c).shape() == Shape{2, 3});

  Var bad = tape.leaf(ad::rand_uniform({4, 4}, rng));
  CHECK_THROWS_WITH(ad::matmul(a, bad),
                    Catch::Matchers::ContainsSubstring("matmul") &&
                        Catch::Matchers::ContainsSubstring("[2,3]") &&
                        Catch::Matchers::ContainsSubstring("[4,4]"));
  CHECK_THROWS_WITH(ad::add(a, bad), Catch::Matchers::ContainsSubstring("shape mismatch"));
}

TEST_CASE("backward on simple losses") {
  SECTION("sum(x) gives ones") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({3}, {1, 2, 3}), true);
    Var loss = ad::sum_all(x);
    tape.backward(loss);
    const Tensor& g = tape.grad(x);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 1.0);
    CHECK(g[2] == 1.0);
  }
  SECTION("sum(x*x) gives 2x") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({3}, {1, 2, 3}), true);
    Var loss = ad::sum_all(ad::mul(x, x));
    tape.backward(loss);
    const Tensor& g = tape.grad(x);
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 4.0);
    CHECK(g[2] == 6.0);
  }
  SECTION("fan-out accumulates exactly: y = x + x") {
    Tape tape;
    Var x = tape.leaf(Tensor::from({2}, {0.5, -1.25}), true);
    Var loss = ad::sum_all(ad::add(x, x));
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == 2.0);
    CHECK(tape.grad(x)[1] == 2.0);
  }
}

TEST_CASE("backward errors") {
  Tape tape;
  Var x = tape.leaf(Tensor::from({2}, {1, 2}), true);
  Var loss = ad::sum_all(x);
  tape.backward(loss);
  CHECK_THROWS_WITH(tape.backward(loss),
                    Catch::Matchers::ContainsSubstring("already consumed"));

  Tape tape2;
  Var y = tape2.leaf(Tensor::from({2}, {1, 2}), true);
  CHECK_THROWS_WITH(tape2.backward(y), Catch::Matchers::ContainsSubstring("scalar"));
}

TEST_CASE("non-finite forward output is an error") {
  Tape tape;
  CHECK_THROWS_WITH(
      tape.leaf(Tensor::from({1}, {std::numeric_limits<real>::infinity()})),
      Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("random composite matches finite differences") {
  // Three-op composite: sigmoid(A @ B) summed against fixed weights.
  Rng rng(7);
  auto build = [](Tape& t, std::vector<Var>& v) {
    Var h = ad::sigmoid(ad::matmul(v[0], v[1]));
    return ad::mean_all(ad::mul(h, h));
  };
  auto res = testing::check_gradients(
      build, {ad::rand_uniform({3, 4}, rng), ad::rand_uniform({4, 2}, rng)}, 1e-5);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("every built-in op matches finite differences") {
  auto checks = testing::run_builtin_op_gradient_suite();
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.result.worst);
    CHECK(c.result.max_rel_err < 1e-4);
  }
}

TEST_CASE("custom ops") {
  SECTION("identity passes gradient through") {
    auto identity = ad::register_custom(
        {.name = "test_identity",
         .num_inputs = 1,
         .num_grads = 1,
         .forward = [](std::span<const Tensor* const> in, std::any&) { return *in[0]; },
         .backward = [](const std::any&, std::span<const Tensor* const>,
                        const Tensor& g) {
           return std::vector<std::optional<Tensor>>{g};
         }});
    Tape tape;
    Var x = tape.leaf(Tensor::from({3}, {1, 2, 3}), true);
    Var y = apply_custom(tape, identity, {x});
    tape.backward(ad::sum_all(y));
    CHECK(tape.grad(x)[0] == 1.0);
    CHECK(tape.grad(x)[2] == 1.0);
  }
  SECTION("scale-by-2 doubles upstream gradient") {
    auto twice = ad::register_custom(
        {.name = "test_twice",
         .num_inputs = 1,
         .num_grads = 1,
         .forward =
             [](std::span<const Tensor* const> in, std::any&) {
               Tensor out = *in[0];
               for (real& v : out.data) v *= 2;
               return out;
             },
         .backward = [](const std::any&, std::span<const Tensor* const>,
                        const Tensor& g) {
           Tensor gg = g;
           for (real& v : gg.data) v *= 2;
           return std::vector<std::optional<Tensor>>{gg};
         }});
    Tape tape;
    Var x = tape.leaf(Tensor::from({2}, {1, 5}), true);
    tape.backward(ad::sum_all(apply_custom(tape, twice, {x})));
    CHECK(tape.grad(x)[0] == 2.0);
  }
  SECTION("gradient arity mismatch rejected at registration") {
    CHECK_THROWS_WITH(
        ad::register_custom(
            {.name = "bad_arity",
             .num_inputs = 2,
             .num_grads = 1,
             .forward = [](std::span<const Tensor* const> in, std::any&) { return *in[0]; },
             .backward = [](const std::any&, std::span<const Tensor* const>,
                            const Tensor& g) {
               return std::vector<std::optional<Tensor>>{g};
             }}),
        Catch::Matchers::ContainsSubstring("one gradient per input"));
  }
}

TEST_CASE("tape determinism: identical seeds give bit-identical gradients") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Tape tape;
    Var x = tape.leaf(ad::rand_uniform({4, 4}, rng), true);
    Var w = tape.leaf(ad::rand_uniform({4, 4}, rng), true);
    Var loss = ad::mean_all(ad::sigmoid(ad::matmul(x, w)));
    tape.backward(loss);
    return std::pair{tape.grad(x).data, tape.grad(w).data};
  };
  auto [gx1, gw1] = run(42);
  auto [gx2, gw2] = run(42);
  CHECK(gx1 == gx2);
  CHECK(gw1 == gw2);
}
