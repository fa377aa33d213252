// test_tensor.cc

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "speakerkit/adam.h"
#include "speakerkit/kernels.h"
#include "speakerkit/ops.h"
#include "speakerkit/tensor.h"
#include "testing_util.h"

using namespace speakerkit;
using testing::gradient_check;
using testing::random_tensor;

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor<float>::from({2, 3}, {1.0f, 2.0f}), DimensionError);
  Tensor<float> t = Tensor<float>::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK_FALSE(t.has_grad());
  CHECK_THROWS_AS(t.grad(), UsageError);

  // Scalars have an empty shape and a single element.
  Tensor<float> s = Tensor<float>::scalar(4.0f);
  CHECK(s.numel() == 1);
  CHECK(s.item() == 4.0f);
}

TEST_CASE("matmul forward examples") {
  // Identity leaves any matrix unchanged.
  Tensor<float> eye = Tensor<float>::from(
      {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(1);
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  std::vector<float> av(9);
  for (auto& x : av) x = d(rng);
  Tensor<float> a = Tensor<float>::from({3, 3}, av);
  Tensor<float> out = ops::matmul(eye, a);
  for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(av[i]));

  Tensor<float> m = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  Tensor<float> v = Tensor<float>::from({2, 1}, {1, 1});
  Tensor<float> mv = ops::matmul(m, v);
  CHECK(mv.data()[0] == 3.0f);
  CHECK(mv.data()[1] == 7.0f);

  // The error message names both shapes.
  try {
    ops::matmul(m, Tensor<float>::from({3, 1}, {1, 1, 1}));
    CHECK(false);
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x1]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient vs finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    Tensor<double> a = random_tensor({3, 4}, rng);
    Tensor<double> b = random_tensor({4, 2}, rng);
    const double err = gradient_check(
        {a, b}, [&] { return ops::sum(ops::matmul(a, b)); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv2d_same3x3 examples") {
  Rng rng(7);
  // Delta kernel reproduces the input.
  Tensor<float> x = Tensor<float>::from(
      {1, 3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  std::vector<float> delta(9, 0.0f);
  delta[4] = 1.0f;
  Tensor<float> w = Tensor<float>::from({1, 1, 3, 3}, delta);
  Tensor<float> b = Tensor<float>::zeros({1});
  Tensor<float> y = ops::conv2d_same3x3(x, w, b);
  CHECK(y.shape() == Shape{1, 3, 4});
  for (int i = 0; i < 12; ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]));

  // All-ones filter over an all-ones 4x4 input counts the contributing
  // neighbors: 9 in the interior, 4 in the corners.
  Tensor<float> ones_in = Tensor<float>::full({1, 4, 4}, 1.0f);
  Tensor<float> ones_w = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  Tensor<float> c = ops::conv2d_same3x3(ones_in, ones_w, b);
  CHECK(c.data()[0] == 4.0f);   // corner
  CHECK(c.data()[3] == 4.0f);   // corner
  CHECK(c.data()[5] == 9.0f);   // interior
  CHECK(c.data()[15] == 4.0f);  // corner

  // Channel mismatch is a dimension error.
  Tensor<float> w2 = Tensor<float>::zeros({2, 3, 3, 3});
  CHECK_THROWS_AS(ops::conv2d_same3x3(x, w2, Tensor<float>::zeros({2})),
                  DimensionError);
}

TEST_CASE("conv2d matches a naive oracle on random inputs") {
  Rng rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const std::int64_t cin = 2, cout = 3, h = 5, w = 4;
  Tensor<double> x = random_tensor({cin, h, w}, rng);
  Tensor<double> f = random_tensor({cout, cin, 3, 3}, rng);
  Tensor<double> b = random_tensor({cout}, rng);
  Tensor<double> y = ops::conv2d_same3x3(x, f, b);
  for (std::int64_t co = 0; co < cout; ++co) {
    for (std::int64_t yy = 0; yy < h; ++yy) {
      for (std::int64_t xx = 0; xx < w; ++xx) {
        double acc = b.data()[co];
        for (std::int64_t ci = 0; ci < cin; ++ci)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const std::int64_t sy = yy + dy, sx = xx + dx;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += x.data()[(ci * h + sy) * w + sx] *
                     f.data()[((co * cin + ci) * 3 + dy + 1) * 3 + dx + 1];
            }
        CHECK(y.data()[(co * h + yy) * w + xx] == doctest::Approx(acc));
      }
    }
  }
}

TEST_CASE("conv2d gradient vs finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(300 + trial);
    Tensor<double> x = random_tensor({2, 5, 5}, rng);
    Tensor<double> f = random_tensor({3, 2, 3, 3}, rng);
    Tensor<double> b = random_tensor({3}, rng);
    // Weight the output so every position has a distinct pull.
    Tensor<double> mix = random_tensor({3, 5, 5}, rng, -1.0, 1.0, false);
    const double err = gradient_check({x, f, b}, [&] {
      return ops::sum(ops::mul(ops::conv2d_same3x3(x, f, b), mix));
    });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv2d preserves spatial shape for all H, W >= 1") {
  Rng rng(13);
  for (std::int64_t h = 1; h <= 4; ++h) {
    for (std::int64_t w = 1; w <= 4; ++w) {
      Tensor<double> x = random_tensor({2, h, w}, rng);
      Tensor<double> f = random_tensor({3, 2, 3, 3}, rng);
      Tensor<double> y = ops::conv2d_same3x3(x, f, Tensor<double>::zeros({3}));
      CHECK(y.shape() == Shape{3, h, w});
    }
  }
}

TEST_CASE("maxpool2x2 examples") {
  Tensor<float> x = Tensor<float>::from({1, 2, 2}, {1, 2, 3, 4});
  Tensor<float> y = ops::maxpool2x2(x);
  CHECK(y.shape() == Shape{1, 1, 1});
  CHECK(y.data()[0] == 4.0f);

  // Odd trailing row/column is dropped.
  Rng rng(5);
  Tensor<double> big = random_tensor({1, 5, 5}, rng);
  CHECK(ops::maxpool2x2(big).shape() == Shape{1, 2, 2});

  CHECK_THROWS_AS(ops::maxpool2x2(Tensor<float>::zeros({1, 1, 4})),
                  DimensionError);
}

TEST_CASE("maxpool gradient routes to the argmax, first index on ties") {
  // Distinct values: finite differences agree.
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(500 + trial);
    Tensor<double> x = random_tensor({2, 4, 4}, rng);
    const double err =
        gradient_check({x}, [&] { return ops::sum(ops::maxpool2x2(x)); });
    CHECK(err < 1e-6);
  }
  // A tied window sends the whole gradient to the first (row-major) max.
  Tensor<double> tied =
      Tensor<double>::from({1, 2, 2}, {5.0, 5.0, 5.0, 5.0}, true);
  Tensor<double> loss = ops::sum(ops::maxpool2x2(tied));
  loss.backward();
  CHECK(tied.grad()[0] == 1.0);
  CHECK(tied.grad()[1] == 0.0);
  CHECK(tied.grad()[2] == 0.0);
  CHECK(tied.grad()[3] == 0.0);
}

TEST_CASE("softmax examples and properties") {
  Tensor<float> flat = Tensor<float>::from({4}, {0, 0, 0, 0});
  Tensor<float> sm = ops::softmax(flat);
  for (int i = 0; i < 4; ++i) CHECK(sm.data()[i] == doctest::Approx(0.25));

  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor<double> x = random_tensor({5, 3}, rng, -4.0, 4.0, false);
    for (int axis = 0; axis <= 1; ++axis) {
      Tensor<double> y = ops::softmax(x, axis);
      // Entries in (0,1), slices sum to 1 within 1e-6.
      for (double v : y.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
      const std::int64_t rows = x.dim(0), cols = x.dim(1);
      if (axis == 1) {
        for (std::int64_t i = 0; i < rows; ++i) {
          double s = 0;
          for (std::int64_t j = 0; j < cols; ++j) s += y.data()[i * cols + j];
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
      } else {
        for (std::int64_t j = 0; j < cols; ++j) {
          double s = 0;
          for (std::int64_t i = 0; i < rows; ++i) s += y.data()[i * cols + j];
          CHECK(std::abs(s - 1.0) < 1e-6);
        }
      }
      // Shift invariance (subtract-max stabilization).
      Tensor<double> shifted = ops::scale(x, 1.0);
      for (auto& v : shifted.data()) v += 100.0;
      Tensor<double> y2 = ops::softmax(shifted, axis);
      for (std::int64_t i = 0; i < y.numel(); ++i)
        CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-6);
    }
  }
}

TEST_CASE("softmax gradient vs finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(700 + trial);
    Tensor<double> x = random_tensor({4, 3}, rng);
    Tensor<double> mix = random_tensor({4, 3}, rng, -1.0, 1.0, false);
    for (int axis = 0; axis <= 1; ++axis) {
      const double err = gradient_check({x}, [&] {
        return ops::sum(ops::mul(ops::softmax(x, axis), mix));
      });
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("dropout") {
  Rng rng(3);
  Tensor<float> x = Tensor<float>::from({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  // Eval mode is the identity, bit for bit.
  Tensor<float> y = ops::dropout(x, 0.3, rng, /*train=*/false);
  CHECK(std::memcmp(y.data().data(), x.data().data(), 8 * sizeof(float)) == 0);
  CHECK_THROWS_AS(ops::dropout(x, 1.0, rng, true), ParameterError);
  CHECK_THROWS_AS(ops::dropout(x, -0.1, rng, true), ParameterError);

  // Train mode: kept entries are scaled by 1/(1-p).
  Rng rng2(17);
  Tensor<float> t = ops::dropout(x, 0.5, rng2, /*train=*/true);
  for (int i = 0; i < 8; ++i) {
    const bool dropped = t.data()[i] == 0.0f;
    if (!dropped) CHECK(t.data()[i] == doctest::Approx(x.data()[i] * 2.0f));
  }

  // Fixed mask (rebuilt rng) is differentiable; check vs finite differences.
  Tensor<double> xd = random_tensor({6}, rng);
  const double err = gradient_check({xd}, [&] {
    Rng mask_rng(99);
    return ops::sum(ops::dropout(xd, 0.4, mask_rng, true));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("batchnorm") {
  // Train mode with batch 1 is a usage error.
  ops::BatchNormState<double> state(3);
  Tensor<double> gamma = Tensor<double>::full({3}, 1.0, true);
  Tensor<double> beta = Tensor<double>::zeros({3}, true);
  Tensor<double> one_row = Tensor<double>::zeros({1, 3});
  CHECK_THROWS_AS(ops::batchnorm(one_row, gamma, beta, state, true),
                  UsageError);

  // Train mode normalizes each column to mean 0, unit-ish variance.
  Rng rng(31);
  Tensor<double> x = random_tensor({6, 3}, rng, -2.0, 2.0);
  Tensor<double> y = ops::batchnorm(x, gamma, beta, state, true);
  for (int j = 0; j < 3; ++j) {
    double mean = 0;
    for (int i = 0; i < 6; ++i) mean += y.data()[i * 3 + j];
    CHECK(std::abs(mean / 6.0) < 1e-9);
  }
  // Running statistics moved toward the batch statistics.
  CHECK(state.running_mean[0] != 0.0);

  // Gradients for input, gamma and beta against finite differences, in both
  // modes.
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng trng(900 + trial);
    Tensor<double> xt = random_tensor({5, 2}, trng);
    Tensor<double> g = random_tensor({2}, trng, 0.5, 1.5);
    Tensor<double> bt = random_tensor({2}, trng);
    Tensor<double> mix = random_tensor({5, 2}, trng, -1.0, 1.0, false);
    for (bool train : {true, false}) {
      ops::BatchNormState<double> st(2);
      st.running_mean = {0.3, -0.2};
      st.running_var = {1.5, 0.8};
      const double err = gradient_check({xt, g, bt}, [&] {
        ops::BatchNormState<double> local = st;  // keep stats frozen
        return ops::sum(ops::mul(ops::batchnorm(xt, g, bt, local, train),
                                 mix));
      });
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("cross_entropy examples") {
  // Uniform logits over 7 classes: loss = ln 7.
  Tensor<double> logits = Tensor<double>::zeros({1, 7});
  Tensor<double> loss = ops::cross_entropy(logits, {3});
  CHECK(loss.item() == doctest::Approx(std::log(7.0)).epsilon(1e-9));

  // Confident correct prediction drives the loss toward zero.
  Tensor<double> conf = Tensor<double>::from({1, 3}, {30.0, 0.0, 0.0});
  CHECK(ops::cross_entropy(conf, {0}).item() < 1e-9);

  // Weighted case: (1 * l0 + 3 * l1) / 4, computed against a hand oracle.
  Tensor<double> l2 =
      Tensor<double>::from({2, 2}, {0.7, -0.3, 0.1, 1.9});
  Tensor<double> w = Tensor<double>::from({2}, {1.0, 3.0});
  auto nll = [&](int row, int target) {
    const double a = l2.data()[row * 2], b = l2.data()[row * 2 + 1];
    const double lse = std::log(std::exp(a) + std::exp(b));
    return lse - (target == 0 ? a : b);
  };
  const double expected = (1.0 * nll(0, 0) + 3.0 * nll(1, 1)) / 4.0;
  CHECK(ops::cross_entropy(l2, {0, 1}, w).item() ==
        doctest::Approx(expected).epsilon(1e-12));

  // Plain CE equals WCE with unit weights, exactly.
  Tensor<double> ones = Tensor<double>::full({2}, 1.0);
  CHECK(ops::cross_entropy(l2, {0, 1}).item() ==
        ops::cross_entropy(l2, {0, 1}, ones).item());

  CHECK_THROWS_AS(ops::cross_entropy(l2, {0, 2}), IndexError);
  CHECK_THROWS_AS(ops::cross_entropy(l2, {0, -1}), IndexError);
  Tensor<double> bad_w = Tensor<double>::from({2}, {1.0, 0.0});
  CHECK_THROWS_AS(ops::cross_entropy(l2, {0, 1}, bad_w), ParameterError);
}

TEST_CASE("cross_entropy gradient vs finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(1100 + trial);
    Tensor<double> logits = random_tensor({4, 5}, rng);
    Tensor<double> w = random_tensor({5}, rng, 0.5, 2.0, false);
    const std::vector<int> targets = {0, 3, 1, 4};
    const double err_plain = gradient_check(
        {logits}, [&] { return ops::cross_entropy(logits, targets); });
    const double err_weighted = gradient_check(
        {logits}, [&] { return ops::cross_entropy(logits, targets, w); });
    CHECK(err_plain < 1e-6);
    CHECK(err_weighted < 1e-6);
  }
}

TEST_CASE("misc op gradients vs finite differences") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(1300 + trial);
    Tensor<double> a = random_tensor({3, 4}, rng);
    Tensor<double> b = random_tensor({3, 4}, rng);
    Tensor<double> v = random_tensor({4}, rng);
    Tensor<double> s = random_tensor({}, rng, 0.5, 2.0);
    Tensor<double> x1 = random_tensor({5}, rng);
    Tensor<double> x2 = random_tensor({5}, rng);
    Tensor<double> m3 = random_tensor({2, 3, 4}, rng);

    CHECK(gradient_check({a, b}, [&] {
            return ops::sum(ops::mul(ops::add(a, b), b));
          }) < 1e-6);
    CHECK(gradient_check({a, v}, [&] {
            return ops::sum(ops::add_rowvec(a, v));
          }) < 1e-6);
    CHECK(gradient_check({a, v}, [&] {
            return ops::sum(ops::matvec(a, Tensor<double>(v)));
          }) < 1e-6);
    CHECK(gradient_check({x1, x2}, [&] { return ops::dot(x1, x2); }) < 1e-6);
    CHECK(gradient_check({a, s}, [&] {
            return ops::sum(ops::div_scalar(a, s));
          }) < 1e-6);
    CHECK(gradient_check({a}, [&] {
            return ops::sum(ops::relu(ops::transpose(a)));
          }) < 1e-6);
    CHECK(gradient_check({a}, [&] {
            return ops::sum(ops::slice_cols(a, 1, 3));
          }) < 1e-6);
    CHECK(gradient_check({x1, x2}, [&] {
            return ops::sum(ops::stack_cols<double>({x1, x2}));
          }) < 1e-6);
    CHECK(gradient_check({x1, x2}, [&] {
            return ops::sum(ops::mul(ops::stack_rows<double>({x1, x2}),
                                     ops::stack_rows<double>({x2, x1})));
          }) < 1e-6);
    CHECK(gradient_check({x1, x2}, [&] {
            return ops::sum(ops::concat<double>({x1, x2}));
          }) < 1e-6);
    CHECK(gradient_check({m3}, [&] {
            return ops::sum(ops::relu(ops::fold_time_major(m3)));
          }) < 1e-6);
    Tensor<double> mix = random_tensor({8}, rng, -1.0, 1.0, false);
    CHECK(gradient_check({a}, [&] {
            return ops::sum(ops::mul(ops::mean_std_rows(a), mix));
          }) < 1e-6);
  }
}

TEST_CASE("backward semantics") {
  // loss = sum(p) gives a gradient of ones.
  Tensor<double> p = Tensor<double>::from({3}, {1.0, 2.0, 3.0}, true);
  Tensor<double> loss = ops::sum(p);
  loss.backward();
  for (double g : p.grad()) CHECK(g == 1.0);

  // Two backward calls without zeroing give exactly twice the gradient.
  loss.backward();
  for (double g : p.grad()) CHECK(g == 2.0);

  // A parameter unreachable from the loss never receives a gradient.
  Tensor<double> unused = Tensor<double>::from({2}, {1.0, 1.0}, true);
  CHECK_FALSE(unused.has_grad());

  // backward on a non-scalar is a usage error.
  Tensor<double> vec = ops::scale(p, 2.0);
  CHECK_THROWS_AS(vec.backward(), UsageError);

  // A tensor with requires_grad=false never receives a gradient.
  Tensor<double> frozen = Tensor<double>::from({3}, {1.0, 1.0, 1.0}, false);
  Tensor<double> p2 = Tensor<double>::from({3}, {1.0, 2.0, 3.0}, true);
  ops::sum(ops::mul(frozen, p2)).backward();
  CHECK_FALSE(frozen.has_grad());
  CHECK(p2.has_grad());
}

TEST_CASE("full two-layer network gradient vs finite differences") {
  Rng rng(2026);
  Tensor<double> x = random_tensor({3, 6}, rng, -1.0, 1.0, false);
  Tensor<double> w1 = random_tensor({6, 5}, rng);
  Tensor<double> b1 = random_tensor({5}, rng);
  Tensor<double> w2 = random_tensor({5, 4}, rng);
  Tensor<double> b2 = random_tensor({4}, rng);
  const std::vector<int> targets = {0, 2, 3};
  const double err = gradient_check({w1, b1, w2, b2}, [&] {
    Tensor<double> h = ops::relu(ops::add_rowvec(ops::matmul(x, w1), b1));
    Tensor<double> logits = ops::add_rowvec(ops::matmul(h, w2), b2);
    return ops::cross_entropy(logits, targets);
  });
  CHECK(err < 1e-4);
}

TEST_CASE("determinism: same inputs give bit-identical outputs and grads") {
  auto run = [] {
    Rng rng(42);
    Tensor<double> x = random_tensor({4, 6}, rng, -1.0, 1.0, false);
    Tensor<double> w = random_tensor({6, 3}, rng);
    Tensor<double> loss = ops::cross_entropy(
        ops::matmul(x, w), {0, 1, 2, 0});
    loss.backward();
    return std::make_pair(loss.item(), w.grad());
  };
  const auto [l1, g1] = run();
  const auto [l2, g2] = run();
  CHECK(std::memcmp(&l1, &l2, sizeof(double)) == 0);
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
  Rng rng(77);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  auto rand_vec = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
  };

  const std::int64_t m = 9, k = 17, n = 13;
  const auto a = rand_vec(m * k), b = rand_vec(k * n);
  std::vector<float> o1(m * n, 0.0f), o2(m * n, 0.0f);
  kernels::serial::matmul_nn_acc(a.data(), b.data(), o1.data(), m, k, n);
  kernels::matmul_nn_acc(a.data(), b.data(), o2.data(), m, k, n);
  CHECK(std::memcmp(o1.data(), o2.data(), o1.size() * sizeof(float)) == 0);

  const auto bt = rand_vec(n * k);
  std::fill(o1.begin(), o1.end(), 0.0f);
  std::fill(o2.begin(), o2.end(), 0.0f);
  kernels::serial::matmul_nt_acc(a.data(), bt.data(), o1.data(), m, k, n);
  kernels::matmul_nt_acc(a.data(), bt.data(), o2.data(), m, k, n);
  CHECK(std::memcmp(o1.data(), o2.data(), o1.size() * sizeof(float)) == 0);

  const std::int64_t cin = 3, cout = 4, hh = 7, ww = 6;
  const auto img = rand_vec(cin * hh * ww);
  const auto flt = rand_vec(cout * cin * 9);
  const auto bias = rand_vec(cout);
  std::vector<float> c1(cout * hh * ww), c2(cout * hh * ww);
  kernels::serial::conv3x3_same_fwd(img.data(), flt.data(), bias.data(),
                                    c1.data(), cin, cout, hh, ww);
  kernels::conv3x3_same_fwd(img.data(), flt.data(), bias.data(), c2.data(),
                            cin, cout, hh, ww);
  CHECK(std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);

  std::vector<float> di1(cin * hh * ww, 0.0f), di2(cin * hh * ww, 0.0f);
  kernels::serial::conv3x3_same_bwd_input(c1.data(), flt.data(), di1.data(),
                                          cin, cout, hh, ww);
  kernels::conv3x3_same_bwd_input(c1.data(), flt.data(), di2.data(), cin,
                                  cout, hh, ww);
  CHECK(std::memcmp(di1.data(), di2.data(), di1.size() * sizeof(float)) == 0);

  std::vector<float> dw1(cout * cin * 9, 0.0f), dw2(cout * cin * 9, 0.0f);
  std::vector<float> db1(cout, 0.0f), db2(cout, 0.0f);
  kernels::serial::conv3x3_same_bwd_filters(c1.data(), img.data(), dw1.data(),
                                            db1.data(), cin, cout, hh, ww);
  kernels::conv3x3_same_bwd_filters(c1.data(), img.data(), dw2.data(),
                                    db2.data(), cin, cout, hh, ww);
  CHECK(std::memcmp(dw1.data(), dw2.data(), dw1.size() * sizeof(float)) == 0);
  CHECK(std::memcmp(db1.data(), db2.data(), db1.size() * sizeof(float)) == 0);
}

TEST_CASE("adam") {
  // Zero gradient with zero weight decay leaves parameters untouched.
  std::vector<Parameter<double>> params;
  Tensor<double> p = Tensor<double>::from({3}, {1.0, -2.0, 0.5}, true);
  params.push_back({"p", p});
  AdamOptimizer<double> adam;
  CHECK_THROWS_AS(p.grad(), UsageError);  // no grad yet
  adam.step(params, 0.1, 0.0);            // absent grads are skipped
  CHECK(p.data()[0] == 1.0);
  CHECK(adam.step_count() == 1);

  // lr <= 0 is a parameter error.
  CHECK_THROWS_AS(adam.step(params, 0.0, 0.0), ParameterError);
  CHECK_THROWS_AS(adam.step(params, -1.0, 0.0), ParameterError);

  // First step with constant unit gradient moves by about -lr.
  std::vector<Parameter<double>> single;
  Tensor<double> q = Tensor<double>::from({1}, {2.0}, true);
  single.push_back({"q", q});
  ops::sum(q).backward();  // grad = 1
  AdamOptimizer<double> fresh;
  fresh.step(single, 0.1, 0.0);
  CHECK(q.data()[0] == doctest::Approx(2.0 - 0.1).epsilon(1e-6));

  // Explicit zero gradient (reachable, but zero) leaves the value unchanged.
  std::vector<Parameter<double>> zs;
  Tensor<double> z = Tensor<double>::from({1}, {3.0}, true);
  zs.push_back({"z", z});
  ops::sum(ops::scale(z, 0.0)).backward();
  CHECK(z.grad()[0] == 0.0);
  AdamOptimizer<double> za;
  za.step(zs, 0.1, 0.0);
  CHECK(z.data()[0] == 3.0);

  // Weight decay with zero gradient shrinks |param| monotonically; the
  // whole trajectory must match an independent scalar simulation.
  std::vector<Parameter<double>> ws;
  Tensor<double> wp = Tensor<double>::from({1}, {1.0}, true);
  ws.push_back({"w", wp});
  AdamOptimizer<double> wa;
  double sim_theta = 1.0, sim_m = 0.0, sim_v = 0.0;
  double prev = 1.0;
  for (int step = 1; step <= 20; ++step) {
    ops::sum(ops::scale(wp, 0.0)).backward();
    wa.step(ws, 0.01, 0.1);
    const double g = 0.1 * sim_theta;
    sim_m = 0.9 * sim_m + 0.1 * g;
    sim_v = 0.999 * sim_v + 0.001 * g * g;
    const double mhat = sim_m / (1.0 - std::pow(0.9, step));
    const double vhat = sim_v / (1.0 - std::pow(0.999, step));
    sim_theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(wp.data()[0] == doctest::Approx(sim_theta).epsilon(1e-12));
    CHECK(std::abs(wp.data()[0]) < prev);
    prev = std::abs(wp.data()[0]);
    wp.zero_grad();
  }
}
