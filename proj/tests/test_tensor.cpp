#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdk/layers.hpp"
#include "fdk/rng.hpp"
#include "fdk/tensor.hpp"
#include "oracles.hpp"

using fdk::ConvParams;
using fdk::Padding;
using fdk::PoolParams;
using fdk::Shape4;
using fdk::Tensor;

namespace {

Tensor random_tensor(Shape4 s, fdk::Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = lo + static_cast<float>(rng.uniform()) * (hi - lo);
  return t;
}

std::vector<float> random_vec(std::size_t n, fdk::Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
  return v;
}

ConvParams random_conv(int c_in, int kh, int kw, int c_out, int sh, int sw, Padding pad,
                       fdk::Rng& rng) {
  ConvParams p;
  p.kh = kh;
  p.kw = kw;
  p.c_in = c_in;
  p.c_out = c_out;
  p.sh = sh;
  p.sw = sw;
  p.pad = pad;
  p.weights = random_vec(static_cast<std::size_t>(kh) * kw * c_in * c_out, rng);
  p.bias = random_vec(c_out, rng);
  return p;
}

}  // namespace

TEST_CASE("conv2d identity kernel") {
  fdk::Rng rng(11);
  Tensor x = random_tensor({1, 3, 3, 1}, rng);
  ConvParams p;
  p.weights = {1.0f};
  p.bias = {0.0f};
  Tensor y = fdk::conv2d(x, p);
  CHECK(y.same_bits(x));
}

TEST_CASE("conv2d bias broadcast on zero input") {
  Tensor x({1, 4, 4, 2});
  ConvParams p;
  p.kh = 3;
  p.kw = 3;
  p.c_in = 2;
  p.c_out = 1;
  p.pad = Padding::kSame;
  p.weights.assign(3 * 3 * 2 * 1, 0.7f);
  p.bias = {5.0f};
  Tensor y = fdk::conv2d(x, p);
  CHECK(y.shape() == Shape4{1, 4, 4, 1});
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 5.0f);
}

TEST_CASE("conv2d matches nested-loop oracle, strided SAME") {
  fdk::Rng rng(101);
  Tensor x = random_tensor({2, 8, 8, 3}, rng);
  ConvParams p = random_conv(3, 3, 3, 4, 2, 2, Padding::kSame, rng);
  Tensor got = fdk::conv2d(x, p);
  Tensor want = oracle::conv2d_ref(x, p.weights, p.bias, 3, 3, 4, 2, 2, true);
  CHECK(got.shape() == want.shape());
  CHECK(oracle::max_abs_diff(got, want) < 1e-5);
}

TEST_CASE("conv2d is linear in its input with zero bias") {
  fdk::Rng rng(7);
  Tensor x = random_tensor({1, 6, 6, 2}, rng);
  Tensor y = random_tensor({1, 6, 6, 2}, rng);
  ConvParams p = random_conv(2, 3, 3, 3, 1, 1, Padding::kValid, rng);
  p.bias.assign(3, 0.0f);
  const float alpha = 1.7f, beta = -0.4f;
  Tensor mix({1, 6, 6, 2});
  for (std::int64_t i = 0; i < mix.numel(); ++i)
    mix.data()[i] = alpha * x.data()[i] + beta * y.data()[i];
  Tensor lhs = fdk::conv2d(mix, p);
  Tensor cx = fdk::conv2d(x, p);
  Tensor cy = fdk::conv2d(y, p);
  for (std::int64_t i = 0; i < lhs.numel(); ++i) {
    double want = alpha * static_cast<double>(cx.data()[i]) + beta * cy.data()[i];
    CHECK(std::abs(lhs.data()[i] - want) <=
          1e-4 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("conv2d error paths") {
  fdk::Rng rng(3);
  Tensor x = random_tensor({1, 4, 4, 2}, rng);
  ConvParams wrong_c = random_conv(3, 1, 1, 1, 1, 1, Padding::kValid, rng);
  CHECK_THROWS_WITH_AS(fdk::conv2d(x, wrong_c), doctest::Contains("ChannelMismatch"),
                       fdk::Error);

  ConvParams too_big = random_conv(2, 5, 5, 1, 1, 1, Padding::kValid, rng);
  CHECK_THROWS_WITH_AS(fdk::conv2d(x, too_big), doctest::Contains("EmptyOutput"), fdk::Error);

  Tensor bad = x;
  bad.data()[0] = std::numeric_limits<float>::quiet_NaN();
  ConvParams ok = random_conv(2, 1, 1, 1, 1, 1, Padding::kValid, rng);
  CHECK_THROWS_AS(fdk::conv2d(bad, ok), fdk::Error);
}

TEST_CASE("relu definition and idempotence") {
  Tensor x({1, 1, 1, 3}, {-1.0f, 0.0f, 2.5f});
  Tensor y = fdk::relu(x);
  CHECK(y.values() == std::vector<float>{0.0f, 0.0f, 2.5f});

  fdk::Rng rng(5);
  Tensor r = random_tensor({1, 4, 4, 2}, rng, 0.0f, 3.0f);
  CHECK(fdk::relu(r).same_bits(r));
  Tensor once = fdk::relu(random_tensor({2, 3, 3, 2}, rng));
  CHECK(fdk::relu(once).same_bits(once));
}

TEST_CASE("relu matches elementwise oracle exactly") {
  fdk::Rng rng(19);
  Tensor x = random_tensor({2, 5, 5, 3}, rng, -2.0f, 2.0f);
  Tensor y = fdk::relu(x);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == std::max(0.0f, x.data()[i]));
  Tensor nan = x;
  nan.data()[3] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_WITH_AS(fdk::relu(nan), doctest::Contains("NonFiniteInput"), fdk::Error);
}

TEST_CASE("tanh odd function, antisymmetry, bounded") {
  Tensor zero({1, 1, 1, 1}, {0.0f});
  CHECK(fdk::tanh_act(zero).data()[0] == 0.0f);

  fdk::Rng rng(23);
  Tensor x = random_tensor({1, 4, 4, 2}, rng, -3.0f, 3.0f);
  Tensor neg = x;
  for (std::int64_t i = 0; i < neg.numel(); ++i) neg.data()[i] = -neg.data()[i];
  Tensor tx = fdk::tanh_act(x);
  Tensor tn = fdk::tanh_act(neg);
  for (std::int64_t i = 0; i < tx.numel(); ++i) {
    CHECK(tx.data()[i] == doctest::Approx(-tn.data()[i]).epsilon(1e-6));
    CHECK(std::abs(tx.data()[i]) < 1.0f);
    CHECK(tx.data()[i] ==
          doctest::Approx(std::tanh(static_cast<double>(x.data()[i]))).epsilon(1e-6));
  }
}

TEST_CASE("pooling degenerate 1x1 window is identity") {
  fdk::Rng rng(31);
  Tensor x = random_tensor({1, 5, 5, 2}, rng);
  PoolParams p;  // 1x1 window, stride 1, VALID
  CHECK(fdk::max_pool(x, p).same_bits(x));
  CHECK(fdk::avg_pool(x, p).same_bits(x));
}

TEST_CASE("pooling single hand-computed window") {
  Tensor x({1, 2, 2, 1}, {1.0f, 2.0f, 3.0f, 4.0f});
  PoolParams p;
  p.ph = p.pw = 2;
  p.sh = p.sw = 2;
  Tensor mx = fdk::max_pool(x, p);
  Tensor av = fdk::avg_pool(x, p);
  CHECK(mx.shape() == Shape4{1, 1, 1, 1});
  CHECK(mx.data()[0] == 4.0f);
  CHECK(av.data()[0] == 2.5f);
}

TEST_CASE("pooling matches nested-loop oracle, SAME with excluded padding") {
  fdk::Rng rng(37);
  Tensor x = random_tensor({1, 7, 7, 2}, rng);
  PoolParams p;
  p.ph = p.pw = 3;
  p.sh = p.sw = 2;
  p.pad = Padding::kSame;
  CHECK(oracle::max_abs_diff(fdk::max_pool(x, p), oracle::pool_ref(x, 3, 3, 2, 2, true, true)) ==
        0.0);
  CHECK(oracle::max_abs_diff(fdk::avg_pool(x, p), oracle::pool_ref(x, 3, 3, 2, 2, true, false)) <
        1e-6);
}

TEST_CASE("pooling VALID window larger than input is an error") {
  Tensor x({1, 2, 2, 1});
  PoolParams p;
  p.ph = p.pw = 3;
  CHECK_THROWS_WITH_AS(fdk::max_pool(x, p), doctest::Contains("EmptyOutput"), fdk::Error);
}

TEST_CASE("concat_channels") {
  fdk::Rng rng(41);
  Tensor a = random_tensor({1, 2, 2, 3}, rng);
  SUBCASE("single input is identity") {
    CHECK(fdk::concat_channels({a}).same_bits(a));
  }
  SUBCASE("two scalars") {
    Tensor x({1, 1, 1, 1}, {4.0f});
    Tensor y({1, 1, 1, 1}, {9.0f});
    Tensor z = fdk::concat_channels({x, y});
    CHECK(z.shape() == Shape4{1, 1, 1, 2});
    CHECK(z.values() == std::vector<float>{4.0f, 9.0f});
  }
  SUBCASE("three inputs round-trip by channel slicing") {
    Tensor b = random_tensor({1, 2, 2, 1}, rng);
    Tensor c = random_tensor({1, 2, 2, 4}, rng);
    Tensor z = fdk::concat_channels({a, b, c});
    CHECK(z.shape().c == 8);
    const Tensor* parts[] = {&a, &b, &c};
    int base = 0;
    for (const Tensor* part : parts) {
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < part->shape().c; ++k)
            CHECK(z.at(0, i, j, base + k) == part->at(0, i, j, k));
      base += part->shape().c;
    }
  }
  SUBCASE("spatial mismatch rejected") {
    Tensor bad({1, 3, 2, 1});
    CHECK_THROWS_WITH_AS(fdk::concat_channels({a, bad}), doctest::Contains("ShapeMismatch"),
                         fdk::Error);
  }
}

TEST_CASE("fully_connected") {
  SUBCASE("identity map") {
    Eigen::VectorXf x(3);
    x << 1.0f, -2.0f, 0.5f;
    Eigen::MatrixXf W = Eigen::MatrixXf::Identity(3, 3);
    Eigen::VectorXf b = Eigen::VectorXf::Zero(3);
    CHECK(fdk::fully_connected(x, W, b) == x);
  }
  SUBCASE("bias only") {
    Eigen::VectorXf x = Eigen::VectorXf::Zero(4);
    Eigen::MatrixXf W = Eigen::MatrixXf::Random(2, 4);
    Eigen::VectorXf b(2);
    b << 3.0f, -1.0f;
    CHECK(fdk::fully_connected(x, W, b) == b);
  }
  SUBCASE("matches double-loop oracle") {
    fdk::Rng rng(43);
    const int D = 16, K = 5;
    std::vector<float> xv = random_vec(D, rng), wv = random_vec(K * D, rng),
                       bv = random_vec(K, rng);
    Eigen::VectorXf x = Eigen::Map<Eigen::VectorXf>(xv.data(), D);
    Eigen::MatrixXf W(K, D);
    for (int r = 0; r < K; ++r)
      for (int c = 0; c < D; ++c) W(r, c) = wv[static_cast<std::size_t>(r) * D + c];
    Eigen::VectorXf b = Eigen::Map<Eigen::VectorXf>(bv.data(), K);
    Eigen::VectorXf got = fdk::fully_connected(x, W, b);
    std::vector<float> want = oracle::fc_ref(xv, wv, bv, K, D);
    for (int r = 0; r < K; ++r) CHECK(got[r] == doctest::Approx(want[r]).epsilon(1e-6));
  }
  SUBCASE("dimension mismatch") {
    Eigen::VectorXf x = Eigen::VectorXf::Zero(3);
    Eigen::MatrixXf W = Eigen::MatrixXf::Zero(2, 4);
    Eigen::VectorXf b = Eigen::VectorXf::Zero(2);
    CHECK_THROWS_WITH_AS(fdk::fully_connected(x, W, b), doctest::Contains("DimensionMismatch"),
                         fdk::Error);
  }
}

TEST_CASE("dropout") {
  fdk::Rng rng(47);
  Tensor x = random_tensor({1, 10, 10, 4}, rng);
  SUBCASE("INFER is the exact identity for all rates") {
    for (float rate : {0.0f, 0.3f, 0.99f}) {
      fdk::Rng r(1);
      CHECK(fdk::dropout(x, rate, fdk::DropoutMode::kInfer, r).same_bits(x));
    }
  }
  SUBCASE("rate 0 TRAIN is the identity") {
    fdk::Rng r(1);
    CHECK(fdk::dropout(x, 0.0f, fdk::DropoutMode::kTrain, r).same_bits(x));
  }
  SUBCASE("rate 0.5 surviving fraction and scaling") {
    Tensor ones({1, 100, 100, 1}, std::vector<float>(10000, 1.0f));
    fdk::Rng r(1234);
    Tensor y = fdk::dropout(ones, 0.5f, fdk::DropoutMode::kTrain, r);
    int survivors = 0;
    for (std::int64_t i = 0; i < y.numel(); ++i) {
      if (y.data()[i] != 0.0f) {
        CHECK(y.data()[i] == 2.0f);
        ++survivors;
      }
    }
    double frac = survivors / 10000.0;
    CHECK(frac >= 0.45);
    CHECK(frac <= 0.55);
  }
  SUBCASE("invalid rate") {
    fdk::Rng r(1);
    CHECK_THROWS_WITH_AS(fdk::dropout(x, 1.0f, fdk::DropoutMode::kTrain, r),
                         doctest::Contains("InvalidRate"), fdk::Error);
  }
}

TEST_CASE("softmax") {
  SUBCASE("uniform by symmetry") {
    Eigen::VectorXf z = Eigen::VectorXf::Zero(3);
    Eigen::VectorXf p = fdk::softmax(z);
    for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }
  SUBCASE("max-subtraction keeps large logits finite") {
    Eigen::VectorXf z(2);
    z << 1000.0f, 0.0f;
    Eigen::VectorXf p = fdk::softmax(z);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(std::isfinite(p[0]));
  }
  SUBCASE("shift invariance and normalization") {
    fdk::Rng rng(53);
    Eigen::VectorXf z(6);
    for (int i = 0; i < 6; ++i) z[i] = static_cast<float>(rng.uniform() * 4.0 - 2.0);
    Eigen::VectorXf p = fdk::softmax(z);
    Eigen::VectorXf q = fdk::softmax((z.array() + 37.5f).matrix());
    CHECK(std::abs(p.sum() - 1.0f) < 1e-6);
    for (int i = 0; i < 6; ++i) {
      CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-6));
      CHECK(p[i] > 0.0f);
      CHECK(p[i] <= 1.0f);
    }
  }
  SUBCASE("non-finite logits rejected") {
    Eigen::VectorXf z(2);
    z << std::numeric_limits<float>::infinity(), 0.0f;
    CHECK_THROWS_WITH_AS(fdk::softmax(z), doctest::Contains("NonFiniteInput"), fdk::Error);
  }
}

TEST_CASE("shape algebra matches closed form over randomized shapes") {
  fdk::Rng rng(59);
  for (int trial = 0; trial < 60; ++trial) {
    int h = 1 + static_cast<int>(rng.below(12));
    int w = 1 + static_cast<int>(rng.below(12));
    int c = 1 + static_cast<int>(rng.below(3));
    int kh = 1 + static_cast<int>(rng.below(4));
    int kw = 1 + static_cast<int>(rng.below(4));
    int sh = 1 + static_cast<int>(rng.below(3));
    int sw = 1 + static_cast<int>(rng.below(3));
    Tensor x = random_tensor({1, h, w, c}, rng);

    // SAME is always defined
    ConvParams cp = random_conv(c, kh, kw, 2, sh, sw, Padding::kSame, rng);
    Tensor y = fdk::conv2d(x, cp);
    CHECK(y.shape().h == (h + sh - 1) / sh);
    CHECK(y.shape().w == (w + sw - 1) / sw);
    CHECK(y.shape().c == 2);

    PoolParams pp;
    pp.ph = kh;
    pp.pw = kw;
    pp.sh = sh;
    pp.sw = sw;
    pp.pad = Padding::kSame;
    CHECK(fdk::max_pool(x, pp).shape().h == (h + sh - 1) / sh);

    if (h >= kh && w >= kw) {
      cp.pad = Padding::kValid;
      Tensor v = fdk::conv2d(x, cp);
      CHECK(v.shape().h == (h - kh) / sh + 1);
      CHECK(v.shape().w == (w - kw) / sw + 1);
      pp.pad = Padding::kValid;
      CHECK(fdk::avg_pool(x, pp).shape().w == (w - kw) / sw + 1);
    }
  }
}

TEST_CASE("randomized oracle agreement across ops") {
  fdk::Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 1 + static_cast<int>(rng.below(2));
    int h = 2 + static_cast<int>(rng.below(7));
    int w = 2 + static_cast<int>(rng.below(7));
    int c = 1 + static_cast<int>(rng.below(4));
    int kh = 1 + static_cast<int>(rng.below(std::min(3, h)));
    int kw = 1 + static_cast<int>(rng.below(std::min(3, w)));
    int sh = 1 + static_cast<int>(rng.below(2));
    int sw = 1 + static_cast<int>(rng.below(2));
    bool same = rng.below(2) == 0;
    Tensor x = random_tensor({n, h, w, c}, rng);

    ConvParams cp = random_conv(c, kh, kw, 1 + static_cast<int>(rng.below(4)), sh, sw,
                                same ? Padding::kSame : Padding::kValid, rng);
    Tensor got = fdk::conv2d(x, cp);
    Tensor want = oracle::conv2d_ref(x, cp.weights, cp.bias, kh, kw, cp.c_out, sh, sw, same);
    CHECK(oracle::max_abs_diff(got, want) < 1e-5);

    PoolParams pp;
    pp.ph = kh;
    pp.pw = kw;
    pp.sh = sh;
    pp.sw = sw;
    pp.pad = same ? Padding::kSame : Padding::kValid;
    CHECK(oracle::max_abs_diff(fdk::max_pool(x, pp),
                               oracle::pool_ref(x, kh, kw, sh, sw, same, true)) < 1e-5);
    CHECK(oracle::max_abs_diff(fdk::avg_pool(x, pp),
                               oracle::pool_ref(x, kh, kw, sh, sw, same, false)) < 1e-5);
  }
}
