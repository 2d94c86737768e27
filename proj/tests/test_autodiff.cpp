#include <doctest.h>

#include "grad_check.hpp"

#include "cosearch/autodiff/adam.hpp"
#include "cosearch/autodiff/checkpoint.hpp"
#include "cosearch/autodiff/ops.hpp"
#include "cosearch/core/errors.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

using namespace cosearch;
using namespace cosearch::ad;
using cosearch::testing::dim;
using cosearch::testing::random_tensor;

namespace {

double inner(const Tensor4& a, const Tensor4& b) {
  return std::inner_product(a.data(), a.data() + a.size(), b.data(), 0.0);
}

}  // namespace

TEST_CASE("conv2d examples") {
  Tape tape(false);
  const Var y = conv2d(tape, constant(Tensor4({1, 1, 1, 1}, 2.0)), constant(Tensor4({1, 1, 1, 1}, 3.0)),
                       constant(Tensor4({1, 1, 1, 1}, 0.0)), 1, 0);
  CHECK(y->value[0] == 6.0);

  std::mt19937_64 rng(1);
  const Var big = conv2d(tape, constant(random_tensor({1, 3, 5, 5}, rng)),
                         constant(random_tensor({3, 3, 3, 3}, rng)), nullptr, 1, 0);
  CHECK(big->value.dims() == Dims4{1, 3, 3, 3});

  CHECK_THROWS_AS(conv2d(tape, constant(Tensor4({1, 2, 5, 5})), constant(Tensor4({3, 3, 3, 3})),
                         nullptr, 1, 0),
                  ShapeError);
}

TEST_CASE("conv2d matches the direct loop definition") {
  std::mt19937_64 rng(7);
  const Tensor4 x = random_tensor({2, 3, 6, 5}, rng);
  const Tensor4 w = random_tensor({4, 3, 3, 2}, rng);
  const Tensor4 b = random_tensor({1, 4, 1, 1}, rng);
  const int stride = 2, pad = 1;
  Tape tape(false);
  const Var y = conv2d(tape, constant(x), constant(w), constant(b), stride, pad);
  const auto& d = y->value.dims();
  CHECK(d == Dims4{2, 4, 3, 3});
  for (int n = 0; n < d.n; ++n)
    for (int m = 0; m < d.c; ++m)
      for (int e = 0; e < d.h; ++e)
        for (int f = 0; f < d.w; ++f) {
          double acc = b[m];
          for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 3; ++r)
              for (int s = 0; s < 2; ++s) {
                const int hi = e * stride + r - pad, wi = f * stride + s - pad;
                if (hi >= 0 && hi < 6 && wi >= 0 && wi < 5) acc += w.at(m, c, r, s) * x.at(n, c, hi, wi);
              }
          CHECK(y->value.at(n, m, e, f) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("transposed_conv2d is the adjoint of conv2d") {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const int c = dim(rng, 1, 4), m = dim(rng, 1, 4), r = dim(rng, 1, 3), s = dim(rng, 1, 3);
    const int stride = dim(rng, 1, 2);
    const Dims4 xd{dim(rng, 1, 2), c, dim(rng, r, 4 + r), dim(rng, s, 4 + s)};
    const Tensor4 x = random_tensor(xd, rng);
    const Tensor4 w = random_tensor({m, c, r, s}, rng);
    Tape tape(false);
    const Var cx = conv2d(tape, constant(x), constant(w), nullptr, stride, 0);
    const Tensor4 yv = random_tensor(cx->value.dims(), rng);
    const Var ty = transposed_conv2d(tape, constant(yv), constant(w), nullptr, stride, 0);
    // With stride > 1 trailing input rows the conv never touches are cut by
    // the adjoint's output size; compare on the shared support.
    const auto& td = ty->value.dims();
    double rhs = 0;
    for (int n = 0; n < td.n; ++n)
      for (int k = 0; k < td.c; ++k)
        for (int h = 0; h < td.h; ++h)
          for (int q = 0; q < td.w; ++q) rhs += x.at(n, k, h, q) * ty->value.at(n, k, h, q);
    const double lhs = inner(cx->value, yv);
    CAPTURE(seed);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("transposed_conv2d with a 1x1 kernel mixes channels pointwise") {
  std::mt19937_64 rng(2);
  const Tensor4 x = random_tensor({1, 3, 4, 4}, rng);
  const Tensor4 w = random_tensor({3, 2, 1, 1}, rng);
  Tape tape(false);
  const Var y = transposed_conv2d(tape, constant(x), constant(w), nullptr, 1, 0);
  CHECK(y->value.dims() == Dims4{1, 2, 4, 4});
  for (int k = 0; k < 2; ++k)
    for (int h = 0; h < 4; ++h) {
      double acc = 0;
      for (int m = 0; m < 3; ++m) acc += w.at(m, k, 0, 0) * x.at(0, m, h, 1);
      CHECK(y->value.at(0, k, h, 1) == doctest::Approx(acc));
    }
}

TEST_CASE("elementwise and pooling examples") {
  Tape tape;
  const Var x = parameter(Tensor4({1, 1, 1, 3}, std::vector<double>{-1, 0, 2}));
  const Var y = relu(tape, x);
  CHECK(y->value[0] == 0.0);
  CHECK(y->value[1] == 0.0);
  CHECK(y->value[2] == 2.0);
  tape.backward(sum(tape, y));
  CHECK(x->grad[0] == 0.0);
  CHECK(x->grad[1] == 0.0);
  CHECK(x->grad[2] == 1.0);

  Tape t2(false);
  const Var p = maxpool2d(t2, constant(Tensor4({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4})), 2, 2);
  CHECK(p->value.dims() == Dims4{1, 1, 1, 1});
  CHECK(p->value[0] == 4.0);

  const Var u = upsample_nearest(t2, constant(Tensor4({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4})), 2);
  CHECK(u->value.dims() == Dims4{1, 1, 4, 4});
  CHECK(u->value.at(0, 0, 0, 1) == 1.0);
  CHECK(u->value.at(0, 0, 1, 1) == 1.0);
  CHECK(u->value.at(0, 0, 3, 2) == 4.0);
  CHECK(u->value.at(0, 0, 2, 1) == 3.0);

  CHECK_THROWS_AS(add(t2, constant(Tensor4({1, 1, 2, 2})), constant(Tensor4({1, 1, 2, 3}))), ShapeError);
}

TEST_CASE("maxpool ties go to the first index") {
  Tape tape;
  const Var x = parameter(Tensor4({1, 1, 2, 2}, std::vector<double>{5, 5, 5, 5}));
  tape.backward(sum(tape, maxpool2d(tape, x, 2, 2)));
  CHECK(x->grad[0] == 1.0);
  CHECK(x->grad[1] == 0.0);
  CHECK(x->grad[3] == 0.0);
}

TEST_CASE("finite-difference gradient checks, 20 seeds per op") {
  for (const auto& c : cosearch::testing::gradient_cases()) {
    const double worst = cosearch::testing::worst_gradient_error(c, 20);
    CAPTURE(c.name);
    MESSAGE(std::string(c.name) << " worst rel err " << worst);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("gumbel_softmax weights") {
  std::mt19937_64 rng(4);
  Tape tape(false);
  const Var logits = constant(Tensor4({1, 1, 1, 5}, std::vector<double>{0.3, -1, 2, 0, 0.5}));
  for (int i = 0; i < 100; ++i) {
    const Var w = gumbel_softmax(tape, logits, sample_gumbels(rng, 5), 1.0);
    double total = 0;
    for (double v : w->value.values()) {
      CHECK(v > 0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(gumbel_softmax(tape, logits, {}, 0.0), ParameterError);
}

TEST_CASE("gumbel-max frequencies follow softmax(logits)") {
  std::mt19937_64 rng(123);
  Tape tape(false);
  const Var logits = constant(Tensor4({1, 1, 1, 2}, std::vector<double>{std::log(0.9), std::log(0.1)}));
  int first = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const Var w = gumbel_softmax(tape, logits, sample_gumbels(rng, 2), 1.0);
    if (w->value[0] > w->value[1]) ++first;
  }
  CHECK(std::abs(first / double(draws) - 0.9) < 0.01);
}

TEST_CASE("low temperature gives near one-hot weights") {
  // At tau = 0.01 a draw is soft only when the top two perturbed logits are
  // within 0.01 * log(999) of each other; with a logit gap of 4 that happens
  // in roughly 0.3% of draws.
  std::mt19937_64 rng(5);
  Tape tape(false);
  const Var logits = constant(Tensor4({1, 1, 1, 4}, std::vector<double>{4.0, 0.0, -1.0, -2.0}));
  int sharp = 0;
  for (int i = 0; i < 10000; ++i) {
    const Var w = gumbel_softmax(tape, logits, sample_gumbels(rng, 4), 0.01);
    if (*std::max_element(w->value.data(), w->value.data() + 4) > 0.999) ++sharp;
  }
  CHECK(sharp >= 9900);
}

TEST_CASE("pearson_loss examples") {
  std::mt19937_64 rng(6);
  const Tensor4 t = random_tensor({2, 3, 4, 4}, rng);
  Tensor4 neg = t;
  for (auto& v : neg.values()) v = -v;
  Tape tape(false);
  CHECK(pearson_loss(tape, constant(t), constant(t)).loss->value[0] == doctest::Approx(-1.0));
  CHECK(pearson_loss(tape, constant(neg), constant(t)).loss->value[0] == doctest::Approx(1.0));
  const auto deg = pearson_loss(tape, constant(t), constant(Tensor4(t.dims(), 1.0)));
  CHECK(deg.degenerate);
  CHECK(deg.loss->value[0] == 0.0);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient and no decay leaves parameters alone") {
    const Var p = parameter(Tensor4({1, 1, 1, 3}, std::vector<double>{1, -2, 3}));
    Adam opt({p}, {});
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(p->value[0] == 1.0);
    CHECK(p->value[1] == -2.0);
    CHECK(p->value[2] == 3.0);
  }
  SUBCASE("first step moves each element by lr") {
    const Var p = parameter(Tensor4({1, 1, 1, 3}, std::vector<double>{1, -2, 3}));
    p->grad = Tensor4({1, 1, 1, 3}, std::vector<double>{0.5, -3, 0.02});
    AdamConfig cfg;
    cfg.lr = 1e-3;
    Adam opt({p}, cfg);
    opt.step();
    CHECK(std::abs(std::abs(p->value[0] - 1.0) - 1e-3) < 1e-9);
    CHECK(std::abs(std::abs(p->value[1] + 2.0) - 1e-3) < 1e-9);
    CHECK(std::abs(std::abs(p->value[2] - 3.0) - 1e-3) < 1e-9);
    CHECK(opt.state().t == 1);
  }
  SUBCASE("descends x^2") {
    const Var p = parameter(Tensor4({1, 1, 1, 1}, 1.0));
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam opt({p}, cfg);
    double prev = 1.0;
    for (int i = 0; i < 2; ++i) {
      opt.zero_grad();
      p->grad_buffer()[0] = 2 * p->value[0];
      opt.step();
      CHECK(p->value[0] * p->value[0] < prev);
      prev = p->value[0] * p->value[0];
    }
  }
  SUBCASE("decoupled weight decay shrinks with zero gradient") {
    const Var p = parameter(Tensor4({1, 1, 1, 1}, 2.0));
    AdamConfig cfg;
    cfg.weight_decay = 1e-3;
    Adam opt({p}, cfg);
    opt.step();
    CHECK(p->value[0] == doctest::Approx(2.0 * (1 - 1e-3 * 1e-3)));
  }
}

TEST_CASE("forward evaluation is bit-deterministic") {
  auto run = [] {
    std::mt19937_64 rng(77);
    const Var x = constant(random_tensor({2, 3, 6, 6}, rng));
    const Var w = parameter(random_tensor({4, 3, 3, 3}, rng));
    Tape tape;
    const Var y = relu(tape, conv2d(tape, x, w, nullptr, 1, 1));
    return y->value;
  };
  const Tensor4 a = run(), b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(12);
  NamedTensors params{{"stem.w", random_tensor({2, 3, 3, 3}, rng)}, {"stem.b", random_tensor({1, 2, 1, 1}, rng)}};
  const auto stem = std::filesystem::temp_directory_path() / "cosearch_ckpt_test";
  save_checkpoint(stem, params);
  const auto back = load_checkpoint(stem);
  REQUIRE(back.size() == 2);
  CHECK(back[1].first == "stem.b");
  CHECK(back[0].second.dims() == params[0].second.dims());
  CHECK(std::memcmp(back[0].second.data(), params[0].second.data(), params[0].second.size() * 8) == 0);
}
