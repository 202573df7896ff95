#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "dlnlab/checkpoint.hpp"
#include "dlnlab/optim.hpp"
#include "dlnlab/tensor.hpp"
#include "test_util.hpp"

using namespace dlnlab;
using testutil::max_grad_rel_error;
using testutil::random_array;

namespace {
constexpr double kOpTol = 1e-5;
}

TEST_CASE("matmul forward identity and shape checks") {
  Tape tape;
  Array eye = Array::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Rng rng(1);
  const Array a = random_array({3, 4}, rng);
  Tensor out = tape.matmul(tape.constant(eye), tape.constant(a));
  CHECK(out.value().data == a.data);
  CHECK_THROWS_AS(tape.matmul(tape.constant(Array::zeros({2, 3})),
                              tape.constant(Array::zeros({2, 3}))),
                  ShapeMismatch);
}

TEST_CASE("softmax rows sum to one and handle uniform input") {
  Tape tape;
  Tensor s = tape.softmax(tape.constant(Array::zeros({1, 3})));
  for (int j = 0; j < 3; ++j) {
    CHECK(std::fabs(s.value().at(0, j) - 1.0 / 3.0) <= 1e-15);
  }
  Rng rng(2);
  Tensor r = tape.softmax(tape.constant(random_array({6, 9}, rng, 30.0)));
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 9; ++j) {
      sum += r.value().at(i, j);
      CHECK(std::isfinite(r.value().at(i, j)));
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("every differentiable op matches central differences") {
  Rng rng(42);
  const auto start = std::chrono::steady_clock::now();

  Parameter a("a", random_array({3, 4}, rng));
  Parameter b("b", random_array({4, 5}, rng));
  Parameter c("c", random_array({3, 4}, rng));
  Parameter bias("bias", random_array({1, 4}, rng));
  Parameter gain("gain", random_array({1, 4}, rng, 0.5));
  Parameter table("table", random_array({6, 4}, rng));

  SUBCASE("matmul") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          return t.sum(t.matmul(t.input(a), t.input(b)));
        },
        {&a, &b});
    CHECK(err <= kOpTol);
  }
  SUBCASE("transpose and scale") {
    const double err = max_grad_rel_error(
        [&](Tape& t) { return t.sum(t.scale(t.transpose(t.input(a)), -2.5)); },
        {&a});
    CHECK(err <= kOpTol);
  }
  SUBCASE("add with bias-row broadcast") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          return t.sum(t.mul(t.add(t.input(a), t.input(bias)), t.input(c)));
        },
        {&a, &bias, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("sub and mul") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          return t.sum(t.mul(t.sub(t.input(a), t.input(c)), t.input(a)));
        },
        {&a, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("concat and slice") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          Tensor rows = t.concat_rows({t.input(a), t.input(c)});
          Tensor cols = t.concat_cols({t.input(a), t.input(c)});
          Tensor s1 = t.slice_rows(rows, 1, 4);
          Tensor s2 = t.slice_cols(cols, 2, 7);
          return t.add(t.sum(t.mul(s1, s1)), t.sum(t.mul(s2, s2)));
        },
        {&a, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("gather rows") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          Tensor g = t.gather_rows(t.input(table), {0, 3, 3, 5});
          return t.sum(t.mul(g, g));
        },
        {&table});
    CHECK(err <= kOpTol);
  }
  SUBCASE("softmax") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          Tensor s = t.softmax(t.input(a));
          return t.sum(t.mul(s, t.input(c)));
        },
        {&a, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("relu tanh sigmoid") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          Tensor x = t.tanh(t.input(a));
          x = t.sigmoid(x);
          x = t.relu(t.sub(x, t.scale(t.input(c), 0.1)));
          return t.sum(x);
        },
        {&a, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("abs") {
    const double err = max_grad_rel_error(
        [&](Tape& t) { return t.sum(t.abs(t.input(a))); }, {&a});
    CHECK(err <= kOpTol);
  }
  SUBCASE("layer_norm") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          Tensor ln = t.layer_norm(t.input(a), t.input(gain), t.input(bias));
          return t.sum(t.mul(ln, t.input(c)));
        },
        {&a, &gain, &bias, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("mean") {
    const double err = max_grad_rel_error(
        [&](Tape& t) { return t.mean(t.mul(t.input(a), t.input(a))); }, {&a});
    CHECK(err <= kOpTol);
  }
  SUBCASE("mse") {
    const double err = max_grad_rel_error(
        [&](Tape& t) { return t.mse_loss(t.input(a), t.input(c)); }, {&a, &c});
    CHECK(err <= kOpTol);
  }
  SUBCASE("cross_entropy") {
    const double err = max_grad_rel_error(
        [&](Tape& t) {
          return t.cross_entropy(t.matmul(t.input(a), t.input(b)), {1, 0, 4});
        },
        {&a, &b});
    CHECK(err <= kOpTol);
  }

  const double sec = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  CHECK(sec < 60.0);
}

TEST_CASE("abs subgradient at zero is zero") {
  Tape tape;
  Parameter p("p", Array({1, 3}, {-2.0, 0.0, 3.0}));
  Tensor loss = tape.sum(tape.abs(tape.input(p)));
  tape.backward(loss);
  CHECK(p.grad.data[0] == -1.0);
  CHECK(p.grad.data[1] == 0.0);
  CHECK(p.grad.data[2] == 1.0);
}

TEST_CASE("mse matches brute-force recomputation") {
  Rng rng(77);
  const Array pa = random_array({4, 6}, rng);
  const Array ta = random_array({4, 6}, rng);
  Tape tape;
  const double got =
      tape.mse_loss(tape.constant(pa), tape.constant(ta)).item();
  double expect = 0.0;
  for (size_t k = 0; k < pa.data.size(); ++k) {
    const double d = pa.data[k] - ta.data[k];
    expect += d * d;
  }
  expect /= static_cast<double>(pa.data.size());
  CHECK(std::fabs(got - expect) <= 1e-12);

  Tape t2;
  CHECK(t2.mse_loss(t2.constant(pa), t2.constant(pa)).item() == 0.0);
  Tape t3;
  Array shifted = pa;
  for (auto& v : shifted.data) v += 0.5;
  CHECK(std::fabs(t3.mse_loss(t3.constant(shifted), t3.constant(pa)).item() -
                  0.25) <= 1e-12);
}

TEST_CASE("cross entropy matches the direct formula") {
  Tape tape;
  // uniform logits over V classes -> log V
  const int v = 7;
  CHECK(std::fabs(tape.cross_entropy(tape.constant(Array::zeros({3, v})),
                                     {0, 3, 6})
                      .item() -
                  std::log(static_cast<double>(v))) <= 1e-12);

  // huge margin at the target -> ~0
  Array peaked = Array::zeros({1, 4});
  peaked.at(0, 2) = 100.0;
  Tape t2;
  CHECK(t2.cross_entropy(t2.constant(peaked), {2}).item() <= 1e-12);

  // random case vs direct computation
  Rng rng(11);
  const Array logits = random_array({5, 9}, rng, 3.0);
  const std::vector<int> targets = {1, 0, 8, 4, 4};
  Tape t3;
  const double got = t3.cross_entropy(t3.constant(logits), targets).item();
  double expect = 0.0;
  for (int i = 0; i < 5; ++i) {
    double denom = 0.0;
    for (int j = 0; j < 9; ++j) denom += std::exp(logits.at(i, j));
    expect -= logits.at(i, targets[static_cast<size_t>(i)]) - std::log(denom);
  }
  expect /= 5.0;
  CHECK(std::fabs(got - expect) <= 1e-10);

  Tape t4;
  CHECK_THROWS_AS(t4.cross_entropy(t4.constant(Array::zeros({1, 3})), {3}),
                  IndexOutOfRange);
}

TEST_CASE("backward basics") {
  SUBCASE("d(x*x)/dx = 2x") {
    Parameter x("x", Array::scalar(3.0));
    Tape tape;
    Tensor xi = tape.input(x);
    tape.backward(tape.mul(xi, xi));
    CHECK(x.grad.data[0] == 6.0);
  }
  SUBCASE("unreachable parameters get zero gradient") {
    Parameter x("x", Array::scalar(3.0));
    Parameter y("y", Array::scalar(4.0));
    Tape tape;
    Tensor xi = tape.input(x);
    tape.input(y);  // on tape, not part of the loss
    tape.backward(tape.mul(xi, xi));
    CHECK(y.grad.data[0] == 0.0);
  }
  SUBCASE("backward requires a scalar") {
    Tape tape;
    Tensor m = tape.constant(Array::zeros({2, 2}));
    CHECK_THROWS_AS(tape.backward(m), NotScalar);
  }
  SUBCASE("accumulation is linear over shared graphs") {
    Rng rng(3);
    Parameter x("x", random_array({2, 3}, rng));
    auto grad_of = [&](double wa, double wb) {
      x.zero_grad();
      Tape tape;
      Tensor xi = tape.input(x);
      Tensor l1 = tape.sum(tape.mul(xi, xi));
      Tensor l2 = tape.sum(tape.tanh(xi));
      tape.backward(tape.add(tape.scale(l1, wa), tape.scale(l2, wb)));
      return x.grad;
    };
    const Array ga = grad_of(1.0, 0.0);
    const Array gb = grad_of(0.0, 1.0);
    const Array gc = grad_of(2.0, -3.0);
    for (size_t k = 0; k < gc.data.size(); ++k) {
      CHECK(std::fabs(gc.data[k] - (2.0 * ga.data[k] - 3.0 * gb.data[k])) <=
            1e-12);
    }
  }
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Rng rng(5);
  Parameter p("p", random_array({2, 2}, rng));
  const Array before = p.value;
  Adam opt({&p}, AdamConfig{});
  opt.zero_grad();
  opt.step();
  CHECK(p.value.data == before.data);
}

TEST_CASE("adam first step magnitude is about the learning rate") {
  Parameter p("p", Array({1, 3}, {1.0, -2.0, 0.5}));
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam opt({&p}, cfg);
  p.grad = Array({1, 3}, {0.3, -0.7, 10.0});
  const Array before = p.value;
  opt.step();
  CHECK(opt.step_count() == 1);
  for (size_t k = 0; k < 3; ++k) {
    const double move = p.value.data[k] - before.data[k];
    // bias-corrected first step: lr * g / (|g| + eps) = lr * sign(g)
    CHECK(std::fabs(std::fabs(move) - cfg.lr) <= 1e-6);
    CHECK(move * p.grad.data[k] < 0.0);
  }
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    Rng rng(9);
    Parameter p("p", random_array({3, 3}, rng));
    Adam opt({&p}, AdamConfig{1e-2, 0.9, 0.999, 1e-8});
    for (int step = 0; step < 25; ++step) {
      opt.zero_grad();
      Tape tape;
      Tensor x = tape.input(p);
      tape.backward(tape.sum(tape.mul(x, x)));
      opt.step();
    }
    return p.value;
  };
  const Array a = run();
  const Array b = run();
  CHECK(a.data == b.data);
}

TEST_CASE("adam descends on a quadratic") {
  Parameter p("p", Array({1, 2}, {5.0, -4.0}));
  Adam opt({&p}, AdamConfig{0.05, 0.9, 0.999, 1e-8});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 300; ++step) {
    opt.zero_grad();
    Tape tape;
    Tensor x = tape.input(p);
    Tensor loss = tape.sum(tape.mul(x, x));
    if (step == 0) first = loss.item();
    last = loss.item();
    tape.backward(loss);
    opt.step();
  }
  CHECK(last < 1e-2 * first);
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
  Rng rng(31);
  Checkpoint ck;
  ck.meta["kind"] = "test";
  ck.set_meta_double("lr", 1e-4);
  const Array a = random_array({7, 3}, rng);
  Array weird = random_array({2, 2}, rng);
  weird.data[0] = 1.0 / 3.0;
  weird.data[1] = -0.0;
  weird.data[2] = 1e-308;
  weird.data[3] = 12345.67890123456789;
  ck.add("a", a);
  ck.add("weird", weird);

  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_ckpt_test.bin").string();
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.meta_str("kind") == "test");
  CHECK(back.meta_double("lr") == 1e-4);
  REQUIRE(back.tensor_count() == 2);
  CHECK(std::memcmp(back.get("a").data.data(), a.data.data(),
                    a.data.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(back.get("weird").data.data(), weird.data.data(),
                    weird.data.size() * sizeof(double)) == 0);
  CHECK(back.get("a").shape == a.shape);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(Checkpoint::load("/nonexistent/nope.bin"), IoError);
}
