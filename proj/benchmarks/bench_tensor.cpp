#include <benchmark/benchmark.h>

#include "dlnlab/optim.hpp"
#include "dlnlab/rng.hpp"
#include "dlnlab/tensor.hpp"

namespace {

using namespace dlnlab;

Array random_array(Shape s, uint64_t seed) {
  Rng rng(seed);
  Array a = Array::zeros(s);
  for (auto& v : a.data) v = rng.normal();
  return a;
}

void BM_matmul_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Array a = random_array({n, n}, 1);
  const Array b = random_array({n, n}, 2);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.matmul(tape.constant(a), tape.constant(b)));
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_matmul_forward)->Arg(16)->Arg(64)->Arg(128);

void BM_matmul_backward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Parameter a("a", random_array({n, n}, 1));
  Parameter b("b", random_array({n, n}, 2));
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    Tape tape;
    Tensor loss = tape.sum(tape.matmul(tape.input(a), tape.input(b)));
    tape.backward(loss);
    benchmark::DoNotOptimize(a.grad.data.data());
  }
}
BENCHMARK(BM_matmul_backward)->Arg(16)->Arg(64);

void BM_softmax_rows(benchmark::State& state) {
  const Array a = random_array({64, 64}, 3);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.softmax(tape.constant(a)));
  }
}
BENCHMARK(BM_softmax_rows);

void BM_adam_step(benchmark::State& state) {
  Parameter p("p", random_array({64, 64}, 4));
  Adam opt({&p}, AdamConfig{});
  p.grad = random_array({64, 64}, 5);
  for (auto _ : state) {
    opt.step();
    benchmark::DoNotOptimize(p.value.data.data());
  }
}
BENCHMARK(BM_adam_step);

}  // namespace
