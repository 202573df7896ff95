#include <benchmark/benchmark.h>

#include "dlnlab/captioner.hpp"
#include "dlnlab/metrics.hpp"
#include "dlnlab/pairgen.hpp"

namespace {

using namespace dlnlab;

struct Fixture {
  std::vector<TokenSeq> corpus = synthetic_corpus(500, 1);
  IdfTable idf = IdfTable::build(corpus);
  TokenSeq cand = tokenize("a man is cooking rice in the big kitchen today");
  TokenSeq ref = tokenize("a man is cooking in the kitchen");
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_bleu(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(bleu(f.cand, {f.ref}));
  }
}
BENCHMARK(BM_bleu);

void BM_meteor(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(meteor_lite(f.cand, f.ref));
  }
}
BENCHMARK(BM_meteor);

void BM_rouge_l(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(rouge_l(f.cand, f.ref));
  }
}
BENCHMARK(BM_rouge_l);

void BM_cider(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(cider(f.cand, {f.ref}, f.idf));
  }
}
BENCHMARK(BM_cider);

void BM_score_triple(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_triple(f.cand, f.ref, f.idf));
  }
}
BENCHMARK(BM_score_triple);

void BM_generate_pairs(benchmark::State& state) {
  const auto& f = fixture();
  PerturbPolicy policy;
  policy.p = 0.25;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate_pairs(f.corpus, policy, static_cast<int>(state.range(0)), f.idf));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_generate_pairs)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
