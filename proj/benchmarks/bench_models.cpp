#include <benchmark/benchmark.h>

#include "dlnlab/captioner.hpp"
#include "dlnlab/dln.hpp"

namespace {

using namespace dlnlab;

struct ModelFixture {
  std::vector<TokenSeq> corpus = synthetic_corpus(500, 1);
  Vocabulary vocab = Vocabulary::build(corpus, 1);
  DlnModel dln{DlnConfig{}, vocab, 7};
  PairEncoding enc = encode_pair(tokenize("a man is cooking rice in the kitchen"),
                                 tokenize("a man is cooking in the kitchen"),
                                 vocab, DlnConfig{}.max_pair_len);
};

ModelFixture& model_fixture() {
  static ModelFixture f;
  return f;
}

void BM_dln_forward(benchmark::State& state) {
  auto& f = model_fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.dln.predict(f.enc));
  }
}
BENCHMARK(BM_dln_forward);

void BM_dln_forward_backward(benchmark::State& state) {
  auto& f = model_fixture();
  for (auto _ : state) {
    for (Parameter* p : f.dln.parameters()) p->zero_grad();
    Tape tape;
    Tensor out = f.dln.forward(tape, f.enc);
    tape.backward(tape.sum(out));
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_dln_forward_backward);

void BM_captioner_teacher_forced(benchmark::State& state) {
  auto& f = model_fixture();
  SyntheticConfig dcfg;
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 2);
  Stage2Config cfg;
  CaptionerModel model(cfg, f.vocab, dcfg.subjects, dcfg.actions, 3);
  const std::vector<int> ids = f.vocab.encode(ds.train[0].caption);
  for (auto _ : state) {
    Tape tape;
    auto feat = model.project(tape, ds.train[0]);
    benchmark::DoNotOptimize(model.teacher_forced(tape, feat, ids));
  }
}
BENCHMARK(BM_captioner_teacher_forced);

void BM_captioner_greedy_decode(benchmark::State& state) {
  auto& f = model_fixture();
  SyntheticConfig dcfg;
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 2);
  Stage2Config cfg;
  CaptionerModel model(cfg, f.vocab, dcfg.subjects, dcfg.actions, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.greedy_decode(ds.train[0]));
  }
}
BENCHMARK(BM_captioner_greedy_decode);

}  // namespace
