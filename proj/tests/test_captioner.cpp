#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dlnlab/captioner.hpp"
#include "dlnlab/optim.hpp"
#include "test_util.hpp"

using namespace dlnlab;

namespace {

SyntheticConfig tiny_data_cfg() {
  SyntheticConfig cfg;
  cfg.subjects = 5;
  cfg.actions = 5;
  cfg.frames = 4;
  cfg.sigma = 0.2;
  cfg.train_size = 24;
  cfg.val_size = 6;
  cfg.test_size = 6;
  return cfg;
}

Stage2Config tiny_stage2_cfg() {
  Stage2Config cfg;
  cfg.proj_dim = 8;
  cfg.hidden = 12;
  cfg.embed_dim = 8;
  cfg.att_dim = 6;
  cfg.epochs = 2;
  cfg.batch = 8;
  cfg.lr = 5e-3;
  cfg.ramp.start_epoch = 1;
  cfg.ramp.end_epoch = 2;
  return cfg;
}

Vocabulary vocab_of(const SyntheticDataset& data) {
  std::vector<TokenSeq> corpus;
  for (const auto& v : data.train) corpus.push_back(v.caption);
  return Vocabulary::build(corpus, 1);
}

}  // namespace

TEST_CASE("synthetic dataset is deterministic per seed") {
  const SyntheticConfig cfg = tiny_data_cfg();
  const SyntheticDataset a = generate_synthetic_dataset(cfg, 5);
  const SyntheticDataset b = generate_synthetic_dataset(cfg, 5);
  const SyntheticDataset c = generate_synthetic_dataset(cfg, 6);
  REQUIRE(a.train.size() == 24);
  REQUIRE(a.val.size() == 6);
  REQUIRE(a.test.size() == 6);
  CHECK(a.train[0].caption == b.train[0].caption);
  CHECK(a.train[0].appearance.data == b.train[0].appearance.data);
  bool any_diff = false;
  for (size_t i = 0; i < a.train.size(); ++i) {
    any_diff = any_diff || !(a.train[i].caption == c.train[i].caption);
  }
  CHECK(any_diff);
}

TEST_CASE("zero noise makes frames identical within a video") {
  SyntheticConfig cfg = tiny_data_cfg();
  cfg.sigma = 0.0;
  const SyntheticDataset ds = generate_synthetic_dataset(cfg, 3);
  const SyntheticVideo& v = ds.train[0];
  for (int i = 1; i < cfg.frames; ++i) {
    for (int j = 0; j < cfg.subjects; ++j) {
      CHECK(v.appearance.at(i, j) == v.appearance.at(0, j));
      CHECK(v.object.at(i, j) == v.object.at(0, j));
    }
    for (int j = 0; j < cfg.actions; ++j) {
      CHECK(v.motion.at(i, j) == v.motion.at(0, j));
    }
  }
}

TEST_CASE("caption vocabulary stays within the template inventory") {
  SyntheticConfig cfg;
  cfg.subjects = 10;
  cfg.actions = 10;
  cfg.train_size = 600;
  cfg.val_size = 50;
  cfg.test_size = 100;
  const SyntheticDataset ds = generate_synthetic_dataset(cfg, 11);
  const Vocabulary v = vocab_of(ds);
  // 10 subjects + 10 actions + template/filler words; generously bounded.
  CHECK(v.size() - Vocabulary::kNumReserved <= 10 + 10 + 16);
  for (const auto& video : ds.train) CHECK(video.caption.size() <= 30);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg = tiny_data_cfg();
  cfg.subjects = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_data_cfg();
  cfg.train_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("ramp schedule endpoints") {
  RampSchedule ramp;
  ramp.start_epoch = 3;
  ramp.end_epoch = 10;
  ramp.max_weight = 1.0;
  CHECK(ramp.weight(1) == 0.0);
  CHECK(ramp.weight(2) == 0.0);
  CHECK(ramp.weight(3) == 0.0);
  CHECK(std::fabs(ramp.weight(6) - 3.0 / 7.0) <= 1e-12);
  CHECK(ramp.weight(10) == 1.0);
  CHECK(ramp.weight(50) == 1.0);
}

TEST_CASE("attention weights sum to one at every step") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 9);
  CaptionerModel model(tiny_stage2_cfg(), vocab_of(ds), dcfg.subjects,
                       dcfg.actions, 31);
  Tape tape;
  auto feat = model.project(tape, ds.train[0]);
  Tensor h = tape.constant(Array::zeros({1, model.config().hidden}));
  Tensor c = tape.constant(Array::zeros({1, model.config().hidden}));
  for (int t = 0; t < 5; ++t) {
    auto step = model.decode_step(tape, feat, h, c, Vocabulary::kBos);
    double sum = 0.0;
    for (int n = 0; n < dcfg.frames; ++n) sum += step.alpha.value().at(0, n);
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
    h = step.h;
    c = step.c;
  }
}

TEST_CASE("identical frames receive identical attention") {
  SyntheticConfig dcfg = tiny_data_cfg();
  dcfg.sigma = 0.0;  // all frames equal
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 2);
  CaptionerModel model(tiny_stage2_cfg(), vocab_of(ds), dcfg.subjects,
                       dcfg.actions, 8);
  Tape tape;
  auto feat = model.project(tape, ds.train[0]);
  Tensor h = tape.constant(Array::zeros({1, model.config().hidden}));
  Tensor c = tape.constant(Array::zeros({1, model.config().hidden}));
  auto step = model.decode_step(tape, feat, h, c, Vocabulary::kBos);
  for (int n = 0; n < dcfg.frames; ++n) {
    CHECK(std::fabs(step.alpha.value().at(0, n) - 1.0 / dcfg.frames) <= 1e-12);
  }
}

TEST_CASE("coherence penalty: constant streams, single gap, brute force") {
  Tape tape;
  SUBCASE("constant rows give exactly zero") {
    Array constant = Array::zeros({5, 3});
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 3; ++j) constant.at(i, j) = 7.5 - j;
    }
    CHECK(coherence_penalty(tape, tape.constant(constant)).item() == 0.0);
  }
  SUBCASE("single differing adjacent pair with gap g") {
    Array m = Array::full({4, 2}, 1.0);
    m.at(2, 1) = 1.0 + 0.625;  // one gap of 0.625 -> two adjacent diffs
    // rows 1->2 and 2->3 each differ by 0.625 in column 1
    const double got = coherence_penalty(tape, tape.constant(m)).item();
    CHECK(std::fabs(got - 2 * 0.625) <= 1e-15);
  }
  SUBCASE("random matrix matches the triple loop") {
    Rng rng(3);
    const Array m = testutil::random_array({6, 4}, rng);
    const double got = coherence_penalty(tape, tape.constant(m)).item();
    double expect = 0.0;
    for (int t = 0; t < 4; ++t) {
      for (int n = 1; n < 6; ++n) {
        expect += std::fabs(m.at(n, t) - m.at(n - 1, t));
      }
    }
    CHECK(std::fabs(got - expect) <= 1e-12);
  }
  SUBCASE("single-row stream is zero") {
    CHECK(coherence_penalty(tape, tape.constant(Array::full({1, 4}, 2.0)))
              .item() == 0.0);
  }
}

TEST_CASE("coherent_loss weights the four streams") {
  Stage2Config cfg = tiny_stage2_cfg();
  cfg.lambda_fc = 1.0;
  cfg.lambda_mc = 0.0;
  cfg.lambda_oc = 0.0;
  cfg.lambda_ac = 0.0;
  Tape tape;
  Array a = Array::zeros({3, 2});
  a.at(1, 0) = 2.0;  // diffs: 2 (0->1) + 2 (1->2)
  Tensor zero = tape.constant(Array::zeros({3, 2}));
  const double got = coherent_loss(tape, tape.constant(a), zero, zero,
                                   tape.constant(Array::zeros({3, 4})), cfg)
                         .item();
  CHECK(std::fabs(got - 4.0) <= 1e-15);
}

TEST_CASE("dln_loss is the negated weighted prediction") {
  Stage2Config cfg = tiny_stage2_cfg();
  SUBCASE("bleu-only weights") {
    cfg.lambda_bleu = 1.0;
    cfg.lambda_meteor = 0.0;
    cfg.lambda_cider = 0.0;
    Tape tape;
    Tensor pred = tape.constant(Array::row({0.8, 0.3, 0.5}));
    CHECK(std::fabs(dln_loss(tape, pred, cfg).item() - (-0.8)) <= 1e-15);
  }
  SUBCASE("all-zero weights give zero loss and zero gradient") {
    cfg.lambda_bleu = cfg.lambda_meteor = cfg.lambda_cider = 0.0;
    Parameter p("p", Array::row({0.8, 0.3, 0.5}));
    Tape tape;
    Tensor loss = dln_loss(tape, tape.input(p), cfg);
    CHECK(loss.item() == 0.0);
    tape.backward(loss);
    for (double g : p.grad.data) CHECK(g == 0.0);
  }
  SUBCASE("mixed weights") {
    cfg.lambda_bleu = 0.5;
    cfg.lambda_meteor = 2.0;
    cfg.lambda_cider = 1.0;
    Tape tape;
    Tensor pred = tape.constant(Array::row({0.4, 0.1, 0.25}));
    CHECK(std::fabs(dln_loss(tape, pred, cfg).item() -
                    (-(0.5 * 0.4 + 2.0 * 0.1 + 1.0 * 0.25))) <= 1e-15);
  }
}

TEST_CASE("xent uniform logits equal log V") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 4);
  const Vocabulary v = vocab_of(ds);
  Tape tape;
  const double got =
      tape.cross_entropy(tape.constant(Array::zeros({4, v.size()})), {5, 6, 7, 8})
          .item();
  CHECK(std::fabs(got - std::log(static_cast<double>(v.size()))) <= 1e-12);
}

TEST_CASE("stage-2 loss bookkeeping re-sums exactly") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 21);
  Stage2Config cfg = tiny_stage2_cfg();
  cfg.epochs = 2;
  CaptionerModel model(cfg, vocab_of(ds), dcfg.subjects, dcfg.actions, 5);
  const Stage2Result res = train_captioner(model, ds, nullptr, cfg, 6);
  REQUIRE(!res.batches.empty());
  for (const auto& b : res.batches) {
    const double resum = (b.l_ld + b.dln_weight * b.l_dln) + b.l_c;
    CHECK(std::fabs(resum - b.total) <= 1e-12);
  }
  for (const auto& e : res.epochs) {
    const double w = cfg.ramp.weight(e.epoch);
    CHECK(std::fabs((e.l_ld + w * e.l_dln) + e.l_c - e.total) <= 1e-12);
  }
}

TEST_CASE("with_dln and zero lambdas reproduce the baseline trajectory") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 33);
  const Vocabulary vocab = vocab_of(ds);

  DlnConfig dln_cfg;
  dln_cfg.d_model = 8;
  dln_cfg.heads = 2;
  dln_cfg.layers = 1;
  dln_cfg.d_ff = 12;
  dln_cfg.head_hidden1 = 8;
  dln_cfg.head_hidden2 = 6;
  dln_cfg.max_pair_len = 32;
  DlnModel dln(dln_cfg, vocab, 2);

  Stage2Config cfg = tiny_stage2_cfg();
  cfg.lambda_bleu = cfg.lambda_meteor = cfg.lambda_cider = 0.0;

  CaptionerModel m1(cfg, vocab, dcfg.subjects, dcfg.actions, 77);
  const Stage2Result r1 = train_captioner(m1, ds, &dln, cfg, 88);
  CaptionerModel m2(cfg, vocab, dcfg.subjects, dcfg.actions, 77);
  const Stage2Result r2 = train_captioner(m2, ds, nullptr, cfg, 88);

  REQUIRE(r1.batches.size() == r2.batches.size());
  for (size_t i = 0; i < r1.batches.size(); ++i) {
    CHECK(r1.batches[i].total == r2.batches[i].total);
  }
  auto p1 = m1.parameters();
  auto p2 = m2.parameters();
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i]->value.data == p2[i]->value.data);
  }
}

TEST_CASE("same seed gives identical training runs") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 13);
  const Vocabulary vocab = vocab_of(ds);
  const Stage2Config cfg = tiny_stage2_cfg();
  auto run = [&] {
    CaptionerModel m(cfg, vocab, dcfg.subjects, dcfg.actions, 3);
    return train_captioner(m, ds, nullptr, cfg, 4);
  };
  const Stage2Result a = run();
  const Stage2Result b = run();
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].total == b.epochs[i].total);
    CHECK(a.epochs[i].val_cider == b.epochs[i].val_cider);
  }
}

TEST_CASE("full stage-2 objective passes the finite-difference check") {
  SyntheticConfig dcfg;
  dcfg.subjects = 5;
  dcfg.actions = 5;
  dcfg.frames = 3;
  dcfg.sigma = 0.1;
  dcfg.train_size = 2;
  dcfg.val_size = 1;
  dcfg.test_size = 1;
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 44);
  const Vocabulary vocab = vocab_of(ds);

  DlnConfig dln_cfg;
  dln_cfg.d_model = 8;
  dln_cfg.heads = 2;
  dln_cfg.layers = 1;
  dln_cfg.d_ff = 8;
  dln_cfg.head_hidden1 = 8;
  dln_cfg.head_hidden2 = 4;
  dln_cfg.max_pair_len = 32;
  DlnModel dln(dln_cfg, vocab, 10);

  Stage2Config cfg = tiny_stage2_cfg();
  cfg.proj_dim = 4;
  cfg.hidden = 8;
  cfg.embed_dim = 6;
  cfg.att_dim = 4;
  cfg.ramp.start_epoch = 0;
  cfg.ramp.end_epoch = 1;  // full DLN weight from epoch 1

  CaptionerModel model(cfg, vocab, dcfg.subjects, dcfg.actions, 20);
  std::vector<const SyntheticVideo*> batch = {&ds.train[0], &ds.train[1]};

  auto build = [&](Tape& tape) {
    return stage2_batch_losses(tape, model, &dln, batch, cfg, 1).total;
  };
  std::vector<Parameter*> params = model.parameters();
  const double err_model = testutil::max_grad_rel_error(build, params);
  CHECK(err_model <= 1e-4);
  // Gradients also flow through the frozen DLN onto its parameters.
  const double err_dln = testutil::max_grad_rel_error(build, dln.parameters());
  CHECK(err_dln <= 1e-4);
}

TEST_CASE("greedy decode is deterministic and never emits reserved words") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 55);
  CaptionerModel model(tiny_stage2_cfg(), vocab_of(ds), dcfg.subjects,
                       dcfg.actions, 66);
  for (const auto& v : ds.test) {
    const TokenSeq a = model.greedy_decode(v);
    const TokenSeq b = model.greedy_decode(v);
    CHECK(a == b);
    CHECK(!a.empty());
    CHECK(a.size() <= static_cast<size_t>(model.config().max_decode));
    for (const auto& w : a.tokens) {
      CHECK(w.find('<') == std::string::npos);
    }
  }
}

TEST_CASE("a model trained on one video emits its caption") {
  SyntheticConfig dcfg = tiny_data_cfg();
  dcfg.sigma = 0.0;
  dcfg.train_size = 1;
  dcfg.val_size = 1;
  dcfg.test_size = 1;
  SyntheticDataset ds = generate_synthetic_dataset(dcfg, 70);
  Stage2Config cfg = tiny_stage2_cfg();
  cfg.epochs = 60;
  cfg.batch = 1;
  cfg.lr = 1e-2;
  CaptionerModel model(cfg, vocab_of(ds), dcfg.subjects, dcfg.actions, 71);
  train_captioner(model, ds, nullptr, cfg, 72);
  CHECK(model.greedy_decode(ds.train[0]) == ds.train[0].caption);
}

TEST_CASE("frozen DLN parameters stay put; unfreeze updates them") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 110);
  const Vocabulary vocab = vocab_of(ds);
  DlnConfig dln_cfg;
  dln_cfg.d_model = 8;
  dln_cfg.heads = 2;
  dln_cfg.layers = 1;
  dln_cfg.d_ff = 12;
  dln_cfg.head_hidden1 = 8;
  dln_cfg.head_hidden2 = 6;
  dln_cfg.max_pair_len = 32;

  Stage2Config cfg = tiny_stage2_cfg();
  cfg.epochs = 2;
  cfg.ramp.start_epoch = 0;
  cfg.ramp.end_epoch = 1;

  auto run = [&](bool unfreeze) {
    DlnModel dln(dln_cfg, vocab, 111);
    const Array before = dln.parameters().front()->value;
    Stage2Config c = cfg;
    c.dln_unfreeze = unfreeze;
    CaptionerModel model(c, vocab, dcfg.subjects, dcfg.actions, 112);
    train_captioner(model, ds, &dln, c, 113);
    return before.data == dln.parameters().front()->value.data;
  };
  CHECK(run(false));        // frozen: unchanged
  CHECK_FALSE(run(true));   // unfrozen: embedding table moved
}

TEST_CASE("training can harvest per-epoch prediction pairs") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 120);
  Stage2Config cfg = tiny_stage2_cfg();
  cfg.epochs = 2;
  CaptionerModel model(cfg, vocab_of(ds), dcfg.subjects, dcfg.actions, 121);
  std::vector<std::tuple<TokenSeq, TokenSeq, int>> harvest;
  train_captioner(model, ds, nullptr, cfg, 122, &harvest);
  REQUIRE(harvest.size() == 2 * ds.train.size());  // 24 videos <= 50 cap
  CHECK(std::get<2>(harvest.front()) == 1);
  CHECK(std::get<2>(harvest.back()) == 2);

  std::vector<TokenSeq> refs;
  for (const auto& v : ds.train) refs.push_back(v.caption);
  const auto records = harvest_pairs(harvest, IdfTable::build(refs));
  for (const auto& r : records) {
    CHECK(r.provenance == Provenance::harvested);
    CHECK(r.epoch.has_value());
  }
}

TEST_CASE("evaluation path never calls the DLN") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 91);
  CaptionerModel model(tiny_stage2_cfg(), vocab_of(ds), dcfg.subjects,
                       dcfg.actions, 92);
  const CapEvalReport rep = evaluate_captioner(model, ds.test);
  CHECK(rep.dln_calls_during_eval == 0);
  CHECK(rep.decoded.size() == ds.test.size());
  CHECK(std::isfinite(rep.bleu));
  CHECK(std::isfinite(rep.cider));
}

TEST_CASE("captioner checkpoints replay teacher-forced logits exactly") {
  const SyntheticConfig dcfg = tiny_data_cfg();
  const SyntheticDataset ds = generate_synthetic_dataset(dcfg, 101);
  Stage2Config cfg = tiny_stage2_cfg();
  CaptionerModel model(cfg, vocab_of(ds), dcfg.subjects, dcfg.actions, 102);
  train_captioner(model, ds, nullptr, cfg, 103);

  auto run_pass = [&](CaptionerModel& m) {
    Tape tape;
    auto feat = m.project(tape, ds.train[0]);
    auto tf = m.teacher_forced(tape, feat, m.vocab().encode(ds.train[0].caption));
    return tf.logits.value();
  };
  const Array logged = run_pass(model);

  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_cap_test.ckpt").string();
  model.save(path, dcfg, 101);
  LoadedCaptioner loaded = CaptionerModel::load(path);
  CHECK(loaded.data_seed == 101);
  const Array replayed = run_pass(loaded.model);
  CHECK(replayed.data == logged.data);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".vocab");
}
