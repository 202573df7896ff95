#include "dlnlab/dln.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dlnlab/checkpoint.hpp"
#include "dlnlab/optim.hpp"
#include "dlnlab/rng.hpp"
#include "dlnlab/stats.hpp"

namespace dlnlab {

namespace {

std::atomic<uint64_t> g_dln_forward_calls{0};

Array init_normal(Shape s, double stddev, Rng& rng) {
  Array a = Array::zeros(s);
  for (auto& v : a.data) v = rng.normal(0.0, stddev);
  return a;
}

Array init_xavier(int fan_in, int fan_out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
  return init_normal({fan_in, fan_out}, stddev, rng);
}

template <typename T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace

void DlnConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || layers <= 0 || d_ff <= 0) {
    throw ConfigError("dln: dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("dln: d_model must be divisible by heads");
  }
  if (max_pair_len < 5) throw ConfigError("dln: max_pair_len too small");
  if (lambda1_bleu < 0 || lambda1_meteor < 0 || lambda1_cider < 0) {
    throw ConfigError("dln: stage-1 lambda weights must be >= 0");
  }
  if (lambda1_bleu == 0 && lambda1_meteor == 0 && lambda1_cider == 0) {
    throw ConfigError("dln: stage-1 lambda weights cannot all be 0");
  }
}

int PairEncoding::real_len() const {
  int n = 0;
  for (uint8_t m : mask) n += m != 0;
  return n;
}

int PairEncoding::sep_position() const {
  for (size_t i = 0; i < ids.size(); ++i) {
    if (mask[i] && ids[i] == Vocabulary::kSep) return static_cast<int>(i);
  }
  return -1;
}

PairEncoding encode_pair(const TokenSeq& candidate, const TokenSeq& reference,
                         const Vocabulary& vocab, int max_pair_len,
                         int pad_to) {
  if (candidate.empty() || reference.empty()) {
    throw EmptyInput("encode_pair: empty sentence");
  }
  const int budget = max_pair_len - 3;  // BOS, SEP, EOS
  int keep_c = std::min<int>(static_cast<int>(candidate.size()), budget - 1);
  int keep_r = std::min<int>(static_cast<int>(reference.size()), budget - keep_c);

  PairEncoding enc;
  enc.ids.push_back(Vocabulary::kBos);
  enc.segments.push_back(0);
  for (int i = 0; i < keep_c; ++i) {
    enc.ids.push_back(vocab.encode_word(candidate[static_cast<size_t>(i)]));
    enc.segments.push_back(0);
  }
  enc.ids.push_back(Vocabulary::kSep);
  enc.segments.push_back(0);
  for (int i = 0; i < keep_r; ++i) {
    enc.ids.push_back(vocab.encode_word(reference[static_cast<size_t>(i)]));
    enc.segments.push_back(1);
  }
  enc.ids.push_back(Vocabulary::kEos);
  enc.segments.push_back(1);
  enc.mask.assign(enc.ids.size(), 1);
  while (pad_to > 0 && enc.length() < pad_to) {
    enc.ids.push_back(Vocabulary::kPad);
    enc.segments.push_back(1);
    enc.mask.push_back(0);
  }
  return enc;
}

DlnModel::DlnModel(const DlnConfig& cfg, Vocabulary vocab, uint64_t init_seed)
    : cfg_(cfg),
      vocab_(std::move(vocab)),
      embed_("embed", Array::zeros({vocab_.size(), cfg.d_model})),
      pos_("pos", Array::zeros({cfg.max_pair_len, cfg.d_model})),
      seg_("seg", Array::zeros({2, cfg.d_model})),
      final_ln_g_("final_ln.g", Array::full({1, cfg.d_model}, 1.0)),
      final_ln_b_("final_ln.b", Array::zeros({1, cfg.d_model})),
      head1_w_("head1.w", Array::zeros({cfg.d_model, cfg.head_hidden1})),
      head1_b_("head1.b", Array::zeros({1, cfg.head_hidden1})),
      head2_w_("head2.w", Array::zeros({cfg.head_hidden1, cfg.head_hidden2})),
      head2_b_("head2.b", Array::zeros({1, cfg.head_hidden2})),
      head3_w_("head3.w", Array::zeros({cfg.head_hidden2, 3})),
      head3_b_("head3.b", Array::zeros({1, 3})) {
  cfg_.validate();
  Rng rng(Rng::split(init_seed, 0xD11));
  const int d = cfg_.d_model;
  embed_.value = init_normal(embed_.value.shape, 0.02, rng);
  pos_.value = init_normal(pos_.value.shape, 0.02, rng);
  seg_.value = init_normal(seg_.value.shape, 0.02, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    auto layer = std::make_unique<Layer>(Layer{
        Parameter(p + "ln1.g", Array::full({1, d}, 1.0)),
        Parameter(p + "ln1.b", Array::zeros({1, d})),
        Parameter(p + "wq", init_xavier(d, d, rng)),
        Parameter(p + "bq", Array::zeros({1, d})),
        Parameter(p + "wk", init_xavier(d, d, rng)),
        Parameter(p + "bk", Array::zeros({1, d})),
        Parameter(p + "wv", init_xavier(d, d, rng)),
        Parameter(p + "bv", Array::zeros({1, d})),
        Parameter(p + "wo", init_xavier(d, d, rng)),
        Parameter(p + "bo", Array::zeros({1, d})),
        Parameter(p + "ln2.g", Array::full({1, d}, 1.0)),
        Parameter(p + "ln2.b", Array::zeros({1, d})),
        Parameter(p + "ff1.w", init_xavier(d, cfg_.d_ff, rng)),
        Parameter(p + "ff1.b", Array::zeros({1, cfg_.d_ff})),
        Parameter(p + "ff2.w", init_xavier(cfg_.d_ff, d, rng)),
        Parameter(p + "ff2.b", Array::zeros({1, d})),
    });
    layers_.push_back(std::move(layer));
  }
  head1_w_.value = init_xavier(d, cfg_.head_hidden1, rng);
  head2_w_.value = init_xavier(cfg_.head_hidden1, cfg_.head_hidden2, rng);
  head3_w_.value = init_xavier(cfg_.head_hidden2, 3, rng);
}

Tensor DlnModel::encode_from_embeddings(Tape& tape, Tensor x,
                                        const std::vector<uint8_t>& mask,
                                        const std::vector<int>& segments) {
  const int len = x.shape().rows;
  int n_real = 0;
  for (uint8_t m : mask) n_real += m != 0;

  std::vector<int> pos_ids(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) pos_ids[static_cast<size_t>(i)] = i;
  x = tape.add(x, tape.gather_rows(tape.input(pos_), pos_ids));
  x = tape.add(x, tape.gather_rows(tape.input(seg_), segments));

  // Additive key mask: padded columns get -1e9 before the softmax, which
  // underflows to exactly zero attention weight.
  Array key_mask = Array::zeros({len, len});
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < len; ++j) {
      if (!mask[static_cast<size_t>(j)]) key_mask.at(i, j) = -1e9;
    }
  }
  Tensor key_mask_t = tape.constant(std::move(key_mask));

  const int dh = cfg_.d_model / cfg_.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (auto& lp : layers_) {
    Layer& l = *lp;
    Tensor h = tape.layer_norm(x, tape.input(l.ln1_g), tape.input(l.ln1_b));
    Tensor q = tape.add(tape.matmul(h, tape.input(l.wq)), tape.input(l.bq));
    Tensor k = tape.add(tape.matmul(h, tape.input(l.wk)), tape.input(l.bk));
    Tensor v = tape.add(tape.matmul(h, tape.input(l.wv)), tape.input(l.bv));
    std::vector<Tensor> head_ctx;
    for (int hd = 0; hd < cfg_.heads; ++hd) {
      const int c0 = hd * dh, c1 = (hd + 1) * dh;
      Tensor qh = tape.slice_cols(q, c0, c1);
      Tensor kh = tape.slice_cols(k, c0, c1);
      Tensor vh = tape.slice_cols(v, c0, c1);
      Tensor scores =
          tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
      Tensor att = tape.softmax(tape.add(scores, key_mask_t));
      head_ctx.push_back(tape.matmul(att, vh));
    }
    Tensor ctx = cfg_.heads == 1 ? head_ctx.front() : tape.concat_cols(head_ctx);
    Tensor attn_out =
        tape.add(tape.matmul(ctx, tape.input(l.wo)), tape.input(l.bo));
    x = tape.add(x, attn_out);

    Tensor h2 = tape.layer_norm(x, tape.input(l.ln2_g), tape.input(l.ln2_b));
    Tensor ff = tape.relu(
        tape.add(tape.matmul(h2, tape.input(l.ff1_w)), tape.input(l.ff1_b)));
    Tensor ff_out =
        tape.add(tape.matmul(ff, tape.input(l.ff2_w)), tape.input(l.ff2_b));
    x = tape.add(x, ff_out);
  }
  x = tape.layer_norm(x, tape.input(final_ln_g_), tape.input(final_ln_b_));

  // Masked mean pooling as a constant row times the matrix.
  Array pool = Array::zeros({1, len});
  for (int j = 0; j < len; ++j) {
    if (mask[static_cast<size_t>(j)]) {
      pool.at(0, j) = 1.0 / static_cast<double>(n_real);
    }
  }
  Tensor pooled = tape.matmul(tape.constant(std::move(pool)), x);

  Tensor y = tape.relu(
      tape.add(tape.matmul(pooled, tape.input(head1_w_)), tape.input(head1_b_)));
  y = tape.relu(
      tape.add(tape.matmul(y, tape.input(head2_w_)), tape.input(head2_b_)));
  return tape.sigmoid(
      tape.add(tape.matmul(y, tape.input(head3_w_)), tape.input(head3_b_)));
}

Tensor DlnModel::forward(Tape& tape, const PairEncoding& enc) {
  g_dln_forward_calls.fetch_add(1, std::memory_order_relaxed);
  Tensor x = tape.gather_rows(tape.input(embed_), enc.ids);
  return encode_from_embeddings(tape, x, enc.mask, enc.segments);
}

Tensor DlnModel::forward_soft(Tape& tape, Tensor candidate_dist,
                              const TokenSeq& reference) {
  g_dln_forward_calls.fetch_add(1, std::memory_order_relaxed);
  const Shape ds = candidate_dist.shape();
  if (ds.cols != vocab_.size()) {
    throw ShapeMismatch("forward_soft: distribution width " +
                        std::to_string(ds.cols) + " vs vocab " +
                        std::to_string(vocab_.size()));
  }
  for (int i = 0; i < ds.rows; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < ds.cols; ++j) {
      const double p = candidate_dist.value().at(i, j);
      if (p < 0.0) throw NotADistribution("negative probability in row " +
                                          std::to_string(i));
      row_sum += p;
    }
    if (std::fabs(row_sum - 1.0) > 1e-6) {
      throw NotADistribution("row " + std::to_string(i) + " sums to " +
                             std::to_string(row_sum));
    }
  }
  if (reference.empty()) throw EmptyInput("forward_soft: empty reference");

  const int budget = cfg_.max_pair_len - 3;
  const int keep_c = std::min(ds.rows, budget - 1);
  const int keep_r =
      std::min<int>(static_cast<int>(reference.size()), budget - keep_c);
  Tensor dist = keep_c == ds.rows
                    ? candidate_dist
                    : tape.slice_rows(candidate_dist, 0, keep_c);

  Tensor table = tape.input(embed_);
  Tensor bos = tape.gather_rows(table, std::vector<int>{Vocabulary::kBos});
  Tensor soft_cand = tape.matmul(dist, table);
  std::vector<int> tail_ids{Vocabulary::kSep};
  for (int i = 0; i < keep_r; ++i) {
    tail_ids.push_back(vocab_.encode_word(reference[static_cast<size_t>(i)]));
  }
  tail_ids.push_back(Vocabulary::kEos);
  Tensor tail = tape.gather_rows(table, tail_ids);
  Tensor x = tape.concat_rows({bos, soft_cand, tail});

  std::vector<int> segments;
  std::vector<uint8_t> mask;
  const int total = 1 + keep_c + static_cast<int>(tail_ids.size());
  segments.reserve(static_cast<size_t>(total));
  for (int i = 0; i < 1 + keep_c + 1; ++i) segments.push_back(0);  // BOS..SEP
  for (int i = 0; i < keep_r + 1; ++i) segments.push_back(1);      // ref..EOS
  mask.assign(static_cast<size_t>(total), 1);
  return encode_from_embeddings(tape, x, mask, segments);
}

MetricTriple DlnModel::predict(const PairEncoding& enc) {
  Tape tape;
  Tensor out = forward(tape, enc);
  return MetricTriple{out.value().at(0, 0), out.value().at(0, 1),
                      out.value().at(0, 2)};
}

std::vector<Parameter*> DlnModel::parameters() {
  std::vector<Parameter*> ps{&embed_, &pos_, &seg_};
  for (auto& lp : layers_) {
    Layer& l = *lp;
    for (Parameter* p : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv,
                         &l.bv, &l.wo, &l.bo, &l.ln2_g, &l.ln2_b, &l.ff1_w,
                         &l.ff1_b, &l.ff2_w, &l.ff2_b}) {
      ps.push_back(p);
    }
  }
  for (Parameter* p : {&final_ln_g_, &final_ln_b_, &head1_w_, &head1_b_,
                       &head2_w_, &head2_b_, &head3_w_, &head3_b_}) {
    ps.push_back(p);
  }
  return ps;
}

int64_t DlnModel::parameter_count() const {
  int64_t n = 0;
  for (const Parameter* p : const_cast<DlnModel*>(this)->parameters()) {
    n += p->value.shape.numel();
  }
  return n;
}

void DlnModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.meta["kind"] = "dln";
  ck.meta["d_model"] = std::to_string(cfg_.d_model);
  ck.meta["heads"] = std::to_string(cfg_.heads);
  ck.meta["layers"] = std::to_string(cfg_.layers);
  ck.meta["d_ff"] = std::to_string(cfg_.d_ff);
  ck.meta["head_hidden1"] = std::to_string(cfg_.head_hidden1);
  ck.meta["head_hidden2"] = std::to_string(cfg_.head_hidden2);
  ck.meta["max_pair_len"] = std::to_string(cfg_.max_pair_len);
  ck.set_meta_double("lambda1_bleu", cfg_.lambda1_bleu);
  ck.set_meta_double("lambda1_meteor", cfg_.lambda1_meteor);
  ck.set_meta_double("lambda1_cider", cfg_.lambda1_cider);
  ck.set_meta_double("lr", cfg_.lr);
  ck.meta["epochs"] = std::to_string(cfg_.epochs);
  ck.meta["batch"] = std::to_string(cfg_.batch);
  for (const Parameter* p : const_cast<DlnModel*>(this)->parameters()) {
    ck.add(p->name(), p->value);
  }
  ck.save(path);
  vocab_.save(path + ".vocab");
}

DlnModel DlnModel::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta_str("kind") != "dln") {
    throw IoError("checkpoint is not a dln model: " + path);
  }
  DlnConfig cfg;
  cfg.d_model = static_cast<int>(ck.meta_int("d_model"));
  cfg.heads = static_cast<int>(ck.meta_int("heads"));
  cfg.layers = static_cast<int>(ck.meta_int("layers"));
  cfg.d_ff = static_cast<int>(ck.meta_int("d_ff"));
  cfg.head_hidden1 = static_cast<int>(ck.meta_int("head_hidden1"));
  cfg.head_hidden2 = static_cast<int>(ck.meta_int("head_hidden2"));
  cfg.max_pair_len = static_cast<int>(ck.meta_int("max_pair_len"));
  cfg.lambda1_bleu = ck.meta_double("lambda1_bleu");
  cfg.lambda1_meteor = ck.meta_double("lambda1_meteor");
  cfg.lambda1_cider = ck.meta_double("lambda1_cider");
  cfg.lr = ck.meta_double("lr");
  cfg.epochs = static_cast<int>(ck.meta_int("epochs"));
  cfg.batch = static_cast<int>(ck.meta_int("batch"));
  Vocabulary vocab = Vocabulary::load(path + ".vocab");
  DlnModel model(cfg, std::move(vocab), 0);
  for (Parameter* p : model.parameters()) {
    const Array& stored = ck.get(p->name());
    if (!(stored.shape == p->value.shape)) {
      throw IoError("checkpoint shape mismatch for " + p->name());
    }
    p->value = stored;
  }
  return model;
}

uint64_t DlnModel::forward_call_count() {
  return g_dln_forward_calls.load(std::memory_order_relaxed);
}

Tensor stage1_loss(Tape& tape, Tensor pred,
                   const std::vector<MetricTriple>& truth,
                   const DlnConfig& cfg) {
  const Shape s = pred.shape();
  if (s.cols != 3 || s.rows != static_cast<int>(truth.size())) {
    throw ShapeMismatch("stage1_loss: pred " + s.str() + " vs " +
                        std::to_string(truth.size()) + " truths");
  }
  Array truth_arr = Array::zeros(s);
  Array weights = Array::zeros(s);
  for (int i = 0; i < s.rows; ++i) {
    const MetricTriple& t = truth[static_cast<size_t>(i)];
    truth_arr.at(i, 0) = t.bleu;
    truth_arr.at(i, 1) = t.meteor;
    truth_arr.at(i, 2) = t.cider;
    weights.at(i, 0) = cfg.lambda1_bleu;
    weights.at(i, 1) = cfg.lambda1_meteor;
    weights.at(i, 2) = cfg.lambda1_cider;
  }
  Tensor diff = tape.sub(pred, tape.constant(std::move(truth_arr)));
  Tensor weighted = tape.mul(tape.mul(diff, diff),
                             tape.constant(std::move(weights)));
  return tape.scale(tape.sum(weighted), 1.0 / s.rows);
}

namespace {

struct EvalVectors {
  std::vector<double> truth_b, truth_m, truth_c;
  std::vector<double> pred_b, pred_m, pred_c;
};

EvalVectors collect_predictions(DlnModel& model,
                                const std::vector<ScoredPairRecord>& records,
                                const std::vector<PairEncoding>* encodings) {
  EvalVectors ev;
  for (size_t i = 0; i < records.size(); ++i) {
    const MetricTriple pred =
        encodings ? model.predict((*encodings)[i])
                  : model.predict(encode_pair(records[i].candidate,
                                              records[i].reference, model.vocab(),
                                              model.config().max_pair_len));
    ev.truth_b.push_back(records[i].truth.bleu);
    ev.truth_m.push_back(records[i].truth.meteor);
    ev.truth_c.push_back(records[i].truth.cider);
    ev.pred_b.push_back(pred.bleu);
    ev.pred_m.push_back(pred.meteor);
    ev.pred_c.push_back(pred.cider);
  }
  return ev;
}

}  // namespace

Stage1Result train_stage1(DlnModel& model,
                          const std::vector<ScoredPairRecord>& records,
                          uint64_t seed) {
  if (records.size() < 1000) {
    throw DatasetTooSmall("stage-1 training needs >= 1000 records, got " +
                          std::to_string(records.size()));
  }
  const DlnConfig& cfg = model.config();

  std::vector<size_t> order(records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    Rng split_rng(Rng::split(seed, 0));
    deterministic_shuffle(order, split_rng);
  }
  const size_t train_n = records.size() * 9 / 10;
  std::vector<size_t> train_idx(order.begin(), order.begin() + train_n);
  std::vector<size_t> held_idx(order.begin() + train_n, order.end());

  std::vector<PairEncoding> encodings;
  encodings.reserve(records.size());
  for (const auto& r : records) {
    encodings.push_back(
        encode_pair(r.candidate, r.reference, model.vocab(), cfg.max_pair_len));
  }
  std::vector<ScoredPairRecord> held_records;
  std::vector<PairEncoding> held_encodings;
  for (size_t i : held_idx) {
    held_records.push_back(records[i]);
    held_encodings.push_back(encodings[i]);
  }

  Adam opt(model.parameters(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Stage1Result result;
  result.heldout_indices = held_idx;
  double best_score = -2.0;
  std::vector<Array> best_params;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(Rng::split(seed, static_cast<uint64_t>(epoch)));
    deterministic_shuffle(train_idx, epoch_rng);
    double loss_sum = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < train_idx.size();
         start += static_cast<size_t>(cfg.batch)) {
      const size_t end =
          std::min(train_idx.size(), start + static_cast<size_t>(cfg.batch));
      Tape tape;
      std::vector<Tensor> preds;
      std::vector<MetricTriple> truths;
      for (size_t k = start; k < end; ++k) {
        const size_t i = train_idx[k];
        preds.push_back(model.forward(tape, encodings[i]));
        truths.push_back(records[i].truth);
      }
      Tensor pred_mat =
          preds.size() == 1 ? preds.front() : tape.concat_rows(preds);
      Tensor loss = stage1_loss(tape, pred_mat, truths, cfg);
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += loss.item() * static_cast<double>(end - start);
      seen += end - start;
    }

    EvalVectors ev = collect_predictions(model, held_records, &held_encodings);
    const Correlation rb = pearson(ev.truth_b, ev.pred_b);
    const Correlation rm = pearson(ev.truth_m, ev.pred_m);
    const Correlation rc = pearson(ev.truth_c, ev.pred_c);

    Stage1EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.r_bleu = rb.r;
    row.r_meteor = rm.r;
    row.r_cider = rc.r;
    row.mae_bleu = mean_abs_error(ev.truth_b, ev.pred_b);
    row.mae_meteor = mean_abs_error(ev.truth_m, ev.pred_m);
    row.mae_cider = mean_abs_error(ev.truth_c, ev.pred_c);
    row.degenerate = rb.degenerate || rm.degenerate || rc.degenerate;
    result.epochs.push_back(row);

    const double score = (rb.r + rm.r + rc.r) / 3.0;
    if (score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      best_params.clear();
      for (Parameter* p : model.parameters()) best_params.push_back(p->value);
    }
  }

  if (!best_params.empty()) {
    auto params = model.parameters();
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  }
  return result;
}

Stage1EvalReport eval_stage1(DlnModel& model,
                             const std::vector<ScoredPairRecord>& heldout) {
  if (heldout.empty()) throw EmptyInput("eval_stage1: empty held-out set");
  EvalVectors ev = collect_predictions(model, heldout, nullptr);
  Stage1EvalReport rep;
  const Correlation rb = pearson(ev.truth_b, ev.pred_b);
  const Correlation rm = pearson(ev.truth_m, ev.pred_m);
  const Correlation rc = pearson(ev.truth_c, ev.pred_c);
  rep.r_bleu = rb.r;
  rep.r_meteor = rm.r;
  rep.r_cider = rc.r;
  rep.degenerate_bleu = rb.degenerate;
  rep.degenerate_meteor = rm.degenerate;
  rep.degenerate_cider = rc.degenerate;
  rep.mae_bleu = mean_abs_error(ev.truth_b, ev.pred_b);
  rep.mae_meteor = mean_abs_error(ev.truth_m, ev.pred_m);
  rep.mae_cider = mean_abs_error(ev.truth_c, ev.pred_c);
  rep.truth_bleu = histogram20(ev.truth_b);
  rep.pred_bleu = histogram20(ev.pred_b);
  rep.truth_meteor = histogram20(ev.truth_m);
  rep.pred_meteor = histogram20(ev.pred_m);
  rep.truth_cider = histogram20(ev.truth_c);
  rep.pred_cider = histogram20(ev.pred_c);
  for (size_t i = 0; i < ev.pred_b.size(); ++i) {
    rep.predictions.push_back({ev.pred_b[i], ev.pred_m[i], ev.pred_c[i]});
    rep.truths.push_back({ev.truth_b[i], ev.truth_m[i], ev.truth_c[i]});
  }
  return rep;
}

namespace {

void write_histogram(const std::string& path, const std::array<int, 20>& truth,
                     const std::array<int, 20>& pred) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open histogram csv: " + path);
  out << "bin_lo,bin_hi,truth_count,pred_count\n";
  char buf[128];
  for (int b = 0; b < 20; ++b) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f,%d,%d\n", b / 20.0,
                  (b + 1) / 20.0, truth[static_cast<size_t>(b)],
                  pred[static_cast<size_t>(b)]);
    out << buf;
  }
}

}  // namespace

void write_stage1_log_csv(const std::string& path,
                          const std::vector<Stage1EpochLog>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open stage-1 log csv: " + path);
  out << "epoch,train_loss,r_bleu,r_meteor,r_cider,mae_bleu,mae_meteor,mae_cider\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.train_loss, r.r_bleu, r.r_meteor, r.r_cider, r.mae_bleu,
                  r.mae_meteor, r.mae_cider);
    out << buf;
  }
}

void write_stage1_histograms_csv(const std::string& prefix,
                                 const Stage1EvalReport& report) {
  write_histogram(prefix + "_bleu.csv", report.truth_bleu, report.pred_bleu);
  write_histogram(prefix + "_meteor.csv", report.truth_meteor,
                  report.pred_meteor);
  write_histogram(prefix + "_cider.csv", report.truth_cider, report.pred_cider);
}

void write_stage1_report_csv(const std::string& path,
                             const Stage1EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open stage-1 report csv: " + path);
  out << "metric,pearson_r,mae,degenerate\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "bleu,%.17g,%.17g,%d\n", report.r_bleu,
                report.mae_bleu, report.degenerate_bleu ? 1 : 0);
  out << buf;
  std::snprintf(buf, sizeof buf, "meteor,%.17g,%.17g,%d\n", report.r_meteor,
                report.mae_meteor, report.degenerate_meteor ? 1 : 0);
  out << buf;
  std::snprintf(buf, sizeof buf, "cider,%.17g,%.17g,%d\n", report.r_cider,
                report.mae_cider, report.degenerate_cider ? 1 : 0);
  out << buf;
}

}  // namespace dlnlab
