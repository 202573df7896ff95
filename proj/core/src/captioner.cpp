#include "dlnlab/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dlnlab/checkpoint.hpp"
#include "dlnlab/optim.hpp"
#include "dlnlab/rng.hpp"

namespace dlnlab {

namespace {

const std::vector<std::string> kSubjects = {
    "man", "woman", "dog", "cat", "boy",
    "girl", "bird", "horse", "chef", "baby"};
const std::vector<std::string> kActions = {
    "cooking", "running", "jumping", "singing", "dancing",
    "eating",  "sleeping", "walking", "playing", "swimming"};
const std::vector<std::string> kFillers = {
    "in the kitchen", "on the grass",  "near the river",
    "at the park",    "in the house",  "on the road"};

TokenSeq template_caption(int subject, int action, int filler) {
  std::string text = "a " + kSubjects[static_cast<size_t>(subject)] + " is " +
                     kActions[static_cast<size_t>(action)] + " " +
                     kFillers[static_cast<size_t>(filler)];
  return tokenize(text);
}

Array noisy_onehot(int frames, int dim, int hot, double sigma, Rng& rng) {
  Array a = Array::zeros({frames, dim});
  for (int i = 0; i < frames; ++i) {
    for (int j = 0; j < dim; ++j) {
      a.at(i, j) = (j == hot ? 1.0 : 0.0) + sigma * rng.normal();
    }
  }
  return a;
}

SyntheticVideo make_video(const SyntheticConfig& cfg, Rng& rng) {
  const int subject = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.subjects)));
  const int action = static_cast<int>(rng.below(static_cast<uint64_t>(cfg.actions)));
  const int filler = static_cast<int>(rng.below(kFillers.size()));
  SyntheticVideo v;
  v.appearance = noisy_onehot(cfg.frames, cfg.subjects, subject, cfg.sigma, rng);
  v.motion = noisy_onehot(cfg.frames, cfg.actions, action, cfg.sigma, rng);
  v.object = noisy_onehot(cfg.frames, cfg.subjects, subject, cfg.sigma, rng);
  v.caption = template_caption(subject, action, filler);
  return v;
}

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

void SyntheticConfig::validate() const {
  if (subjects < 5 || subjects > static_cast<int>(kSubjects.size())) {
    throw ConfigError("synthetic: subjects must lie in [5, 10]");
  }
  if (actions < 5 || actions > static_cast<int>(kActions.size())) {
    throw ConfigError("synthetic: actions must lie in [5, 10]");
  }
  if (frames < 1) throw ConfigError("synthetic: frames must be >= 1");
  if (sigma < 0.0) throw ConfigError("synthetic: sigma must be >= 0");
  if (train_size < 1 || val_size < 1 || test_size < 1) {
    throw ConfigError("synthetic: split sizes must be >= 1");
  }
}

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg,
                                            uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::split(seed, 0xDA7A));
  SyntheticDataset ds;
  for (int i = 0; i < cfg.train_size; ++i) ds.train.push_back(make_video(cfg, rng));
  for (int i = 0; i < cfg.val_size; ++i) ds.val.push_back(make_video(cfg, rng));
  for (int i = 0; i < cfg.test_size; ++i) ds.test.push_back(make_video(cfg, rng));
  return ds;
}

std::vector<TokenSeq> synthetic_corpus(int sentences, uint64_t seed) {
  if (sentences < 1) throw ConfigError("synthetic_corpus: sentences must be >= 1");
  Rng rng(Rng::split(seed, 0xC0B5));
  std::vector<TokenSeq> out;
  out.reserve(static_cast<size_t>(sentences));
  for (int i = 0; i < sentences; ++i) {
    const int subject = static_cast<int>(rng.below(kSubjects.size()));
    const int action = static_cast<int>(rng.below(kActions.size()));
    const int filler = static_cast<int>(rng.below(kFillers.size()));
    out.push_back(template_caption(subject, action, filler));
  }
  return out;
}

double RampSchedule::weight(int epoch) const {
  if (epoch < start_epoch) return 0.0;
  if (epoch >= end_epoch) return max_weight;
  return max_weight * static_cast<double>(epoch - start_epoch) /
         static_cast<double>(end_epoch - start_epoch);
}

void Stage2Config::validate() const {
  for (double l : {lambda_bleu, lambda_meteor, lambda_cider, lambda_fc,
                   lambda_mc, lambda_oc, lambda_ac}) {
    if (l < 0.0) throw ConfigError("stage2: lambda weights must be >= 0");
  }
  if (ramp.start_epoch > ramp.end_epoch) {
    throw ConfigError("stage2: ramp start must be <= ramp end");
  }
  if (ramp.max_weight < 0.0) throw ConfigError("stage2: ramp weight must be >= 0");
  if (epochs < 1 || batch < 1) throw ConfigError("stage2: epochs/batch must be >= 1");
  if (proj_dim < 1 || hidden < 1 || embed_dim < 1 || att_dim < 1 ||
      max_decode < 1) {
    throw ConfigError("stage2: model dimensions must be >= 1");
  }
}

CaptionerModel::CaptionerModel(const Stage2Config& cfg, Vocabulary vocab,
                               int subject_dim, int action_dim,
                               uint64_t init_seed)
    : cfg_(cfg),
      vocab_(std::move(vocab)),
      subject_dim_(subject_dim),
      action_dim_(action_dim),
      embed_("embed", Array::zeros({vocab_.size(), cfg.embed_dim})),
      proj_a_w_("proj_a.w", Array::zeros({subject_dim, cfg.proj_dim})),
      proj_a_b_("proj_a.b", Array::zeros({1, cfg.proj_dim})),
      proj_m_w_("proj_m.w", Array::zeros({action_dim, cfg.proj_dim})),
      proj_m_b_("proj_m.b", Array::zeros({1, cfg.proj_dim})),
      proj_o_w_("proj_o.w", Array::zeros({subject_dim, cfg.proj_dim})),
      proj_o_b_("proj_o.b", Array::zeros({1, cfg.proj_dim})),
      att_wf_("att.wf", Array::zeros({3 * cfg.proj_dim, cfg.att_dim})),
      att_wh_("att.wh", Array::zeros({cfg.hidden, cfg.att_dim})),
      att_b_("att.b", Array::zeros({1, cfg.att_dim})),
      att_v_("att.v", Array::zeros({cfg.att_dim, 1})),
      lstm_wx_("lstm.wx",
               Array::zeros({cfg.embed_dim + 3 * cfg.proj_dim, 4 * cfg.hidden})),
      lstm_wh_("lstm.wh", Array::zeros({cfg.hidden, 4 * cfg.hidden})),
      lstm_b_("lstm.b", Array::zeros({1, 4 * cfg.hidden})),
      out_w_("out.w", Array::zeros({cfg.hidden, vocab_.size()})),
      out_b_("out.b", Array::zeros({1, vocab_.size()})) {
  cfg_.validate();
  if (subject_dim < 1 || action_dim < 1) {
    throw ConfigError("captioner: feature dimensions must be >= 1");
  }
  Rng rng(Rng::split(init_seed, 0xCA9));
  embed_.value = init_normal(embed_.value.shape, 0.02, rng);
  proj_a_w_.value = init_xavier(subject_dim, cfg_.proj_dim, rng);
  proj_m_w_.value = init_xavier(action_dim, cfg_.proj_dim, rng);
  proj_o_w_.value = init_xavier(subject_dim, cfg_.proj_dim, rng);
  att_wf_.value = init_xavier(3 * cfg_.proj_dim, cfg_.att_dim, rng);
  att_wh_.value = init_xavier(cfg_.hidden, cfg_.att_dim, rng);
  att_v_.value = init_xavier(cfg_.att_dim, 1, rng);
  lstm_wx_.value =
      init_xavier(cfg_.embed_dim + 3 * cfg_.proj_dim, 4 * cfg_.hidden, rng);
  lstm_wh_.value = init_xavier(cfg_.hidden, 4 * cfg_.hidden, rng);
  out_w_.value = init_xavier(cfg_.hidden, vocab_.size(), rng);
  // Forget-gate bias starts open.
  for (int j = cfg_.hidden; j < 2 * cfg_.hidden; ++j) lstm_b_.value.at(0, j) = 1.0;
}

CaptionerModel::Projected CaptionerModel::project(Tape& tape,
                                                  const SyntheticVideo& video) {
  if (video.appearance.shape.cols != subject_dim_ ||
      video.motion.shape.cols != action_dim_ ||
      video.object.shape.cols != subject_dim_) {
    throw ShapeMismatch("project: video feature width mismatch");
  }
  Projected p;
  p.appearance = tape.add(
      tape.matmul(tape.constant(video.appearance), tape.input(proj_a_w_)),
      tape.input(proj_a_b_));
  p.motion =
      tape.add(tape.matmul(tape.constant(video.motion), tape.input(proj_m_w_)),
               tape.input(proj_m_b_));
  p.object =
      tape.add(tape.matmul(tape.constant(video.object), tape.input(proj_o_w_)),
               tape.input(proj_o_b_));
  p.context = tape.concat_cols({p.appearance, p.motion, p.object});
  return p;
}

CaptionerModel::StepOut CaptionerModel::decode_step(Tape& tape,
                                                    const Projected& feat,
                                                    Tensor h_prev, Tensor c_prev,
                                                    int prev_word_id) {
  if (prev_word_id < 0 || prev_word_id >= vocab_.size()) {
    throw IndexOutOfRange("decode_step: word id " + std::to_string(prev_word_id));
  }
  // Additive attention over frames.
  Tensor att_in = tape.tanh(tape.add(
      tape.add(tape.matmul(feat.context, tape.input(att_wf_)),
               tape.matmul(h_prev, tape.input(att_wh_))),
      tape.input(att_b_)));
  Tensor scores = tape.transpose(tape.matmul(att_in, tape.input(att_v_)));
  StepOut out;
  out.alpha = tape.softmax(scores);  // [1, N]
  Tensor ctx = tape.matmul(out.alpha, feat.context);

  Tensor emb = tape.gather_rows(tape.input(embed_), std::vector<int>{prev_word_id});
  Tensor x = tape.concat_cols({emb, ctx});
  Tensor gates = tape.add(tape.add(tape.matmul(x, tape.input(lstm_wx_)),
                                   tape.matmul(h_prev, tape.input(lstm_wh_))),
                          tape.input(lstm_b_));
  const int h = cfg_.hidden;
  Tensor gi = tape.sigmoid(tape.slice_cols(gates, 0, h));
  Tensor gf = tape.sigmoid(tape.slice_cols(gates, h, 2 * h));
  Tensor go = tape.sigmoid(tape.slice_cols(gates, 2 * h, 3 * h));
  Tensor gg = tape.tanh(tape.slice_cols(gates, 3 * h, 4 * h));
  out.c = tape.add(tape.mul(gf, c_prev), tape.mul(gi, gg));
  out.h = tape.mul(go, tape.tanh(out.c));
  out.logits = tape.add(tape.matmul(out.h, tape.input(out_w_)), tape.input(out_b_));
  return out;
}

CaptionerModel::TeacherForced CaptionerModel::teacher_forced(
    Tape& tape, const Projected& feat, const std::vector<int>& caption_ids) {
  if (caption_ids.empty()) throw EmptyInput("teacher_forced: empty caption");
  Tensor h = tape.constant(Array::zeros({1, cfg_.hidden}));
  Tensor c = tape.constant(Array::zeros({1, cfg_.hidden}));
  std::vector<Tensor> logits_rows;
  std::vector<Tensor> alpha_rows;
  TeacherForced tf;
  int prev = Vocabulary::kBos;
  for (size_t t = 0; t <= caption_ids.size(); ++t) {
    StepOut step = decode_step(tape, feat, h, c, prev);
    h = step.h;
    c = step.c;
    logits_rows.push_back(step.logits);
    alpha_rows.push_back(step.alpha);
    if (t < caption_ids.size()) {
      tf.targets.push_back(caption_ids[t]);
      prev = caption_ids[t];
    } else {
      tf.targets.push_back(Vocabulary::kEos);
    }
  }
  tf.logits = tape.concat_rows(logits_rows);
  tf.alphas = tape.concat_rows(alpha_rows);
  return tf;
}

TokenSeq CaptionerModel::greedy_decode(const SyntheticVideo& video) {
  Tape tape;
  Projected feat = project(tape, video);
  Tensor h = tape.constant(Array::zeros({1, cfg_.hidden}));
  Tensor c = tape.constant(Array::zeros({1, cfg_.hidden}));
  std::vector<std::string> words;
  int prev = Vocabulary::kBos;
  for (int t = 0; t < cfg_.max_decode; ++t) {
    StepOut step = decode_step(tape, feat, h, c, prev);
    h = step.h;
    c = step.c;
    const Array& row = step.logits.value();
    int best_real = -1;
    double best_real_v = 0.0;
    for (int j = Vocabulary::kNumReserved; j < vocab_.size(); ++j) {
      if (best_real < 0 || row.at(0, j) > best_real_v) {
        best_real = j;
        best_real_v = row.at(0, j);
      }
    }
    // argmax ties resolve to the lowest id, so EOS wins an exact tie
    const bool eos_wins =
        best_real < 0 || row.at(0, Vocabulary::kEos) >= best_real_v;
    if (eos_wins) {
      if (!words.empty()) break;
      if (best_real < 0) break;  // vocabulary has no real words
    }
    words.push_back(vocab_.decode_word(best_real));
    prev = best_real;
  }
  if (words.empty()) words.push_back(vocab_.decode_word(Vocabulary::kUnk));
  return TokenSeq(std::move(words));
}

std::vector<Parameter*> CaptionerModel::parameters() {
  return {&embed_,   &proj_a_w_, &proj_a_b_, &proj_m_w_, &proj_m_b_,
          &proj_o_w_, &proj_o_b_, &att_wf_,   &att_wh_,   &att_b_,
          &att_v_,   &lstm_wx_,  &lstm_wh_,  &lstm_b_,   &out_w_,
          &out_b_};
}

void CaptionerModel::save(const std::string& path,
                          const SyntheticConfig& data_cfg,
                          uint64_t data_seed) const {
  Checkpoint ck;
  ck.meta["kind"] = "captioner";
  ck.meta["subject_dim"] = std::to_string(subject_dim_);
  ck.meta["action_dim"] = std::to_string(action_dim_);
  ck.meta["proj_dim"] = std::to_string(cfg_.proj_dim);
  ck.meta["hidden"] = std::to_string(cfg_.hidden);
  ck.meta["embed_dim"] = std::to_string(cfg_.embed_dim);
  ck.meta["att_dim"] = std::to_string(cfg_.att_dim);
  ck.meta["max_decode"] = std::to_string(cfg_.max_decode);
  ck.meta["data_subjects"] = std::to_string(data_cfg.subjects);
  ck.meta["data_actions"] = std::to_string(data_cfg.actions);
  ck.meta["data_frames"] = std::to_string(data_cfg.frames);
  ck.set_meta_double("data_sigma", data_cfg.sigma);
  ck.meta["data_train"] = std::to_string(data_cfg.train_size);
  ck.meta["data_val"] = std::to_string(data_cfg.val_size);
  ck.meta["data_test"] = std::to_string(data_cfg.test_size);
  ck.meta["data_seed"] = std::to_string(data_seed);
  for (const Parameter* p : const_cast<CaptionerModel*>(this)->parameters()) {
    ck.add(p->name(), p->value);
  }
  ck.save(path);
  vocab_.save(path + ".vocab");
}

LoadedCaptioner CaptionerModel::load(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  if (ck.meta_str("kind") != "captioner") {
    throw IoError("checkpoint is not a captioner model: " + path);
  }
  Stage2Config cfg;
  cfg.proj_dim = static_cast<int>(ck.meta_int("proj_dim"));
  cfg.hidden = static_cast<int>(ck.meta_int("hidden"));
  cfg.embed_dim = static_cast<int>(ck.meta_int("embed_dim"));
  cfg.att_dim = static_cast<int>(ck.meta_int("att_dim"));
  cfg.max_decode = static_cast<int>(ck.meta_int("max_decode"));
  const int subject_dim = static_cast<int>(ck.meta_int("subject_dim"));
  const int action_dim = static_cast<int>(ck.meta_int("action_dim"));
  Vocabulary vocab = Vocabulary::load(path + ".vocab");
  CaptionerModel model(cfg, std::move(vocab), subject_dim, action_dim, 0);
  for (Parameter* p : model.parameters()) {
    const Array& stored = ck.get(p->name());
    if (!(stored.shape == p->value.shape)) {
      throw IoError("checkpoint shape mismatch for " + p->name());
    }
    p->value = stored;
  }
  SyntheticConfig data_cfg;
  data_cfg.subjects = static_cast<int>(ck.meta_int("data_subjects"));
  data_cfg.actions = static_cast<int>(ck.meta_int("data_actions"));
  data_cfg.frames = static_cast<int>(ck.meta_int("data_frames"));
  data_cfg.sigma = ck.meta_double("data_sigma");
  data_cfg.train_size = static_cast<int>(ck.meta_int("data_train"));
  data_cfg.val_size = static_cast<int>(ck.meta_int("data_val"));
  data_cfg.test_size = static_cast<int>(ck.meta_int("data_test"));
  const uint64_t data_seed = static_cast<uint64_t>(ck.meta_int("data_seed"));
  return LoadedCaptioner{std::move(model), data_cfg, data_seed};
}

Tensor coherence_penalty(Tape& tape, Tensor stream) {
  const int n = stream.shape().rows;
  if (n < 2) return tape.constant(Array::scalar(0.0));
  Tensor diff = tape.sub(tape.slice_rows(stream, 1, n),
                         tape.slice_rows(stream, 0, n - 1));
  return tape.sum(tape.abs(diff));
}

Tensor coherent_loss(Tape& tape, Tensor a_proj, Tensor m_proj, Tensor o_proj,
                     Tensor alpha_nt, const Stage2Config& cfg) {
  Tensor total = tape.scale(coherence_penalty(tape, a_proj), cfg.lambda_fc);
  total = tape.add(total,
                   tape.scale(coherence_penalty(tape, m_proj), cfg.lambda_mc));
  total = tape.add(total,
                   tape.scale(coherence_penalty(tape, o_proj), cfg.lambda_oc));
  total = tape.add(total,
                   tape.scale(coherence_penalty(tape, alpha_nt), cfg.lambda_ac));
  return total;
}

Tensor dln_loss(Tape& tape, Tensor predicted_triple, const Stage2Config& cfg) {
  if (!(predicted_triple.shape() == Shape{1, 3})) {
    throw ShapeMismatch("dln_loss expects a [1,3] prediction, got " +
                        predicted_triple.shape().str());
  }
  Tensor weighted = tape.mul(
      predicted_triple,
      tape.constant(
          Array::row({cfg.lambda_bleu, cfg.lambda_meteor, cfg.lambda_cider})));
  return tape.scale(tape.sum(weighted), -1.0);
}

BatchLosses stage2_batch_losses(Tape& tape, CaptionerModel& model,
                                DlnModel* dln,
                                const std::vector<const SyntheticVideo*>& batch,
                                const Stage2Config& cfg, int epoch) {
  if (batch.empty()) throw EmptyInput("stage2_batch_losses: empty batch");
  const double w = cfg.ramp.weight(epoch);
  const bool use_dln = dln != nullptr && w > 0.0 &&
                       (cfg.lambda_bleu > 0.0 || cfg.lambda_meteor > 0.0 ||
                        cfg.lambda_cider > 0.0);

  std::vector<Tensor> batch_logits;
  std::vector<int> batch_targets;
  std::vector<Tensor> coherent_terms;
  std::vector<Tensor> dln_terms;

  for (const SyntheticVideo* video : batch) {
    CaptionerModel::Projected feat = model.project(tape, *video);
    const std::vector<int> caption_ids = model.vocab().encode(video->caption);
    CaptionerModel::TeacherForced tf =
        model.teacher_forced(tape, feat, caption_ids);
    batch_logits.push_back(tf.logits);
    batch_targets.insert(batch_targets.end(), tf.targets.begin(),
                         tf.targets.end());
    coherent_terms.push_back(coherent_loss(tape, feat.appearance, feat.motion,
                                           feat.object,
                                           tape.transpose(tf.alphas), cfg));
    if (use_dln) {
      const int t_cand = static_cast<int>(caption_ids.size());
      Tensor dists = tape.softmax(tape.slice_rows(tf.logits, 0, t_cand));
      Tensor pred = dln->forward_soft(tape, dists, video->caption);
      dln_terms.push_back(dln_loss(tape, pred, cfg));
    }
  }

  Tensor l_ld = tape.cross_entropy(tape.concat_rows(batch_logits),
                                   std::move(batch_targets));
  Tensor l_c = tape.mean(coherent_terms.size() == 1
                             ? coherent_terms.front()
                             : tape.concat_rows(coherent_terms));
  BatchLosses out;
  out.dln_weight = w;
  out.l_ld = l_ld.item();
  out.l_c = l_c.item();
  if (use_dln) {
    Tensor l_dln = tape.mean(dln_terms.size() == 1 ? dln_terms.front()
                                                   : tape.concat_rows(dln_terms));
    out.l_dln = l_dln.item();
    out.total = tape.add(tape.add(l_ld, tape.scale(l_dln, w)), l_c);
  } else {
    out.l_dln = 0.0;
    out.total = tape.add(l_ld, l_c);
  }
  return out;
}

namespace {

struct ValScores {
  double bleu = 0.0, meteor = 0.0, cider = 0.0, rouge = 0.0;
};

ValScores oracle_scores(CaptionerModel& model,
                        const std::vector<SyntheticVideo>& videos) {
  std::vector<TokenSeq> refs;
  refs.reserve(videos.size());
  for (const auto& v : videos) refs.push_back(v.caption);
  const IdfTable idf = IdfTable::build(refs);
  ValScores s;
  for (const auto& v : videos) {
    const TokenSeq hyp = model.greedy_decode(v);
    s.bleu += bleu(hyp, {v.caption});
    s.meteor += meteor_lite(hyp, v.caption);
    s.cider += cider(hyp, {v.caption}, idf);
    s.rouge += rouge_l(hyp, v.caption);
  }
  const double n = static_cast<double>(videos.size());
  s.bleu /= n;
  s.meteor /= n;
  s.cider /= n;
  s.rouge /= n;
  return s;
}

}  // namespace

Stage2Result train_captioner(
    CaptionerModel& model, const SyntheticDataset& data, DlnModel* dln,
    const Stage2Config& cfg, uint64_t seed,
    std::vector<std::tuple<TokenSeq, TokenSeq, int>>* harvest) {
  cfg.validate();
  if (data.train.empty() || data.val.empty()) {
    throw DatasetTooSmall("train_captioner: empty train or val split");
  }
  if (dln != nullptr && !(dln->vocab() == model.vocab())) {
    throw ConfigError("train_captioner: captioner and DLN vocabularies differ");
  }

  std::vector<Parameter*> params = model.parameters();
  if (dln != nullptr && cfg.dln_unfreeze) {
    for (Parameter* p : dln->parameters()) params.push_back(p);
  }
  Adam opt(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  std::vector<size_t> order(data.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  Stage2Result result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(Rng::split(seed, 0xE90C + static_cast<uint64_t>(epoch)));
    deterministic_shuffle(order, epoch_rng);
    double sum_ld = 0.0, sum_dln = 0.0, sum_c = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch));
      std::vector<const SyntheticVideo*> batch;
      for (size_t k = start; k < end; ++k) batch.push_back(&data.train[order[k]]);
      Tape tape;
      BatchLosses losses = stage2_batch_losses(tape, model, dln, batch, cfg, epoch);
      opt.zero_grad();
      tape.backward(losses.total);
      opt.step();

      BatchLogRow row;
      row.epoch = epoch;
      row.batch = batches;
      row.l_ld = losses.l_ld;
      row.l_dln = losses.l_dln;
      row.l_c = losses.l_c;
      row.total = losses.total.item();
      row.dln_weight = losses.dln_weight;
      result.batches.push_back(row);

      sum_ld += losses.l_ld;
      sum_dln += losses.l_dln;
      sum_c += losses.l_c;
      ++batches;
    }

    const double w = cfg.ramp.weight(epoch);
    EpochLogRow row;
    row.epoch = epoch;
    row.l_ld = sum_ld / batches;
    row.l_dln = sum_dln / batches;
    row.l_c = sum_c / batches;
    row.total = (row.l_ld + w * row.l_dln) + row.l_c;
    const ValScores val = oracle_scores(model, data.val);
    row.val_bleu = val.bleu;
    row.val_meteor = val.meteor;
    row.val_cider = val.cider;
    row.val_rouge = val.rouge;
    result.epochs.push_back(row);

    if (harvest != nullptr) {
      const size_t n = std::min<size_t>(50, data.train.size());
      for (size_t i = 0; i < n; ++i) {
        harvest->emplace_back(model.greedy_decode(data.train[i]),
                              data.train[i].caption, epoch);
      }
    }
  }
  return result;
}

CapEvalReport evaluate_captioner(CaptionerModel& model,
                                 const std::vector<SyntheticVideo>& test_set) {
  if (test_set.empty()) throw EmptyInput("evaluate_captioner: empty test set");
  const uint64_t dln_calls_before = DlnModel::forward_call_count();

  std::vector<TokenSeq> refs;
  refs.reserve(test_set.size());
  for (const auto& v : test_set) refs.push_back(v.caption);
  const IdfTable idf = IdfTable::build(refs);

  CapEvalReport rep;
  for (const auto& v : test_set) {
    const TokenSeq hyp = model.greedy_decode(v);
    rep.bleu += bleu(hyp, {v.caption});
    rep.meteor += meteor_lite(hyp, v.caption);
    rep.cider += cider(hyp, {v.caption}, idf);
    rep.rouge += rouge_l(hyp, v.caption);
    rep.decoded.emplace_back(hyp.join(), v.caption.join());
  }
  const double n = static_cast<double>(test_set.size());
  rep.bleu /= n;
  rep.meteor /= n;
  rep.cider /= n;
  rep.rouge /= n;
  rep.dln_calls_during_eval = DlnModel::forward_call_count() - dln_calls_before;
  return rep;
}

void write_stage2_log_csv(const std::string& path,
                          const std::vector<EpochLogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open stage-2 log csv: " + path);
  out << "epoch,l_ld,l_dln,l_c,total,val_bleu,val_meteor,val_cider,val_rouge\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.l_ld, r.l_dln, r.l_c, r.total, r.val_bleu,
                  r.val_meteor, r.val_cider, r.val_rouge);
    out << buf;
  }
}

void write_cap_eval_csv(const std::string& path, const CapEvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open eval csv: " + path);
  out << "bleu,meteor,cider,rouge_l,dln_calls\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%llu\n", report.bleu,
                report.meteor, report.cider, report.rouge,
                static_cast<unsigned long long>(report.dln_calls_during_eval));
  out << buf;
}

}  // namespace dlnlab
