#ifndef DLNLAB_CAPTIONER_HPP
#define DLNLAB_CAPTIONER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dlnlab/dln.hpp"
#include "dlnlab/metrics.hpp"
#include "dlnlab/tensor.hpp"
#include "dlnlab/text.hpp"

namespace dlnlab {

// Desk-scale stand-in for a real video corpus: per-frame appearance, motion
// and object vectors are noisy one-hot codes of a (subject, action) pair and
// the caption follows the template "a <subject> is <action> <scene filler>".
struct SyntheticConfig {
  int subjects = 10;  // 5..10, prefix of the built-in inventory
  int actions = 10;   // 5..10
  int frames = 8;
  double sigma = 0.3;  // per-entry Gaussian feature noise
  int train_size = 600;
  int val_size = 50;
  int test_size = 100;

  void validate() const;
};

struct SyntheticVideo {
  Array appearance;  // [frames, subjects]
  Array motion;      // [frames, actions]
  Array object;      // [frames, subjects]
  TokenSeq caption;
};

struct SyntheticDataset {
  std::vector<SyntheticVideo> train, val, test;
};

SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg,
                                            uint64_t seed);

// Standalone caption sampler from the same template family; feeds the
// perturbation generator when no user corpus is supplied.
std::vector<TokenSeq> synthetic_corpus(int sentences, uint64_t seed);

struct RampSchedule {
  int start_epoch = 3;
  int end_epoch = 8;
  double max_weight = 1.0;

  // 0 before start, linear to max_weight at end, flat after.
  double weight(int epoch) const;
};

struct Stage2Config {
  // Surrogate-loss weights (BLEU, METEOR, CIDEr terms).
  double lambda_bleu = 1.0;
  double lambda_meteor = 1.0;
  double lambda_cider = 1.0;
  // Coherence weights: appearance, motion, object, attention.
  double lambda_fc = 0.1;
  double lambda_mc = 0.01;
  double lambda_oc = 0.1;
  double lambda_ac = 0.01;
  RampSchedule ramp;
  int epochs = 10;
  int batch = 32;
  double lr = 5e-4;
  bool dln_unfreeze = false;  // when true, DLN parameters update in stage 2
  // Model dimensions.
  int proj_dim = 64;  // per feature stream
  int hidden = 128;
  int embed_dim = 64;
  int att_dim = 64;
  int max_decode = 30;

  void validate() const;
};

// Encoder-decoder captioner: per-stream linear feature projections, additive
// frame attention, an input/forget/output-gated recurrent cell and a softmax
// word head. All graphs are built per sample on a caller-owned tape.
class CaptionerModel {
 public:
  CaptionerModel(const Stage2Config& cfg, Vocabulary vocab, int subject_dim,
                 int action_dim, uint64_t init_seed);

  const Stage2Config& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }

  struct Projected {
    Tensor appearance;  // [N, proj]
    Tensor motion;
    Tensor object;
    Tensor context;  // [N, 3*proj]
  };
  Projected project(Tape& tape, const SyntheticVideo& video);

  struct StepOut {
    Tensor h;       // [1, hidden]
    Tensor c;       // [1, hidden]
    Tensor logits;  // [1, V]
    Tensor alpha;   // [1, N]; sums to 1
  };
  StepOut decode_step(Tape& tape, const Projected& feat, Tensor h_prev,
                      Tensor c_prev, int prev_word_id);

  struct TeacherForced {
    Tensor logits;  // [T+1, V]; step t predicts target t
    Tensor alphas;  // [T+1, N]
    std::vector<int> targets;  // caption ids then EOS
  };
  TeacherForced teacher_forced(Tape& tape, const Projected& feat,
                               const std::vector<int>& caption_ids);

  // Greedy argmax decode (ties to the lowest id), reserved ids other than
  // EOS never emitted, at most max_decode words. Never returns an empty
  // caption: if EOS wins immediately the best real word is emitted instead.
  TokenSeq greedy_decode(const SyntheticVideo& video);

  std::vector<Parameter*> parameters();

  void save(const std::string& path, const SyntheticConfig& data_cfg,
            uint64_t data_seed) const;
  static struct LoadedCaptioner load(const std::string& path);

 private:
  Stage2Config cfg_;
  Vocabulary vocab_;
  int subject_dim_, action_dim_;
  Parameter embed_;
  Parameter proj_a_w_, proj_a_b_, proj_m_w_, proj_m_b_, proj_o_w_, proj_o_b_;
  Parameter att_wf_, att_wh_, att_b_, att_v_;
  Parameter lstm_wx_, lstm_wh_, lstm_b_;
  Parameter out_w_, out_b_;
};

// Checkpoint plus the synthetic-data settings needed to rebuild the exact
// evaluation split.
struct LoadedCaptioner {
  CaptionerModel model;
  SyntheticConfig data_cfg;
  uint64_t data_seed = 0;
};

// Sum of absolute differences between consecutive rows; zero for matrices
// with fewer than two rows.
Tensor coherence_penalty(Tape& tape, Tensor stream);

// Weighted combination over the three projected streams and the [N, T]
// attention matrix.
Tensor coherent_loss(Tape& tape, Tensor a_proj, Tensor m_proj, Tensor o_proj,
                     Tensor alpha_nt, const Stage2Config& cfg);

// Per-sample surrogate loss: -(lambda_b t_bleu + lambda_m t_meteor +
// lambda_c t_cider) for a [1,3] predicted triple.
Tensor dln_loss(Tape& tape, Tensor predicted_triple, const Stage2Config& cfg);

// One batch of the full stage-2 objective. `dln` may be null (plain
// cross-entropy + coherence baseline). The surrogate term is skipped exactly
// when its effective weight is zero, so ramp-off epochs and all-zero lambdas
// reproduce the baseline bit for bit.
struct BatchLosses {
  Tensor total;
  double l_ld = 0.0;
  double l_dln = 0.0;
  double l_c = 0.0;
  double dln_weight = 0.0;
};
BatchLosses stage2_batch_losses(Tape& tape, CaptionerModel& model,
                                DlnModel* dln,
                                const std::vector<const SyntheticVideo*>& batch,
                                const Stage2Config& cfg, int epoch);

struct BatchLogRow {
  int epoch = 0;
  int batch = 0;
  double l_ld = 0.0, l_dln = 0.0, l_c = 0.0, total = 0.0, dln_weight = 0.0;
};

struct EpochLogRow {
  int epoch = 0;
  double l_ld = 0.0, l_dln = 0.0, l_c = 0.0, total = 0.0;
  double val_bleu = 0.0, val_meteor = 0.0, val_cider = 0.0, val_rouge = 0.0;
};

struct Stage2Result {
  std::vector<EpochLogRow> epochs;
  std::vector<BatchLogRow> batches;
};

// Teacher-forced Adam training; per-epoch validation uses greedy decoding
// scored by the exact oracles (never the DLN). When `harvest` is given, up
// to 50 train videos are greedy-decoded after every epoch and appended as
// (prediction, ground truth, epoch) triples: raw material for the
// harvested-pair branch of the stage-1 dataset.
Stage2Result train_captioner(
    CaptionerModel& model, const SyntheticDataset& data, DlnModel* dln,
    const Stage2Config& cfg, uint64_t seed,
    std::vector<std::tuple<TokenSeq, TokenSeq, int>>* harvest = nullptr);

struct CapEvalReport {
  double bleu = 0.0, meteor = 0.0, cider = 0.0, rouge = 0.0;
  uint64_t dln_calls_during_eval = 0;
  std::vector<std::pair<std::string, std::string>> decoded;  // (hyp, ref)
};

CapEvalReport evaluate_captioner(CaptionerModel& model,
                                 const std::vector<SyntheticVideo>& test_set);

void write_stage2_log_csv(const std::string& path,
                          const std::vector<EpochLogRow>& rows);
void write_cap_eval_csv(const std::string& path, const CapEvalReport& report);

}  // namespace dlnlab

#endif  // DLNLAB_CAPTIONER_HPP
