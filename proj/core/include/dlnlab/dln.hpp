#ifndef DLNLAB_DLN_HPP
#define DLNLAB_DLN_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dlnlab/pairgen.hpp"
#include "dlnlab/tensor.hpp"
#include "dlnlab/text.hpp"

namespace dlnlab {

struct DlnConfig {
  int d_model = 64;  // must be divisible by heads
  int heads = 2;
  int layers = 2;
  int d_ff = 128;
  int head_hidden1 = 64;  // regression head: d_model -> h1 -> h2 -> 3
  int head_hidden2 = 32;
  int max_pair_len = 64;
  double lambda1_bleu = 1.0;  // stage-1 per-metric loss weights
  double lambda1_meteor = 1.0;
  double lambda1_cider = 1.0;
  double lr = 1e-4;
  int epochs = 8;
  int batch = 64;

  void validate() const;
};

// [BOS, candidate..., SEP, reference..., EOS] with candidate-side segment 0
// (BOS through SEP) and reference-side segment 1. mask marks real positions;
// trailing PAD slots appear only when pad_to exceeds the real length.
struct PairEncoding {
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<uint8_t> mask;

  int length() const { return static_cast<int>(ids.size()); }
  int real_len() const;
  int sep_position() const;
};

// Overlong pairs are truncated to fit max_pair_len, candidate first: the
// candidate keeps at most budget-1 tokens so the reference always retains at
// least one.
PairEncoding encode_pair(const TokenSeq& candidate, const TokenSeq& reference,
                         const Vocabulary& vocab, int max_pair_len,
                         int pad_to = 0);

// Metric-surrogate network: token + position + segment embeddings, a small
// pre-norm self-attention encoder, masked mean pooling, and a three-layer
// regression head whose final sigmoid squashes the prediction into [0,1]^3
// (BLEU, METEOR, CIDEr order).
class DlnModel {
 public:
  DlnModel(const DlnConfig& cfg, Vocabulary vocab, uint64_t init_seed);

  const DlnConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }

  // Hard-token forward; returns a [1,3] tensor on the caller's tape.
  Tensor forward(Tape& tape, const PairEncoding& enc);

  // Soft-candidate forward for stage 2: candidate token embeddings are the
  // probability-weighted mixtures dist * E (expected embeddings), so the
  // output is differentiable w.r.t. the distributions. Each row of dist must
  // sum to 1 within 1e-6. The reference side uses hard ids.
  Tensor forward_soft(Tape& tape, Tensor candidate_dist,
                      const TokenSeq& reference);

  // Convenience inference on a private tape.
  MetricTriple predict(const PairEncoding& enc);

  std::vector<Parameter*> parameters();
  int64_t parameter_count() const;

  void save(const std::string& path) const;  // + "<path>.vocab" sidecar
  static DlnModel load(const std::string& path);

  // Instrumentation: every forward/forward_soft increments this process-wide
  // counter, which is how inference paths prove they never call the DLN.
  static uint64_t forward_call_count();

 private:
  struct Layer {
    Parameter ln1_g, ln1_b;
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ln2_g, ln2_b;
    Parameter ff1_w, ff1_b, ff2_w, ff2_b;
  };

  Tensor encode_from_embeddings(Tape& tape, Tensor x,
                                const std::vector<uint8_t>& mask,
                                const std::vector<int>& segments);

  DlnConfig cfg_;
  Vocabulary vocab_;
  Parameter embed_, pos_, seg_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Parameter final_ln_g_, final_ln_b_;
  Parameter head1_w_, head1_b_, head2_w_, head2_b_, head3_w_, head3_b_;
};

// Stage-1 objective: lambda-weighted squared differences between predicted
// and true triples, averaged over the batch. pred is [B,3] on the tape.
Tensor stage1_loss(Tape& tape, Tensor pred,
                   const std::vector<MetricTriple>& truth, const DlnConfig& cfg);

struct Stage1EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double r_bleu = 0.0, r_meteor = 0.0, r_cider = 0.0;
  double mae_bleu = 0.0, mae_meteor = 0.0, mae_cider = 0.0;
  bool degenerate = false;  // any held-out correlation was undefined
};

struct Stage1Result {
  std::vector<Stage1EpochLog> epochs;
  int best_epoch = 0;  // 1-based epoch whose held-out mean r was retained
  std::vector<size_t> heldout_indices;  // positions into the input records
};

// Mini-batch Adam on a fixed 90/10 train/held-out split. Requires at least
// 1000 records. The model is left holding the best-held-out parameters.
Stage1Result train_stage1(DlnModel& model,
                          const std::vector<ScoredPairRecord>& records,
                          uint64_t seed);

struct Stage1EvalReport {
  double r_bleu = 0.0, r_meteor = 0.0, r_cider = 0.0;
  double mae_bleu = 0.0, mae_meteor = 0.0, mae_cider = 0.0;
  bool degenerate_bleu = false, degenerate_meteor = false,
       degenerate_cider = false;
  // 20-bin histograms over [0,1], truth vs prediction, per metric.
  std::array<int, 20> truth_bleu{}, pred_bleu{};
  std::array<int, 20> truth_meteor{}, pred_meteor{};
  std::array<int, 20> truth_cider{}, pred_cider{};
  std::vector<MetricTriple> predictions;
  std::vector<MetricTriple> truths;
};

Stage1EvalReport eval_stage1(DlnModel& model,
                             const std::vector<ScoredPairRecord>& heldout);

void write_stage1_log_csv(const std::string& path,
                          const std::vector<Stage1EpochLog>& rows);
// Emits "<prefix>_bleu.csv", "<prefix>_meteor.csv", "<prefix>_cider.csv"
// with columns bin_lo,bin_hi,truth_count,pred_count.
void write_stage1_histograms_csv(const std::string& prefix,
                                 const Stage1EvalReport& report);
void write_stage1_report_csv(const std::string& path,
                             const Stage1EvalReport& report);

}  // namespace dlnlab

#endif  // DLNLAB_DLN_HPP
