#ifndef DLNLAB_PIPELINE_HPP
#define DLNLAB_PIPELINE_HPP

#include <array>
#include <string>
#include <vector>

#include "dlnlab/captioner.hpp"
#include "dlnlab/dln.hpp"
#include "dlnlab/pairgen.hpp"

namespace dlnlab {

// High-level subcommand bodies shared by the CLI and the acceptance suite.
// Every function is deterministic given its options (seeds included) and
// writes only the artifacts named in its options.

struct ScoreOptions {
  std::string candidate;   // direct pair...
  std::string reference;
  std::string pairs_file;  // ...or a TSV file "candidate<TAB>reference"
  std::string idf_corpus;  // optional IDF corpus; default: this call's references
  std::string out_csv;     // optional CSV destination
};

struct ScoreRow {
  std::string candidate;
  std::string reference;
  MetricTriple triple;
  double rouge = 0.0;
};

std::vector<ScoreRow> run_score(const ScoreOptions& opt);

struct PairgenOptions {
  std::string corpus_path;     // empty: use the bundled synthetic caption corpus
  int corpus_sentences = 2000; // size of the bundled corpus when used
  int count = 20000;
  double p = 0.25;
  bool op_delete = true;
  bool op_swap = true;
  uint64_t seed = 42;
  std::string out_path;
};

void run_pairgen(const PairgenOptions& opt);

struct DlnTrainOptions {
  std::string records_path;
  std::string out_checkpoint;
  std::string log_csv;  // optional
  DlnConfig cfg;
  int vocab_min_count = 5;
  uint64_t seed = 42;
};

Stage1Result run_dln_train(const DlnTrainOptions& opt);

struct DlnEvalOptions {
  std::string checkpoint;
  std::string records_path;
  std::string report_csv;   // optional
  std::string hist_prefix;  // optional; writes <prefix>_{bleu,meteor,cider}.csv
};

Stage1EvalReport run_dln_eval(const DlnEvalOptions& opt);

struct CapTrainOptions {
  bool with_dln = false;
  std::string dln_checkpoint;  // required when with_dln
  std::string vocab_path;      // optional explicit vocabulary
  Stage2Config cfg;
  SyntheticConfig data_cfg;
  uint64_t seed = 42;
  std::string out_checkpoint;
  std::string log_csv;      // optional
  std::string harvest_out;  // optional: scored (prediction, truth) records
                            // gathered across epochs, stage-1 strategy (ii)
};

Stage2Result run_cap_train(const CapTrainOptions& opt);

struct CapEvalOptions {
  std::string checkpoint;
  std::string report_csv;  // optional
};

CapEvalReport run_cap_eval(const CapEvalOptions& opt);

struct AblateOptions {
  int seeds = 5;
  std::string dln_checkpoint;
  Stage2Config cfg;
  SyntheticConfig data_cfg;
  uint64_t root_seed = 42;
  std::string out_dir;
  int jobs = 2;  // concurrent training runs
};

struct AblateRun {
  uint64_t seed = 0;
  CapEvalReport baseline;
  CapEvalReport with_dln;
};

struct AblateReport {
  std::vector<AblateRun> runs;
  // index order: bleu, meteor, cider, rouge
  std::array<double, 4> baseline_mean{}, baseline_std{};
  std::array<double, 4> dln_mean{}, dln_std{};
  int cider_improved = 0;  // paired seeds where CIDEr strictly improved
  std::string table() const;
};

AblateReport run_ablate(const AblateOptions& opt);

struct CurvesOptions {
  std::vector<std::pair<std::string, std::string>> logs;  // (label, csv path)
  std::string out_csv;
};

void run_curves(const CurvesOptions& opt);

}  // namespace dlnlab

#endif  // DLNLAB_PIPELINE_HPP
