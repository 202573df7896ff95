// dlnlab command line: the two training stages, data generation, scoring and
// reporting as explicit pipeline steps.
//
//   dlnlab score     --candidate "..." --reference "..."
//   dlnlab pairgen   --count 20000 --p 0.25 --out records.jsonl
//   dlnlab dln-train --records records.jsonl --out dln.ckpt
//   dlnlab dln-eval  --checkpoint dln.ckpt --records heldout.jsonl
//   dlnlab cap-train --with-dln --dln-checkpoint dln.ckpt --out cap.ckpt
//   dlnlab cap-eval  --checkpoint cap.ckpt
//   dlnlab ablate    --dln-checkpoint dln.ckpt --seeds 5 --out-dir ablate/
//   dlnlab curves    --log base:a.csv --log dln:b.csv --out curves.csv

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "dlnlab/pipeline.hpp"
#include "dlnlab/runconfig.hpp"

namespace {

using namespace dlnlab;

struct Global {
  std::string config_path;
  RunConfig config;
  bool seed_flag_given = false;
  uint64_t seed_flag = 0;

  // Precedence: --seed flag, then DLNLAB_SEED, then [seeds].root, then 42.
  uint64_t root_seed() const {
    if (seed_flag_given) return seed_flag;
    if (const char* env = std::getenv("DLNLAB_SEED")) {
      return std::strtoull(env, nullptr, 10);
    }
    return static_cast<uint64_t>(config.get_int("seeds", "root", 42));
  }
};

void parse_ops(const std::string& ops, bool& del, bool& swap) {
  del = swap = false;
  std::string cur;
  for (size_t i = 0; i <= ops.size(); ++i) {
    if (i == ops.size() || ops[i] == ',') {
      if (cur == "delete") {
        del = true;
      } else if (cur == "swap") {
        swap = true;
      } else if (!cur.empty()) {
        throw ConfigError("unknown perturbation op \"" + cur + "\"");
      }
      cur.clear();
    } else {
      cur.push_back(ops[i]);
    }
  }
  if (!del && !swap) throw ConfigError("--ops must enable delete and/or swap");
}

DlnConfig dln_config_from(const Global& g) {
  DlnConfig cfg;
  cfg.d_model = static_cast<int>(g.config.get_int("dln", "d_model", cfg.d_model));
  cfg.heads = static_cast<int>(g.config.get_int("dln", "heads", cfg.heads));
  cfg.layers = static_cast<int>(g.config.get_int("dln", "layers", cfg.layers));
  cfg.d_ff = static_cast<int>(g.config.get_int("dln", "d_ff", cfg.d_ff));
  cfg.head_hidden1 =
      static_cast<int>(g.config.get_int("dln", "head_hidden1", cfg.head_hidden1));
  cfg.head_hidden2 =
      static_cast<int>(g.config.get_int("dln", "head_hidden2", cfg.head_hidden2));
  cfg.max_pair_len =
      static_cast<int>(g.config.get_int("dln", "max_pair_len", cfg.max_pair_len));
  cfg.lambda1_bleu = g.config.get_double("dln", "lambda_bleu", cfg.lambda1_bleu);
  cfg.lambda1_meteor =
      g.config.get_double("dln", "lambda_meteor", cfg.lambda1_meteor);
  cfg.lambda1_cider =
      g.config.get_double("dln", "lambda_cider", cfg.lambda1_cider);
  cfg.lr = g.config.get_double("dln", "lr", cfg.lr);
  cfg.epochs = static_cast<int>(g.config.get_int("dln", "epochs", cfg.epochs));
  cfg.batch = static_cast<int>(g.config.get_int("dln", "batch", cfg.batch));
  return cfg;
}

Stage2Config stage2_config_from(const Global& g) {
  Stage2Config cfg;
  const auto& c = g.config;
  cfg.lambda_bleu = c.get_double("captioner", "lambda_bleu", cfg.lambda_bleu);
  cfg.lambda_meteor = c.get_double("captioner", "lambda_meteor", cfg.lambda_meteor);
  cfg.lambda_cider = c.get_double("captioner", "lambda_cider", cfg.lambda_cider);
  cfg.lambda_fc = c.get_double("captioner", "lambda_fc", cfg.lambda_fc);
  cfg.lambda_mc = c.get_double("captioner", "lambda_mc", cfg.lambda_mc);
  cfg.lambda_oc = c.get_double("captioner", "lambda_oc", cfg.lambda_oc);
  cfg.lambda_ac = c.get_double("captioner", "lambda_ac", cfg.lambda_ac);
  cfg.ramp.start_epoch =
      static_cast<int>(c.get_int("captioner", "ramp_start", cfg.ramp.start_epoch));
  cfg.ramp.end_epoch =
      static_cast<int>(c.get_int("captioner", "ramp_end", cfg.ramp.end_epoch));
  cfg.ramp.max_weight = c.get_double("captioner", "ramp_max", cfg.ramp.max_weight);
  cfg.epochs = static_cast<int>(c.get_int("captioner", "epochs", cfg.epochs));
  cfg.batch = static_cast<int>(c.get_int("captioner", "batch", cfg.batch));
  cfg.lr = c.get_double("captioner", "lr", cfg.lr);
  cfg.dln_unfreeze = c.get_bool("captioner", "dln_unfreeze", cfg.dln_unfreeze);
  cfg.proj_dim = static_cast<int>(c.get_int("captioner", "proj_dim", cfg.proj_dim));
  cfg.hidden = static_cast<int>(c.get_int("captioner", "hidden", cfg.hidden));
  cfg.embed_dim = static_cast<int>(c.get_int("captioner", "embed_dim", cfg.embed_dim));
  cfg.att_dim = static_cast<int>(c.get_int("captioner", "att_dim", cfg.att_dim));
  cfg.max_decode =
      static_cast<int>(c.get_int("captioner", "max_decode", cfg.max_decode));
  return cfg;
}

SyntheticConfig data_config_from(const Global& g) {
  SyntheticConfig cfg;
  const auto& c = g.config;
  cfg.subjects = static_cast<int>(c.get_int("captioner", "subjects", cfg.subjects));
  cfg.actions = static_cast<int>(c.get_int("captioner", "actions", cfg.actions));
  cfg.frames = static_cast<int>(c.get_int("captioner", "frames", cfg.frames));
  cfg.sigma = c.get_double("captioner", "sigma", cfg.sigma);
  cfg.train_size =
      static_cast<int>(c.get_int("captioner", "train_size", cfg.train_size));
  cfg.val_size = static_cast<int>(c.get_int("captioner", "val_size", cfg.val_size));
  cfg.test_size =
      static_cast<int>(c.get_int("captioner", "test_size", cfg.test_size));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dlnlab: metric-surrogate training laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed/--config may follow the subcommand

  Global g;
  app.add_option("--config", g.config_path, "sectioned key/value config file");
  auto* seed_opt = app.add_option("--seed", g.seed_flag,
                                  "root seed (overrides DLNLAB_SEED and config)");

  // score
  auto* score = app.add_subcommand("score", "exact metric oracles for sentence pairs");
  ScoreOptions score_opt;
  score->add_option("--candidate", score_opt.candidate, "candidate sentence");
  score->add_option("--reference", score_opt.reference, "reference sentence");
  score->add_option("--pairs", score_opt.pairs_file,
                    "TSV file of candidate<TAB>reference pairs");
  score->add_option("--idf-corpus", score_opt.idf_corpus,
                    "corpus file for the CIDEr IDF table");
  score->add_option("--out", score_opt.out_csv, "optional CSV output");

  // pairgen
  auto* pairgen = app.add_subcommand("pairgen", "generate scored perturbation pairs");
  PairgenOptions pg_opt;
  pairgen->add_option("--corpus", pg_opt.corpus_path,
                      "one-sentence-per-line corpus (default: bundled synthetic)");
  pairgen->add_option("--count", pg_opt.count, "number of records");
  pairgen->add_option("--p", pg_opt.p, "per-word perturbation probability");
  std::string ops = "delete,swap";
  pairgen->add_option("--ops", ops, "enabled ops: delete,swap");
  pairgen->add_option("--out", pg_opt.out_path, "output record file")->required();

  // dln-train
  auto* dln_train = app.add_subcommand("dln-train", "stage-1 surrogate training");
  DlnTrainOptions dt_opt;
  dln_train->add_option("--records", dt_opt.records_path, "scored pair records")
      ->required();
  dln_train->add_option("--out", dt_opt.out_checkpoint, "output checkpoint")
      ->required();
  dln_train->add_option("--log", dt_opt.log_csv, "per-epoch log CSV");
  int dln_epochs = -1, dln_batch = -1;
  dln_train->add_option("--epochs", dln_epochs, "override epochs");
  dln_train->add_option("--batch", dln_batch, "override batch size");

  // dln-eval
  auto* dln_eval = app.add_subcommand("dln-eval", "stage-1 held-out report");
  DlnEvalOptions de_opt;
  dln_eval->add_option("--checkpoint", de_opt.checkpoint, "dln checkpoint")
      ->required();
  dln_eval->add_option("--records", de_opt.records_path, "scored pair records")
      ->required();
  dln_eval->add_option("--report", de_opt.report_csv, "report CSV");
  dln_eval->add_option("--hist", de_opt.hist_prefix,
                       "histogram CSV prefix (writes <prefix>_bleu.csv ...)");

  // cap-train
  auto* cap_train = app.add_subcommand("cap-train", "stage-2 captioner training");
  CapTrainOptions ct_opt;
  cap_train->add_flag("--with-dln", ct_opt.with_dln,
                      "add the surrogate loss to the objective");
  cap_train->add_option("--dln-checkpoint", ct_opt.dln_checkpoint,
                        "stage-1 checkpoint");
  cap_train->add_option("--vocab", ct_opt.vocab_path, "explicit vocabulary file");
  cap_train->add_option("--out", ct_opt.out_checkpoint, "output checkpoint")
      ->required();
  cap_train->add_option("--log", ct_opt.log_csv, "per-epoch log CSV");
  cap_train->add_option("--harvest-out", ct_opt.harvest_out,
                        "write per-epoch (prediction, truth) scored records");
  int cap_epochs = -1;
  cap_train->add_option("--epochs", cap_epochs, "override epochs");

  // cap-eval
  auto* cap_eval = app.add_subcommand("cap-eval", "greedy-decode test evaluation");
  CapEvalOptions ce_opt;
  cap_eval->add_option("--checkpoint", ce_opt.checkpoint, "captioner checkpoint")
      ->required();
  cap_eval->add_option("--report", ce_opt.report_csv, "report CSV");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "paired baseline vs +DLN runs");
  AblateOptions ab_opt;
  ablate->add_option("--seeds", ab_opt.seeds, "number of paired seeds");
  ablate->add_option("--dln-checkpoint", ab_opt.dln_checkpoint,
                     "stage-1 checkpoint")
      ->required();
  ablate->add_option("--out-dir", ab_opt.out_dir, "directory for per-run logs");
  ablate->add_option("--jobs", ab_opt.jobs, "concurrent runs");
  int ablate_epochs = -1;
  ablate->add_option("--epochs", ablate_epochs, "override epochs");

  // curves
  auto* curves = app.add_subcommand("curves", "merge training logs for plotting");
  CurvesOptions cv_opt;
  std::vector<std::string> curve_logs;
  curves->add_option("--log", curve_logs, "label:path of a training log CSV")
      ->required();
  curves->add_option("--out", cv_opt.out_csv, "merged CSV")->required();

  CLI11_PARSE(app, argc, argv);
  g.seed_flag_given = seed_opt->count() > 0;

  try {
    if (!g.config_path.empty()) g.config = RunConfig::parse_file(g.config_path);
    const uint64_t root = g.root_seed();

    if (*score) {
      if (score_opt.idf_corpus.empty()) {
        score_opt.idf_corpus = g.config.get_str("paths", "idf_corpus", "");
      }
      const auto rows = run_score(score_opt);
      for (const auto& r : rows) {
        std::printf("bleu=%.6f meteor=%.6f cider=%.6f rouge_l=%.6f\t%s\t%s\n",
                    r.triple.bleu, r.triple.meteor, r.triple.cider, r.rouge,
                    r.candidate.c_str(), r.reference.c_str());
      }
    } else if (*pairgen) {
      parse_ops(ops, pg_opt.op_delete, pg_opt.op_swap);
      if (pg_opt.corpus_path.empty()) {
        pg_opt.corpus_path = g.config.get_str("paths", "corpus", "");
      }
      if (pairgen->count("--count") == 0) {
        pg_opt.count =
            static_cast<int>(g.config.get_int("pairgen", "count", pg_opt.count));
      }
      if (pairgen->count("--p") == 0) {
        pg_opt.p = g.config.get_double("pairgen", "p", pg_opt.p);
      }
      pg_opt.corpus_sentences = static_cast<int>(g.config.get_int(
          "pairgen", "corpus_sentences", pg_opt.corpus_sentences));
      pg_opt.seed = root;
      run_pairgen(pg_opt);
      std::printf("wrote %d records to %s\n", pg_opt.count,
                  pg_opt.out_path.c_str());
    } else if (*dln_train) {
      dt_opt.cfg = dln_config_from(g);
      if (dln_epochs > 0) dt_opt.cfg.epochs = dln_epochs;
      if (dln_batch > 0) dt_opt.cfg.batch = dln_batch;
      dt_opt.vocab_min_count =
          static_cast<int>(g.config.get_int("dln", "min_count", 5));
      dt_opt.seed = root;
      const Stage1Result res = run_dln_train(dt_opt);
      const auto& last = res.epochs.back();
      std::printf(
          "stage-1 done: best epoch %d, held-out r_bleu=%.4f r_meteor=%.4f "
          "r_cider=%.4f\n",
          res.best_epoch, last.r_bleu, last.r_meteor, last.r_cider);
    } else if (*dln_eval) {
      const Stage1EvalReport rep = run_dln_eval(de_opt);
      std::printf("r_bleu=%.4f mae=%.4f%s\n", rep.r_bleu, rep.mae_bleu,
                  rep.degenerate_bleu ? " (degenerate)" : "");
      std::printf("r_meteor=%.4f mae=%.4f%s\n", rep.r_meteor, rep.mae_meteor,
                  rep.degenerate_meteor ? " (degenerate)" : "");
      std::printf("r_cider=%.4f mae=%.4f%s\n", rep.r_cider, rep.mae_cider,
                  rep.degenerate_cider ? " (degenerate)" : "");
    } else if (*cap_train) {
      ct_opt.cfg = stage2_config_from(g);
      if (cap_epochs > 0) ct_opt.cfg.epochs = cap_epochs;
      ct_opt.data_cfg = data_config_from(g);
      if (ct_opt.dln_checkpoint.empty()) {
        ct_opt.dln_checkpoint = g.config.get_str("paths", "dln_checkpoint", "");
      }
      ct_opt.seed = root;
      const Stage2Result res = run_cap_train(ct_opt);
      const auto& last = res.epochs.back();
      std::printf(
          "stage-2 done: epoch %d val_bleu=%.4f val_meteor=%.4f "
          "val_cider=%.4f val_rouge=%.4f\n",
          last.epoch, last.val_bleu, last.val_meteor, last.val_cider,
          last.val_rouge);
    } else if (*cap_eval) {
      const CapEvalReport rep = run_cap_eval(ce_opt);
      std::printf(
          "test bleu=%.4f meteor=%.4f cider=%.4f rouge_l=%.4f dln_calls=%llu\n",
          rep.bleu, rep.meteor, rep.cider, rep.rouge,
          static_cast<unsigned long long>(rep.dln_calls_during_eval));
    } else if (*ablate) {
      ab_opt.cfg = stage2_config_from(g);
      if (ablate_epochs > 0) ab_opt.cfg.epochs = ablate_epochs;
      ab_opt.data_cfg = data_config_from(g);
      ab_opt.root_seed = root;
      const AblateReport rep = run_ablate(ab_opt);
      std::fputs(rep.table().c_str(), stdout);
    } else if (*curves) {
      for (const auto& spec : curve_logs) {
        const auto colon = spec.find(':');
        if (colon == std::string::npos) {
          throw ConfigError("curves --log expects label:path, got \"" + spec +
                            "\"");
        }
        cv_opt.logs.emplace_back(spec.substr(0, colon), spec.substr(colon + 1));
      }
      run_curves(cv_opt);
      std::printf("wrote %s\n", cv_opt.out_csv.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "dlnlab: %s\n", e.what());
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dlnlab: %s\n", e.what());
    return 1;
  }
  return 0;
}
