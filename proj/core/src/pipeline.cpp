#include "dlnlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "dlnlab/rng.hpp"

namespace dlnlab {

namespace {

std::vector<std::pair<std::string, std::string>> read_pairs_tsv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pairs file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw MalformedRecord(lineno, "expected candidate<TAB>reference in " + path);
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace

std::vector<ScoreRow> run_score(const ScoreOptions& opt) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!opt.pairs_file.empty()) {
    pairs = read_pairs_tsv(opt.pairs_file);
  } else {
    if (opt.candidate.empty() || opt.reference.empty()) {
      throw ConfigError("score: provide --candidate and --reference, or --pairs");
    }
    pairs.emplace_back(opt.candidate, opt.reference);
  }
  if (pairs.empty()) throw EmptyInput("score: no pairs to score");

  std::vector<TokenSeq> idf_corpus;
  if (!opt.idf_corpus.empty()) {
    idf_corpus = load_corpus(opt.idf_corpus);
  } else {
    for (const auto& [cand, ref] : pairs) {
      (void)cand;
      idf_corpus.push_back(tokenize(ref));
    }
  }
  const IdfTable idf = IdfTable::build(idf_corpus);

  std::vector<ScoreRow> rows;
  for (const auto& [cand_text, ref_text] : pairs) {
    ScoreRow row;
    row.candidate = cand_text;
    row.reference = ref_text;
    const TokenSeq cand = tokenize(cand_text);
    const TokenSeq ref = tokenize(ref_text);
    row.triple = score_triple(cand, ref, idf);
    row.rouge = rouge_l(cand, ref);
    rows.push_back(std::move(row));
  }

  if (!opt.out_csv.empty()) {
    std::ofstream out(opt.out_csv);
    if (!out) throw IoError("cannot open score csv: " + opt.out_csv);
    out << "candidate,reference,bleu,meteor,cider,rouge_l\n";
    char buf[256];
    for (const auto& r : rows) {
      out << '"' << r.candidate << "\",\"" << r.reference << "\",";
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.triple.bleu,
                    r.triple.meteor, r.triple.cider, r.rouge);
      out << buf;
    }
  }
  return rows;
}

void run_pairgen(const PairgenOptions& opt) {
  if (opt.out_path.empty()) throw ConfigError("pairgen: --out is required");
  std::vector<TokenSeq> corpus;
  if (opt.corpus_path.empty()) {
    corpus = synthetic_corpus(opt.corpus_sentences, opt.seed);
  } else {
    corpus = load_corpus(opt.corpus_path);
  }
  const IdfTable idf = IdfTable::build(corpus);
  PerturbPolicy policy;
  policy.p = opt.p;
  policy.allow_delete = opt.op_delete;
  policy.allow_swap = opt.op_swap;
  policy.seed = opt.seed;
  const auto records = generate_pairs(corpus, policy, opt.count, idf);
  write_records(opt.out_path, records);
}

Stage1Result run_dln_train(const DlnTrainOptions& opt) {
  if (opt.records_path.empty() || opt.out_checkpoint.empty()) {
    throw ConfigError("dln-train: --records and --out are required");
  }
  const auto records = read_records(opt.records_path);
  if (records.empty()) throw DatasetTooSmall("dln-train: record file is empty");

  // Vocabulary over every sentence in the record file, so candidate-side
  // perturbed words stay in-vocabulary.
  std::vector<TokenSeq> vocab_corpus;
  vocab_corpus.reserve(records.size() * 2);
  for (const auto& r : records) {
    vocab_corpus.push_back(r.candidate);
    vocab_corpus.push_back(r.reference);
  }
  Vocabulary vocab = Vocabulary::build(vocab_corpus, opt.vocab_min_count);

  DlnModel model(opt.cfg, std::move(vocab), Rng::split(opt.seed, 1));
  Stage1Result result = train_stage1(model, records, Rng::split(opt.seed, 2));
  model.save(opt.out_checkpoint);
  if (!opt.log_csv.empty()) write_stage1_log_csv(opt.log_csv, result.epochs);
  return result;
}

Stage1EvalReport run_dln_eval(const DlnEvalOptions& opt) {
  if (opt.checkpoint.empty() || opt.records_path.empty()) {
    throw ConfigError("dln-eval: --checkpoint and --records are required");
  }
  DlnModel model = DlnModel::load(opt.checkpoint);
  const auto records = read_records(opt.records_path);
  Stage1EvalReport report = eval_stage1(model, records);
  if (!opt.report_csv.empty()) write_stage1_report_csv(opt.report_csv, report);
  if (!opt.hist_prefix.empty()) {
    write_stage1_histograms_csv(opt.hist_prefix, report);
  }
  return report;
}

namespace {

Vocabulary caption_vocabulary(const SyntheticDataset& data) {
  std::vector<TokenSeq> corpus;
  corpus.reserve(data.train.size());
  for (const auto& v : data.train) corpus.push_back(v.caption);
  return Vocabulary::build(corpus, 1);
}

}  // namespace

Stage2Result run_cap_train(const CapTrainOptions& opt) {
  if (opt.out_checkpoint.empty()) throw ConfigError("cap-train: --out is required");
  const uint64_t data_seed = Rng::split(opt.seed, 1);
  const SyntheticDataset data = generate_synthetic_dataset(opt.data_cfg, data_seed);

  std::unique_ptr<DlnModel> dln;
  Vocabulary vocab;
  if (opt.with_dln) {
    if (opt.dln_checkpoint.empty() ||
        !std::filesystem::exists(opt.dln_checkpoint)) {
      throw MissingDlnCheckpoint("cap-train --with-dln needs --dln-checkpoint (" +
                                 opt.dln_checkpoint + ")");
    }
    dln = std::make_unique<DlnModel>(DlnModel::load(opt.dln_checkpoint));
    vocab = dln->vocab();
  } else if (!opt.vocab_path.empty()) {
    vocab = Vocabulary::load(opt.vocab_path);
  } else {
    vocab = caption_vocabulary(data);
  }

  CaptionerModel model(opt.cfg, std::move(vocab), opt.data_cfg.subjects,
                       opt.data_cfg.actions, Rng::split(opt.seed, 2));
  std::vector<std::tuple<TokenSeq, TokenSeq, int>> harvested;
  Stage2Result result = train_captioner(
      model, data, dln.get(), opt.cfg, Rng::split(opt.seed, 3),
      opt.harvest_out.empty() ? nullptr : &harvested);
  model.save(opt.out_checkpoint, opt.data_cfg, data_seed);
  if (!opt.log_csv.empty()) write_stage2_log_csv(opt.log_csv, result.epochs);
  if (!opt.harvest_out.empty()) {
    std::vector<TokenSeq> refs;
    refs.reserve(data.train.size());
    for (const auto& v : data.train) refs.push_back(v.caption);
    write_records(opt.harvest_out, harvest_pairs(harvested, IdfTable::build(refs)));
  }
  return result;
}

CapEvalReport run_cap_eval(const CapEvalOptions& opt) {
  if (opt.checkpoint.empty()) throw ConfigError("cap-eval: --checkpoint is required");
  LoadedCaptioner loaded = CaptionerModel::load(opt.checkpoint);
  const SyntheticDataset data =
      generate_synthetic_dataset(loaded.data_cfg, loaded.data_seed);
  CapEvalReport report = evaluate_captioner(loaded.model, data.test);
  if (!opt.report_csv.empty()) write_cap_eval_csv(opt.report_csv, report);
  return report;
}

namespace {

struct ArmResult {
  CapEvalReport report;
  Stage2Result log;
};

ArmResult run_one_arm(const AblateOptions& opt, uint64_t seed, bool with_dln) {
  const SyntheticDataset data =
      generate_synthetic_dataset(opt.data_cfg, Rng::split(seed, 1));
  // Each run owns a private DLN instance; parameter gradients are per-run
  // state, so instances cannot be shared across concurrent arms. The
  // baseline arm still takes the DLN vocabulary so both arms encode
  // captions identically.
  auto dln = std::make_unique<DlnModel>(DlnModel::load(opt.dln_checkpoint));
  Vocabulary vocab = dln->vocab();
  if (!with_dln) dln.reset();
  CaptionerModel model(opt.cfg, std::move(vocab), opt.data_cfg.subjects,
                       opt.data_cfg.actions, Rng::split(seed, 2));
  ArmResult out;
  out.log = train_captioner(model, data, dln.get(), opt.cfg, Rng::split(seed, 3));
  out.report = evaluate_captioner(model, data.test);
  return out;
}

std::array<double, 4> report_values(const CapEvalReport& r) {
  return {r.bleu, r.meteor, r.cider, r.rouge};
}

void mean_std(const std::vector<std::array<double, 4>>& xs,
              std::array<double, 4>& mean, std::array<double, 4>& stddev) {
  const double n = static_cast<double>(xs.size());
  mean = {0, 0, 0, 0};
  stddev = {0, 0, 0, 0};
  for (const auto& x : xs) {
    for (int i = 0; i < 4; ++i) mean[static_cast<size_t>(i)] += x[static_cast<size_t>(i)];
  }
  for (int i = 0; i < 4; ++i) mean[static_cast<size_t>(i)] /= n;
  for (const auto& x : xs) {
    for (int i = 0; i < 4; ++i) {
      const double d = x[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)];
      stddev[static_cast<size_t>(i)] += d * d;
    }
  }
  for (int i = 0; i < 4; ++i) {
    stddev[static_cast<size_t>(i)] = std::sqrt(stddev[static_cast<size_t>(i)] / n);
  }
}

}  // namespace

std::string AblateReport::table() const {
  char buf[512];
  std::string out;
  out += "arm       bleu            meteor          cider           rouge_l\n";
  std::snprintf(buf, sizeof buf,
                "baseline  %.4f +- %.4f %.4f +- %.4f %.4f +- %.4f %.4f +- %.4f\n",
                baseline_mean[0], baseline_std[0], baseline_mean[1],
                baseline_std[1], baseline_mean[2], baseline_std[2],
                baseline_mean[3], baseline_std[3]);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "with-dln  %.4f +- %.4f %.4f +- %.4f %.4f +- %.4f %.4f +- %.4f\n",
                dln_mean[0], dln_std[0], dln_mean[1], dln_std[1], dln_mean[2],
                dln_std[2], dln_mean[3], dln_std[3]);
  out += buf;
  std::snprintf(buf, sizeof buf, "cider improved in %d of %zu paired seeds\n",
                cider_improved, runs.size());
  out += buf;
  return out;
}

AblateReport run_ablate(const AblateOptions& opt) {
  if (opt.seeds < 1) throw ConfigError("ablate: --seeds must be >= 1");
  if (opt.dln_checkpoint.empty() ||
      !std::filesystem::exists(opt.dln_checkpoint)) {
    throw MissingDlnCheckpoint("ablate needs --dln-checkpoint (" +
                               opt.dln_checkpoint + ")");
  }
  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

  std::vector<uint64_t> seeds;
  std::set<uint64_t> seen;
  for (int k = 0; k < opt.seeds; ++k) {
    uint64_t s = Rng::split(opt.root_seed, 0xAB1A7E + static_cast<uint64_t>(k));
    while (seen.count(s)) ++s;  // replicate seeds never repeat within a run
    seen.insert(s);
    seeds.push_back(s);
  }

  struct Task {
    uint64_t seed;
    bool with_dln;
  };
  std::vector<Task> tasks;
  for (uint64_t s : seeds) {
    tasks.push_back({s, false});
    tasks.push_back({s, true});
  }

  std::vector<ArmResult> results(tasks.size());
  const int jobs = std::max(1, opt.jobs);
  size_t next = 0;
  while (next < tasks.size()) {
    const size_t wave = std::min<size_t>(static_cast<size_t>(jobs),
                                         tasks.size() - next);
    std::vector<std::future<ArmResult>> futures;
    for (size_t i = 0; i < wave; ++i) {
      const Task t = tasks[next + i];
      futures.push_back(std::async(std::launch::async, [&opt, t] {
        return run_one_arm(opt, t.seed, t.with_dln);
      }));
    }
    for (size_t i = 0; i < wave; ++i) results[next + i] = futures[i].get();
    next += wave;
  }

  AblateReport report;
  std::vector<std::array<double, 4>> base_vals, dln_vals;
  for (int k = 0; k < opt.seeds; ++k) {
    AblateRun run;
    run.seed = seeds[static_cast<size_t>(k)];
    run.baseline = results[static_cast<size_t>(2 * k)].report;
    run.with_dln = results[static_cast<size_t>(2 * k + 1)].report;
    base_vals.push_back(report_values(run.baseline));
    dln_vals.push_back(report_values(run.with_dln));
    if (run.with_dln.cider > run.baseline.cider) ++report.cider_improved;
    report.runs.push_back(std::move(run));

    if (!opt.out_dir.empty()) {
      const std::string stem =
          opt.out_dir + "/run" + std::to_string(k) + "_";
      write_stage2_log_csv(stem + "baseline.csv",
                           results[static_cast<size_t>(2 * k)].log.epochs);
      write_stage2_log_csv(stem + "dln.csv",
                           results[static_cast<size_t>(2 * k + 1)].log.epochs);
    }
  }
  mean_std(base_vals, report.baseline_mean, report.baseline_std);
  mean_std(dln_vals, report.dln_mean, report.dln_std);

  if (!opt.out_dir.empty()) {
    std::ofstream out(opt.out_dir + "/ablate_summary.csv");
    if (!out) throw IoError("cannot open ablate summary csv");
    out << "seed,arm,bleu,meteor,cider,rouge_l\n";
    char buf[256];
    for (size_t k = 0; k < report.runs.size(); ++k) {
      const auto& run = report.runs[k];
      std::snprintf(buf, sizeof buf, "%llu,baseline,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(run.seed), run.baseline.bleu,
                    run.baseline.meteor, run.baseline.cider, run.baseline.rouge);
      out << buf;
      std::snprintf(buf, sizeof buf, "%llu,with_dln,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<unsigned long long>(run.seed), run.with_dln.bleu,
                    run.with_dln.meteor, run.with_dln.cider, run.with_dln.rouge);
      out << buf;
    }
  }
  return report;
}

void run_curves(const CurvesOptions& opt) {
  if (opt.logs.empty()) throw ConfigError("curves: at least one --log is required");
  if (opt.out_csv.empty()) throw ConfigError("curves: --out is required");
  std::ofstream out(opt.out_csv);
  if (!out) throw IoError("cannot open curves csv: " + opt.out_csv);
  out << "run,epoch,l_ld,l_dln,l_c,total,val_bleu,val_meteor,val_cider,val_rouge\n";
  for (const auto& [label, path] : opt.logs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open training log: " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno == 1) {
        if (line.rfind("epoch,", 0) != 0) {
          throw MalformedRecord(lineno, "not a stage-2 training log: " + path);
        }
        continue;
      }
      if (line.empty()) continue;
      out << label << ',' << line << '\n';
    }
  }
}

}  // namespace dlnlab
