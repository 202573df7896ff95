#include "dlnlab/pairgen.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace dlnlab {

using json = nlohmann::ordered_json;

std::vector<PerturbDecision> draw_perturb_decisions(size_t len,
                                                    const PerturbPolicy& policy,
                                                    Rng& rng) {
  if (!policy.allow_delete && !policy.allow_swap) {
    throw ConfigError("perturb policy must enable at least one op");
  }
  if (policy.p < 0.0 || policy.p > 1.0) {
    throw ConfigError("perturb probability must lie in [0,1]");
  }
  std::vector<PerturbDecision> out(len, PerturbDecision::keep);
  for (size_t i = 0; i < len; ++i) {
    if (rng.uniform() >= policy.p) continue;
    if (policy.allow_delete && policy.allow_swap) {
      out[i] = rng.below(2) == 0 ? PerturbDecision::erase
                                 : PerturbDecision::swap_right;
    } else if (policy.allow_delete) {
      out[i] = PerturbDecision::erase;
    } else {
      out[i] = PerturbDecision::swap_right;
    }
  }
  return out;
}

TokenSeq perturb_sentence(const TokenSeq& seq, const PerturbPolicy& policy,
                          Rng& rng) {
  if (seq.empty()) throw EmptyInput("perturb_sentence: empty sentence");
  auto decisions = draw_perturb_decisions(seq.size(), policy, rng);

  // Survival floor: keep the first token if everything was marked for
  // deletion.
  size_t deletions = 0;
  for (auto d : decisions) {
    if (d == PerturbDecision::erase) ++deletions;
  }
  if (deletions == seq.size()) decisions[0] = PerturbDecision::keep;

  std::vector<std::string> work;
  std::vector<size_t> pos_of_orig(seq.size(), SIZE_MAX);
  for (size_t i = 0; i < seq.size(); ++i) {
    if (decisions[i] == PerturbDecision::erase) continue;
    pos_of_orig[i] = work.size();
    work.push_back(seq.tokens[i]);
  }

  std::vector<size_t> orig_at(work.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    if (pos_of_orig[i] != SIZE_MAX) orig_at[pos_of_orig[i]] = i;
  }

  for (size_t i = 0; i < seq.size(); ++i) {
    if (decisions[i] != PerturbDecision::swap_right) continue;
    const size_t k = pos_of_orig[i];
    if (k == SIZE_MAX || work.size() < 2) continue;
    const size_t j = k + 1 < work.size() ? k + 1 : k - 1;
    std::swap(work[k], work[j]);
    std::swap(orig_at[k], orig_at[j]);
    pos_of_orig[orig_at[k]] = k;
    pos_of_orig[orig_at[j]] = j;
  }
  return TokenSeq(std::move(work));
}

std::vector<ScoredPairRecord> generate_pairs(const std::vector<TokenSeq>& corpus,
                                             const PerturbPolicy& policy,
                                             int count, const IdfTable& idf) {
  if (corpus.empty()) throw EmptyInput("generate_pairs: empty corpus");
  if (count < 1) throw ConfigError("generate_pairs: count must be >= 1");
  std::vector<ScoredPairRecord> records;
  records.reserve(static_cast<size_t>(count));
  for (int k = 0; k < count; ++k) {
    Rng rng(Rng::split(policy.seed, static_cast<uint64_t>(k)));
    const TokenSeq& reference = corpus[rng.below(corpus.size())];
    ScoredPairRecord rec;
    rec.reference = reference;
    rec.candidate = perturb_sentence(reference, policy, rng);
    rec.truth = score_triple(rec.candidate, rec.reference, idf);
    rec.provenance = Provenance::perturbed;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ScoredPairRecord> harvest_pairs(
    const std::vector<std::tuple<TokenSeq, TokenSeq, int>>& decoded,
    const IdfTable& idf) {
  if (decoded.empty()) throw EmptyInput("harvest_pairs: empty input");
  std::vector<ScoredPairRecord> records;
  records.reserve(decoded.size());
  for (const auto& [prediction, truth, epoch] : decoded) {
    ScoredPairRecord rec;
    rec.candidate = prediction;
    rec.reference = truth;
    rec.truth = score_triple(rec.candidate, rec.reference, idf);
    rec.provenance = Provenance::harvested;
    rec.epoch = epoch;
    records.push_back(std::move(rec));
  }
  return records;
}

void write_records(const std::string& path,
                   const std::vector<ScoredPairRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open record file for writing: " + path);
  for (const auto& rec : records) {
    json j;
    j["candidate"] = rec.candidate.join();
    j["reference"] = rec.reference.join();
    j["bleu"] = rec.truth.bleu;
    j["meteor"] = rec.truth.meteor;
    j["cider"] = rec.truth.cider;
    j["provenance"] =
        rec.provenance == Provenance::perturbed ? "perturbed" : "harvested";
    if (rec.epoch) j["epoch"] = *rec.epoch;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("record write failed: " + path);
}

std::vector<ScoredPairRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open record file: " + path);
  std::vector<ScoredPairRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw MalformedRecord(lineno, "invalid JSON record in " + path);
    }
    try {
      ScoredPairRecord rec;
      rec.candidate = tokenize(j.at("candidate").get<std::string>());
      rec.reference = tokenize(j.at("reference").get<std::string>());
      rec.truth.bleu = j.at("bleu").get<double>();
      rec.truth.meteor = j.at("meteor").get<double>();
      rec.truth.cider = j.at("cider").get<double>();
      const std::string prov = j.at("provenance").get<std::string>();
      if (prov == "perturbed") {
        rec.provenance = Provenance::perturbed;
      } else if (prov == "harvested") {
        rec.provenance = Provenance::harvested;
      } else {
        throw MalformedRecord(lineno, "unknown provenance \"" + prov + "\"");
      }
      if (j.contains("epoch")) rec.epoch = j.at("epoch").get<int>();
      records.push_back(std::move(rec));
    } catch (const MalformedRecord&) {
      throw;
    } catch (const std::exception& e) {
      throw MalformedRecord(lineno, std::string(e.what()) + " in " + path);
    }
  }
  return records;
}

}  // namespace dlnlab
