#ifndef DLNLAB_PAIRGEN_HPP
#define DLNLAB_PAIRGEN_HPP

#include <optional>
#include <tuple>
#include <vector>

#include "dlnlab/metrics.hpp"
#include "dlnlab/rng.hpp"
#include "dlnlab/text.hpp"

namespace dlnlab {

struct PerturbPolicy {
  double p = 0.25;           // independent per-word selection probability
  bool allow_delete = true;  // at least one op must stay enabled
  bool allow_swap = true;
  uint64_t seed = 42;
};

enum class Provenance { perturbed, harvested };

struct ScoredPairRecord {
  TokenSeq candidate;
  TokenSeq reference;
  MetricTriple truth;
  Provenance provenance = Provenance::perturbed;
  std::optional<int> epoch;

  bool operator==(const ScoredPairRecord& o) const {
    return candidate == o.candidate && reference == o.reference &&
           truth.bleu == o.truth.bleu && truth.meteor == o.truth.meteor &&
           truth.cider == o.truth.cider && provenance == o.provenance &&
           epoch == o.epoch;
  }
};

enum class PerturbDecision { keep, erase, swap_right };

// Per-position op draws, exposed so tests can check the selection rate.
std::vector<PerturbDecision> draw_perturb_decisions(size_t len,
                                                    const PerturbPolicy& policy,
                                                    Rng& rng);

// Applies one decision per original position: deletions first (but at least
// one token always survives; if everything is marked for deletion the first
// token is kept), then swaps in left-to-right original order. A swap
// exchanges the surviving token with its current right neighbor; the last
// position swaps left.
TokenSeq perturb_sentence(const TokenSeq& seq, const PerturbPolicy& policy,
                          Rng& rng);

// Stage-1 strategy (i): sample corpus sentences uniformly with replacement,
// emit (perturbed, original) pairs scored by the exact oracles. Record k
// draws from an independent stream split(policy.seed, k), so the stream is
// reproducible and order-independent.
std::vector<ScoredPairRecord> generate_pairs(const std::vector<TokenSeq>& corpus,
                                             const PerturbPolicy& policy,
                                             int count, const IdfTable& idf);

// Stage-1 strategy (ii): score harvested (prediction, ground truth, epoch)
// triples from captioner training runs.
std::vector<ScoredPairRecord> harvest_pairs(
    const std::vector<std::tuple<TokenSeq, TokenSeq, int>>& decoded,
    const IdfTable& idf);

// Line-delimited JSON records:
//   {"candidate": ..., "reference": ..., "bleu": ..., "meteor": ...,
//    "cider": ..., "provenance": ..., "epoch": ...}
// read(write(x)) == x; malformed lines raise MalformedRecord with the line
// number.
void write_records(const std::string& path,
                   const std::vector<ScoredPairRecord>& records);
std::vector<ScoredPairRecord> read_records(const std::string& path);

}  // namespace dlnlab

#endif  // DLNLAB_PAIRGEN_HPP
