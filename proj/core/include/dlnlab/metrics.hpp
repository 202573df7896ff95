#ifndef DLNLAB_METRICS_HPP
#define DLNLAB_METRICS_HPP

#include <array>
#include <map>
#include <vector>

#include "dlnlab/text.hpp"

namespace dlnlab {

// (BLEU, METEOR-lite, CIDEr-D/10), each normalized to [0,1]. These are the
// regression targets the surrogate network is trained on; ROUGE-L is
// reported for evaluation only and stays out of the triple.
struct MetricTriple {
  double bleu = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
};

// IDF weights per n-gram order (n = 1..4) over a reference corpus.
// df(g) counts sentences containing g at least once; idf = log(D/df).
// N-grams never seen in the corpus take the maximum weight log(D).
class IdfTable {
 public:
  static constexpr int kMaxOrder = 4;

  IdfTable() = default;
  static IdfTable build(const std::vector<TokenSeq>& reference_corpus);

  double idf(int n, const NGram& g) const;
  int document_count() const { return doc_count_; }
  bool empty() const { return doc_count_ == 0; }

 private:
  std::array<std::map<NGram, double>, kMaxOrder + 1> idf_;  // index by n
  int doc_count_ = 0;
};

// Sentence BLEU with clipped modified n-gram precisions, geometric mean over
// n = 1..min(4, len(candidate), max reference length), brevity penalty
// exp(1 - r/c) for short candidates (r = closest reference length, ties to
// the shorter), and epsilon smoothing (1e-12) for zero-count precisions.
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

// LCS F-measure: F = (1+beta^2) P R / (R + beta^2 P); 0 when the LCS is empty.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference,
               double beta = 1.2);

// Unigram-matching score with exact-then-stem matching (stem strips one of
// "ing"/"ed"/"s" when at least two characters remain), F = 10PR/(R+9P) and
// fragmentation penalty 0.5*(chunks/m)^3. Matching picks longest common runs
// first so contiguous candidates count as single chunks.
double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference);

// CIDEr-D: per n = 1..4, clipped cosine of IDF-weighted n-gram count vectors
// times a Gaussian length penalty (sigma = 6), averaged over references and
// over n, scaled by 10. Raw value lies in [0, 10].
double cider(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
             const IdfTable& idf);

// (bleu, meteor_lite, cider/10), each clamped to [0,1].
MetricTriple score_triple(const TokenSeq& candidate, const TokenSeq& reference,
                          const IdfTable& idf);

}  // namespace dlnlab

#endif  // DLNLAB_METRICS_HPP
