#include "dlnlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string_view>

namespace dlnlab {

namespace {
constexpr double kBleuEps = 1e-12;
constexpr double kCiderSigma = 6.0;

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }
}  // namespace

IdfTable IdfTable::build(const std::vector<TokenSeq>& reference_corpus) {
  if (reference_corpus.empty()) {
    throw EmptyInput("build_idf requires a non-empty corpus");
  }
  IdfTable table;
  table.doc_count_ = static_cast<int>(reference_corpus.size());
  const double log_d = std::log(static_cast<double>(table.doc_count_));
  for (int n = 1; n <= kMaxOrder; ++n) {
    std::map<NGram, int> df;
    for (const auto& sent : reference_corpus) {
      const auto grams = ngrams(sent, n);
      for (const auto& [g, count] : grams.counts()) {
        (void)count;
        ++df[g];
      }
    }
    for (const auto& [g, d] : df) {
      table.idf_[n][g] = log_d - std::log(static_cast<double>(d));
    }
  }
  return table;
}

double IdfTable::idf(int n, const NGram& g) const {
  if (n < 1 || n > kMaxOrder) {
    throw IndexOutOfRange("idf order " + std::to_string(n));
  }
  auto it = idf_[n].find(g);
  if (it != idf_[n].end()) return it->second;
  // Unseen n-grams: df floored at one document.
  return std::log(static_cast<double>(doc_count_));
}

double bleu(const TokenSeq& candidate,
            const std::vector<TokenSeq>& references) {
  if (candidate.empty()) throw EmptyInput("bleu: empty candidate");
  if (references.empty()) throw EmptyInput("bleu: no references");
  size_t max_ref_len = 0;
  for (const auto& r : references) {
    if (r.empty()) throw EmptyInput("bleu: empty reference");
    max_ref_len = std::max(max_ref_len, r.size());
  }
  const size_t c_len = candidate.size();
  const int n_eff =
      static_cast<int>(std::min({size_t{4}, c_len, max_ref_len}));

  double log_sum = 0.0;
  for (int n = 1; n <= n_eff; ++n) {
    const auto cand_grams = ngrams(candidate, n);
    std::map<NGram, int> clip;
    for (const auto& r : references) {
      const auto ref_grams = ngrams(r, n);
      for (const auto& [g, count] : ref_grams.counts()) {
        auto& cur = clip[g];
        cur = std::max(cur, count);
      }
    }
    long matched = 0;
    for (const auto& [g, count] : cand_grams.counts()) {
      auto it = clip.find(g);
      if (it != clip.end()) matched += std::min(count, it->second);
    }
    const long total = static_cast<long>(c_len) - n + 1;
    const double p = matched > 0
                         ? static_cast<double>(matched) / static_cast<double>(total)
                         : kBleuEps;
    log_sum += std::log(p);
  }

  // Closest reference length; ties broken toward the shorter reference.
  size_t r_len = references.front().size();
  size_t best_gap = std::numeric_limits<size_t>::max();
  for (const auto& r : references) {
    const size_t gap = r.size() > c_len ? r.size() - c_len : c_len - r.size();
    if (gap < best_gap || (gap == best_gap && r.size() < r_len)) {
      best_gap = gap;
      r_len = r.size();
    }
  }
  const double bp =
      c_len >= r_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
  return bp * std::exp(log_sum / n_eff);
}

namespace {

size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::string_view meteor_stem(const std::string& w) {
  std::string_view v(w);
  for (std::string_view suf : {std::string_view("ing"), std::string_view("ed"),
                               std::string_view("s")}) {
    if (v.size() >= suf.size() + 2 && v.ends_with(suf)) {
      return v.substr(0, v.size() - suf.size());
    }
  }
  return v;
}

struct MatchPair {
  size_t c, r;
  bool operator<(const MatchPair& o) const {
    return c != o.c ? c < o.c : r < o.r;
  }
};

// Longest-common-run-first greedy matching over still-free positions.
// Ties resolve to the leftmost candidate start, then leftmost reference start.
template <typename Compat>
void greedy_runs(const TokenSeq& cand, const TokenSeq& ref,
                 std::vector<bool>& c_free, std::vector<bool>& r_free,
                 Compat compat, std::vector<MatchPair>& pairs) {
  for (;;) {
    size_t best_len = 0, best_i = 0, best_j = 0;
    for (size_t i = 0; i < cand.size(); ++i) {
      for (size_t j = 0; j < ref.size(); ++j) {
        size_t k = 0;
        while (i + k < cand.size() && j + k < ref.size() && c_free[i + k] &&
               r_free[j + k] && compat(cand[i + k], ref[j + k])) {
          ++k;
        }
        if (k > best_len) {
          best_len = k;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_len == 0) return;
    for (size_t t = 0; t < best_len; ++t) {
      c_free[best_i + t] = false;
      r_free[best_j + t] = false;
      pairs.push_back({best_i + t, best_j + t});
    }
  }
}

}  // namespace

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference,
               double beta) {
  if (candidate.empty() || reference.empty()) {
    throw EmptyInput("rouge_l: empty input");
  }
  if (beta <= 0.0) throw EmptyInput("rouge_l: beta must be positive");
  const double l = static_cast<double>(lcs_length(candidate, reference));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(candidate.size());
  const double r = l / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) {
    throw EmptyInput("meteor_lite: empty input");
  }
  std::vector<bool> c_free(candidate.size(), true);
  std::vector<bool> r_free(reference.size(), true);
  std::vector<MatchPair> pairs;
  greedy_runs(candidate, reference, c_free, r_free,
              [](const std::string& a, const std::string& b) { return a == b; },
              pairs);
  greedy_runs(candidate, reference, c_free, r_free,
              [](const std::string& a, const std::string& b) {
                return meteor_stem(a) == meteor_stem(b);
              },
              pairs);
  const size_t m = pairs.size();
  if (m == 0) return 0.0;
  std::sort(pairs.begin(), pairs.end());
  size_t chunks = 0;
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (k == 0 || pairs[k].c != pairs[k - 1].c + 1 ||
        pairs[k].r != pairs[k - 1].r + 1) {
      ++chunks;
    }
  }
  const double p = static_cast<double>(m) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(m) / static_cast<double>(reference.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  const double penalty = 0.5 * frag * frag * frag;
  return f * (1.0 - penalty);
}

double cider(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
             const IdfTable& idf) {
  if (candidate.empty()) throw EmptyInput("cider: empty candidate");
  if (references.empty()) throw EmptyInput("cider: no references");
  for (const auto& r : references) {
    if (r.empty()) throw EmptyInput("cider: empty reference");
  }
  if (idf.empty()) throw MissingIdf("cider: IDF table is empty");

  double total = 0.0;
  for (int n = 1; n <= IdfTable::kMaxOrder; ++n) {
    const auto cand_grams = ngrams(candidate, n);
    std::map<NGram, double> cand_vec;
    double cand_norm_sq = 0.0;
    for (const auto& [g, count] : cand_grams.counts()) {
      const double v = count * idf.idf(n, g);
      cand_vec[g] = v;
      cand_norm_sq += v * v;
    }
    const double cand_norm = std::sqrt(cand_norm_sq);

    double acc = 0.0;
    for (const auto& ref : references) {
      const auto ref_grams = ngrams(ref, n);
      std::map<NGram, double> ref_vec;
      double ref_norm_sq = 0.0;
      for (const auto& [g, count] : ref_grams.counts()) {
        const double v = count * idf.idf(n, g);
        ref_vec[g] = v;
        ref_norm_sq += v * v;
      }
      const double ref_norm = std::sqrt(ref_norm_sq);
      if (cand_norm == 0.0 || ref_norm == 0.0) continue;
      double num = 0.0;
      for (const auto& [g, v] : cand_vec) {
        auto it = ref_vec.find(g);
        if (it != ref_vec.end()) num += std::min(v, it->second) * it->second;
      }
      const double delta = static_cast<double>(candidate.size()) -
                           static_cast<double>(ref.size());
      acc += (num / (cand_norm * ref_norm)) *
             std::exp(-delta * delta / (2.0 * kCiderSigma * kCiderSigma));
    }
    total += acc / static_cast<double>(references.size());
  }
  return 10.0 * total / IdfTable::kMaxOrder;
}

MetricTriple score_triple(const TokenSeq& candidate, const TokenSeq& reference,
                          const IdfTable& idf) {
  MetricTriple t;
  t.bleu = clamp01(bleu(candidate, {reference}));
  t.meteor = clamp01(meteor_lite(candidate, reference));
  t.cider = clamp01(cider(candidate, {reference}, idf) / 10.0);
  return t;
}

}  // namespace dlnlab
