#ifndef DLNLAB_TEXT_HPP
#define DLNLAB_TEXT_HPP

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dlnlab/errors.hpp"

namespace dlnlab {

// A tokenized sentence: lowercase words, no empty tokens.
struct TokenSeq {
  std::vector<std::string> tokens;

  TokenSeq() = default;
  explicit TokenSeq(std::vector<std::string> words);

  size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const std::string& operator[](size_t i) const { return tokens[i]; }
  bool operator==(const TokenSeq& other) const { return tokens == other.tokens; }

  // Space-joined form; tokens never contain whitespace so this round-trips
  // through tokenize() for already-clean text.
  std::string join() const;
};

// Lowercase, strip characters outside [a-z0-9'], split on whitespace.
// Throws EmptyAfterTokenize if nothing survives.
TokenSeq tokenize(std::string_view text);

// First min(len, max_len) tokens. max_len must be >= 1.
TokenSeq truncate(const TokenSeq& seq, size_t max_len);

// Word/id mapping with dense ids and fixed reserved slots. Non-reserved
// words are those with at least min_count occurrences in the build corpus,
// assigned ids in lexicographic order so that corpora with equal word sets
// produce identical vocabularies regardless of sampling order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSep = 4;
  static constexpr int kNumReserved = 5;

  Vocabulary() = default;

  static Vocabulary build(const std::vector<TokenSeq>& corpus, int min_count);

  int encode_word(const std::string& word) const;
  std::vector<int> encode(const TokenSeq& seq) const;
  const std::string& decode_word(int id) const;  // IndexOutOfRange on bad id
  TokenSeq decode(const std::vector<int>& ids) const;

  bool contains(const std::string& word) const;
  int size() const { return static_cast<int>(id_to_word_.size()); }

  // Line-oriented "word<TAB>id" persistence.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const {
    return id_to_word_ == other.id_to_word_;
  }

 private:
  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, int> word_to_id_;

  void index_words();
};

using NGram = std::vector<std::string>;

// Multiset of the contiguous n-grams of one sentence.
class NGramMultiset {
 public:
  explicit NGramMultiset(int order) : order_(order) {}

  int order() const { return order_; }
  const std::map<NGram, int>& counts() const { return counts_; }
  int total() const { return total_; }
  void add(NGram g) {
    ++counts_[std::move(g)];
    ++total_;
  }

 private:
  int order_;
  std::map<NGram, int> counts_;
  int total_ = 0;
};

// All contiguous n-grams with multiplicity; empty when len(seq) < n.
NGramMultiset ngrams(const TokenSeq& seq, int n);

// Corpus input: UTF-8 text, one sentence per line; blank lines skipped.
// Each line is tokenized and truncated to max_len tokens.
std::vector<TokenSeq> load_corpus(const std::string& path, size_t max_len = 30);

}  // namespace dlnlab

#endif  // DLNLAB_TEXT_HPP
