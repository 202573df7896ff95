#include "dlnlab/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace dlnlab {

TokenSeq::TokenSeq(std::vector<std::string> words) : tokens(std::move(words)) {
  if (tokens.empty()) throw EmptyInput("TokenSeq must hold at least one token");
  for (const auto& t : tokens) {
    if (t.empty()) throw EmptyInput("TokenSeq token must be non-empty");
  }
}

std::string TokenSeq::join() const {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
    cleaned.push_back(keep ? static_cast<char>(c) : ' ');
  }
  std::vector<std::string> words;
  std::istringstream in(cleaned);
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  if (words.empty()) {
    throw EmptyAfterTokenize("no tokens survive tokenization of \"" +
                             std::string(text) + "\"");
  }
  return TokenSeq(std::move(words));
}

TokenSeq truncate(const TokenSeq& seq, size_t max_len) {
  if (max_len < 1) throw EmptyInput("truncate requires max_len >= 1");
  if (seq.size() <= max_len) return seq;
  return TokenSeq(std::vector<std::string>(seq.tokens.begin(),
                                           seq.tokens.begin() + max_len));
}

namespace {
const char* kReservedNames[Vocabulary::kNumReserved] = {"<pad>", "<bos>",
                                                        "<eos>", "<unk>",
                                                        "<sep>"};
}  // namespace

Vocabulary Vocabulary::build(const std::vector<TokenSeq>& corpus,
                             int min_count) {
  if (corpus.empty()) throw EmptyInput("build_vocab requires a non-empty corpus");
  std::map<std::string, int> freq;
  for (const auto& seq : corpus) {
    for (const auto& w : seq.tokens) ++freq[w];
  }
  Vocabulary v;
  for (const char* name : kReservedNames) v.id_to_word_.emplace_back(name);
  for (const auto& [word, count] : freq) {
    if (count >= min_count) v.id_to_word_.push_back(word);
  }
  v.index_words();
  return v;
}

void Vocabulary::index_words() {
  word_to_id_.clear();
  for (int id = 0; id < static_cast<int>(id_to_word_.size()); ++id) {
    word_to_id_[id_to_word_[id]] = id;
  }
}

int Vocabulary::encode_word(const std::string& word) const {
  auto it = word_to_id_.find(word);
  if (it == word_to_id_.end()) return kUnk;
  return it->second;
}

std::vector<int> Vocabulary::encode(const TokenSeq& seq) const {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const auto& w : seq.tokens) ids.push_back(encode_word(w));
  return ids;
}

const std::string& Vocabulary::decode_word(int id) const {
  if (id < 0 || id >= size()) {
    throw IndexOutOfRange("vocabulary id " + std::to_string(id) +
                          " outside [0, " + std::to_string(size()) + ")");
  }
  return id_to_word_[id];
}

TokenSeq Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (int id : ids) words.push_back(decode_word(id));
  return TokenSeq(std::move(words));
}

bool Vocabulary::contains(const std::string& word) const {
  return word_to_id_.count(word) > 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
  for (int id = 0; id < size(); ++id) {
    out << id_to_word_[id] << '\t' << id << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw MalformedRecord(lineno, "expected word<TAB>id in " + path);
    }
    std::string word = line.substr(0, tab);
    int id = 0;
    try {
      id = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw MalformedRecord(lineno, "bad id in " + path);
    }
    if (id != static_cast<int>(v.id_to_word_.size())) {
      throw MalformedRecord(lineno, "ids must be dense and ascending in " + path);
    }
    v.id_to_word_.push_back(std::move(word));
  }
  if (v.id_to_word_.size() < kNumReserved) {
    throw MalformedRecord(lineno, "vocabulary missing reserved entries: " + path);
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (v.id_to_word_[i] != kReservedNames[i]) {
      throw MalformedRecord(i + 1, "reserved slot mismatch in " + path);
    }
  }
  v.index_words();
  return v;
}

NGramMultiset ngrams(const TokenSeq& seq, int n) {
  if (n < 1) throw EmptyInput("ngrams requires n >= 1");
  NGramMultiset out(n);
  if (seq.size() < static_cast<size_t>(n)) return out;
  for (size_t i = 0; i + n <= seq.size(); ++i) {
    NGram g(seq.tokens.begin() + i, seq.tokens.begin() + i + n);
    out.add(std::move(g));
  }
  return out;
}

std::vector<TokenSeq> load_corpus(const std::string& path, size_t max_len) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<TokenSeq> corpus;
  std::string line;
  while (std::getline(in, line)) {
    bool blank = true;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    corpus.push_back(truncate(tokenize(line), max_len));
  }
  if (corpus.empty()) throw EmptyInput("corpus file has no sentences: " + path);
  return corpus;
}

}  // namespace dlnlab
