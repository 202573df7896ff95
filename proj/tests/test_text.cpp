#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dlnlab/text.hpp"
#include "test_util.hpp"

using namespace dlnlab;

TEST_CASE("tokenize lowercases and strips punctuation") {
  CHECK(tokenize("A man is Cooking.").tokens ==
        std::vector<std::string>{"a", "man", "is", "cooking"});
  CHECK(tokenize("the cat").tokens == std::vector<std::string>{"the", "cat"});
  CHECK(tokenize("man's dog!").tokens ==
        std::vector<std::string>{"man's", "dog"});
  CHECK(tokenize("  42 red Balloons  ").tokens ==
        std::vector<std::string>{"42", "red", "balloons"});
  CHECK_THROWS_AS(tokenize("!!!"), EmptyAfterTokenize);
  CHECK_THROWS_AS(tokenize("   "), EmptyAfterTokenize);
}

TEST_CASE("tokenize is idempotent") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const TokenSeq s = testutil::random_sentence(rng);
    const TokenSeq again = tokenize(tokenize(s.join()).join());
    CHECK(again == tokenize(s.join()));
  }
}

TEST_CASE("truncate keeps a prefix") {
  std::vector<std::string> long_words;
  for (int i = 0; i < 35; ++i) long_words.push_back("w" + std::to_string(i));
  const TokenSeq seq(long_words);
  CHECK(truncate(seq, 30).size() == 30);
  CHECK(truncate(seq, 30).tokens[29] == "w29");
  const TokenSeq small = tokenize("a b c d e");
  CHECK(truncate(small, 30) == small);
  CHECK(truncate(small, 1).tokens == std::vector<std::string>{"a"});
}

TEST_CASE("vocabulary respects the frequency floor") {
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(tokenize("cat"));
  corpus.push_back(tokenize("zebra"));
  const Vocabulary v = Vocabulary::build(corpus, 5);
  CHECK(v.contains("cat"));
  CHECK_FALSE(v.contains("zebra"));
  CHECK(v.encode_word("zebra") == Vocabulary::kUnk);
  CHECK(v.encode_word("cat") >= Vocabulary::kNumReserved);
}

TEST_CASE("vocabulary min_count 1 keeps every word") {
  const std::vector<TokenSeq> corpus = {tokenize("a b c"), tokenize("d e")};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  CHECK(v.size() == Vocabulary::kNumReserved + 5);
}

TEST_CASE("vocabulary encode/decode round trip") {
  Rng rng(13);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(testutil::random_sentence(rng));
  const Vocabulary v = Vocabulary::build(corpus, 1);
  for (int i = 0; i < 50; ++i) {
    const TokenSeq s = testutil::random_sentence(rng);
    const auto ids = v.encode(s);
    const TokenSeq back = v.decode(ids);
    for (size_t k = 0; k < s.size(); ++k) {
      if (v.contains(s.tokens[k])) {
        CHECK(back.tokens[k] == s.tokens[k]);
      } else {
        CHECK(ids[k] == Vocabulary::kUnk);
      }
    }
  }
  CHECK_THROWS_AS(v.decode_word(-1), IndexOutOfRange);
  CHECK_THROWS_AS(v.decode_word(v.size()), IndexOutOfRange);
}

TEST_CASE("vocabulary persists as word<TAB>id") {
  const std::vector<TokenSeq> corpus = {tokenize("a man is cooking"),
                                        tokenize("a woman is running")};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_vocab_test.tsv").string();
  v.save(path);
  const Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded == v);
  std::filesystem::remove(path);
}

TEST_CASE("ngrams enumerate with multiplicity") {
  const TokenSeq s = tokenize("the cat sat");
  const auto bi = ngrams(s, 2);
  CHECK(bi.total() == 2);
  CHECK(bi.counts().at({"the", "cat"}) == 1);
  CHECK(bi.counts().at({"cat", "sat"}) == 1);

  const auto uni = ngrams(tokenize("the the the"), 1);
  CHECK(uni.counts().at({"the"}) == 3);

  CHECK(ngrams(tokenize("a b"), 3).total() == 0);
}

TEST_CASE("ngram totals match sequence length") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const TokenSeq s = testutil::random_sentence(rng);
    for (int n = 1; n <= 5; ++n) {
      const int expect =
          std::max(0, static_cast<int>(s.size()) - n + 1);
      CHECK(ngrams(s, n).total() == expect);
    }
  }
}

TEST_CASE("corpus loader skips blank lines and truncates") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_corpus_test.txt").string();
  {
    std::ofstream out(path);
    out << "A man is cooking.\n\n   \nthe cat\n";
    std::string long_line;
    for (int i = 0; i < 40; ++i) long_line += "word ";
    out << long_line << "\n";
  }
  const auto corpus = load_corpus(path);
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[0].tokens == std::vector<std::string>{"a", "man", "is", "cooking"});
  CHECK(corpus[2].size() == 30);
  std::filesystem::remove(path);
}
