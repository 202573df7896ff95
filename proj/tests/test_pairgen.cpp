#include <doctest.h>

#include <filesystem>
#include <map>
#include <fstream>

#include "dlnlab/pairgen.hpp"
#include "test_util.hpp"

using namespace dlnlab;

namespace {

std::map<std::string, int> multiset_of(const TokenSeq& s) {
  std::map<std::string, int> m;
  for (const auto& w : s.tokens) ++m[w];
  return m;
}

}  // namespace

TEST_CASE("perturb with p=0 is the identity") {
  Rng rng(1);
  PerturbPolicy policy;
  policy.p = 0.0;
  const TokenSeq s = tokenize("a man is cooking in the kitchen");
  CHECK(perturb_sentence(s, policy, rng) == s);
}

TEST_CASE("perturb with p=1 delete-only leaves one survivor") {
  Rng rng(2);
  PerturbPolicy policy;
  policy.p = 1.0;
  policy.allow_swap = false;
  const TokenSeq s = tokenize("one two three four five");
  const TokenSeq out = perturb_sentence(s, policy, rng);
  CHECK(out.size() == 1);
  CHECK(out.tokens[0] == "one");  // survival floor keeps the first token
}

TEST_CASE("swap-only perturbation preserves the token multiset") {
  Rng rng(3);
  PerturbPolicy policy;
  policy.p = 0.6;
  policy.allow_delete = false;
  for (int i = 0; i < 200; ++i) {
    const TokenSeq s = testutil::random_sentence(rng, 1, 10);
    const TokenSeq out = perturb_sentence(s, policy, rng);
    CHECK(out.size() == s.size());
    CHECK(multiset_of(out) == multiset_of(s));
  }
}

TEST_CASE("perturbation output length stays within [1, len]") {
  Rng rng(4);
  PerturbPolicy policy;
  policy.p = 0.5;
  for (int i = 0; i < 300; ++i) {
    const TokenSeq s = testutil::random_sentence(rng, 1, 12);
    const TokenSeq out = perturb_sentence(s, policy, rng);
    CHECK(out.size() >= 1);
    CHECK(out.size() <= s.size());
  }
}

TEST_CASE("selection rate converges to p over 1e5 draws") {
  PerturbPolicy policy;
  policy.p = 0.25;
  Rng rng(1234);
  const size_t len = 20;
  const int trials = 5000;  // 1e5 positions total
  int64_t selected = 0;
  for (int i = 0; i < trials; ++i) {
    const auto decisions = draw_perturb_decisions(len, policy, rng);
    for (auto d : decisions) selected += d != PerturbDecision::keep;
  }
  const double n = static_cast<double>(trials) * len;
  const double expect = policy.p * n;
  const double sigma = std::sqrt(n * policy.p * (1.0 - policy.p));
  // chi-square with one degree of freedom; 4.5 sigma keeps the false-failure
  // rate well under 1e-4
  const double z = (static_cast<double>(selected) - expect) / sigma;
  CHECK(z * z <= 4.5 * 4.5);
}

TEST_CASE("perturb replay is byte-identical for a fixed seed") {
  const TokenSeq s =
      tokenize("the quick brown fox jumps over the lazy sleeping dog");
  REQUIRE(s.size() == 10);
  PerturbPolicy policy;
  policy.p = 0.3;
  auto run = [&] {
    Rng rng(42);
    return perturb_sentence(s, policy, rng);
  };
  const TokenSeq first = run();
  CHECK(run() == first);
  // Pinned regression fixture recorded from the reference run (seed 42).
  CHECK(first.tokens == std::vector<std::string>{"the", "brown", "fox", "jumps",
                                                 "over", "the", "sleeping",
                                                 "dog"});
}

TEST_CASE("generate_pairs contract") {
  Rng corpus_rng(9);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 20; ++i) {
    corpus.push_back(testutil::random_sentence(corpus_rng, 3, 10));
  }
  const IdfTable idf = IdfTable::build(corpus);

  SUBCASE("p=0 gives identity pairs with bleu exactly 1") {
    PerturbPolicy policy;
    policy.p = 0.0;
    const auto records = generate_pairs(corpus, policy, 50, idf);
    REQUIRE(records.size() == 50);
    for (const auto& r : records) {
      CHECK(r.candidate == r.reference);
      CHECK(r.truth.bleu == 1.0);
      CHECK(r.provenance == Provenance::perturbed);
    }
  }
  SUBCASE("count contract and record invariants") {
    PerturbPolicy policy;
    policy.p = 0.4;
    const auto records = generate_pairs(corpus, policy, 137, idf);
    CHECK(records.size() == 137);
    for (const auto& r : records) {
      CHECK(!r.candidate.empty());
      CHECK(!r.reference.empty());
      for (double v : {r.truth.bleu, r.truth.meteor, r.truth.cider}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SUBCASE("fixed seed replays the identical stream") {
    PerturbPolicy policy;
    policy.p = 0.3;
    policy.seed = 777;
    const auto a = generate_pairs(corpus, policy, 64, idf);
    const auto b = generate_pairs(corpus, policy, 64, idf);
    CHECK(a == b);
    policy.seed = 778;
    const auto c = generate_pairs(corpus, policy, 64, idf);
    CHECK(a != c);
  }
}

TEST_CASE("harvest_pairs keeps epochs and provenance") {
  const TokenSeq truth = tokenize("a man is cooking");
  const IdfTable idf = IdfTable::build({truth});
  std::vector<std::tuple<TokenSeq, TokenSeq, int>> decoded;
  decoded.emplace_back(truth, truth, 0);
  decoded.emplace_back(tokenize("zz qq ww"), truth, 3);
  decoded.emplace_back(tokenize("a man is eating"), truth, 7);
  const auto records = harvest_pairs(decoded, idf);
  REQUIRE(records.size() == 3);
  CHECK(records[0].truth.bleu == 1.0);
  CHECK(records[0].provenance == Provenance::harvested);
  CHECK(records[0].epoch == 0);
  CHECK(records[1].truth.bleu <= 1e-9);
  CHECK(records[1].truth.meteor == 0.0);
  CHECK(records[1].epoch == 3);
  CHECK(records[2].epoch == 7);
}

TEST_CASE("record files round-trip") {
  Rng rng(15);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.push_back(testutil::random_sentence(rng, 2, 8));
  }
  const IdfTable idf = IdfTable::build(corpus);
  PerturbPolicy policy;
  policy.p = 0.35;
  auto records = generate_pairs(corpus, policy, 1000, idf);
  records[3].epoch = 12;  // exercise the optional field

  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_records_test.jsonl")
          .string();
  write_records(path, records);
  const auto back = read_records(path);
  CHECK(back == records);
  std::filesystem::remove(path);
}

TEST_CASE("record reader reports malformed lines") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "dlnlab_records_bad.jsonl")
          .string();
  {
    std::ofstream out(path);
    out << R"({"candidate": "a b", "reference": "a b", "bleu": 1.0, )"
        << R"("meteor": 1.0, "cider": 0.0, "provenance": "perturbed"})" << "\n";
    out << R"({"candidate": "a b", "reference")" << "\n";  // truncated
  }
  try {
    read_records(path);
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line_number == 2);
  }
  std::filesystem::remove(path);

  const std::string empty_path =
      (std::filesystem::temp_directory_path() / "dlnlab_records_empty.jsonl")
          .string();
  { std::ofstream out(empty_path); }
  CHECK(read_records(empty_path).empty());
  std::filesystem::remove(empty_path);
}
