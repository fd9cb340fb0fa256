#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tssr/error.hpp"

using namespace tssr;

namespace {

std::vector<std::string> symbols_of(const Vocabulary& v, const std::vector<TokenId>& ids) {
  std::vector<std::string> out;
  for (TokenId id : ids) out.push_back(v.symbol(id));
  return out;
}

}  // namespace

TEST_CASE("lexer keeps two-letter halogens and bracket atoms whole") {
  CHECK(lex_smiles("Clc1ccccc1") == std::vector<std::string>{"Cl", "c", "1", "c", "c", "c", "c", "c", "1"});
  CHECK(lex_smiles("").empty());
  CHECK(lex_smiles("C#N") == std::vector<std::string>{"C", "#", "N"});
  CHECK(lex_smiles("[nH]1cc[N+](=O)[O-]") ==
        std::vector<std::string>{"[nH]", "1", "c", "c", "[N+]", "(", "=", "O", ")", "[O-]"});
  CHECK(lex_smiles("BrCCl") == std::vector<std::string>{"Br", "C", "Cl"});
  CHECK_THROWS_AS(lex_smiles("C[NH"), TokenizeError);
}

TEST_CASE("vocabulary places specials first and the rest in lexicographic order") {
  const std::vector<std::string> corpus{"CC", "CO"};
  const Vocabulary v = build_vocabulary(corpus);
  REQUIRE(v.size() == 5);
  CHECK(v.symbol(0) == "[BOS]");
  CHECK(v.symbol(1) == "[EOS]");
  CHECK(v.symbol(2) == "[PAD]");
  CHECK(v.symbol(3) == "C");
  CHECK(v.symbol(4) == "O");
  CHECK(build_vocabulary(corpus) == v);
}

TEST_CASE("greedy tokenization never emits a bare l") {
  const std::vector<std::string> corpus{"Clc1ccccc1"};
  const Vocabulary v = build_vocabulary(corpus);
  CHECK(v.find("Cl"));
  CHECK_FALSE(v.find("l"));
  const auto ids = v.tokenize("Clc1ccccc1");
  CHECK(ids.size() == 9);
  CHECK(symbols_of(v, ids) == lex_smiles("Clc1ccccc1"));
  CHECK(v.detokenize(ids) == "Clc1ccccc1");
  CHECK(v.tokenize("").empty());
  CHECK_THROWS_AS(v.tokenize("CN"), TokenizeError);
}

TEST_CASE("priors are exact token frequencies") {
  const std::vector<std::string> corpus{"CC", "CO"};
  const Vocabulary v = build_vocabulary(corpus);
  const TokenPriors p = compute_priors(corpus, v);
  CHECK(p[*v.find("C")] == 0.75);
  CHECK(p[*v.find("O")] == 0.25);
  for (TokenId s = 0; s <= Vocabulary::kPad; ++s) CHECK(p[s] == 0.0);
  CHECK(p.positive_count() == 2);
}

TEST_CASE("vocabulary and priors survive a save/load round trip") {
  const auto dir = test::scratch("vocab_io");
  std::vector<std::string> corpus(test::train_corpus().begin(), test::train_corpus().begin() + 500);
  const Vocabulary v = build_vocabulary(corpus);
  const TokenPriors p = compute_priors(corpus, v);
  v.save(dir / "vocab.txt");
  p.save(dir / "priors.tsv", v);
  const Vocabulary v2 = Vocabulary::load(dir / "vocab.txt");
  CHECK(v2 == v);
  CHECK(v2.hash() == v.hash());
  const TokenPriors p2 = TokenPriors::load(dir / "priors.tsv", v2);
  REQUIRE(p2.probs.size() == p.probs.size());
  double sum = 0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    CHECK(p2.probs[i] == p.probs[i]);
    sum += p2.probs[i];
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("every corpus line round-trips through tokenize/detokenize") {
  const auto& corpus = test::train_corpus();
  const Vocabulary v = build_vocabulary(corpus);
  for (const auto& line : corpus) {
    const auto ids = v.tokenize(line);
    REQUIRE(v.detokenize(ids) == line);
    for (TokenId id : ids) REQUIRE_FALSE(v.is_special(id));
  }
}

TEST_CASE("empty corpus is rejected") {
  const std::vector<std::string> corpus;
  CHECK_THROWS_AS(build_vocabulary(corpus), ValidationError);
}
