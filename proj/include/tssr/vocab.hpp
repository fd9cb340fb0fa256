#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tssr/error.hpp"

namespace tssr {

using TokenId = std::int32_t;

struct Token {
  std::string symbol;
  TokenId index = 0;
};

class TokenizeError : public ValidationError {
 public:
  TokenizeError(std::size_t position, const std::string& what)
      : ValidationError(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Splits a SMILES string without reference to any vocabulary: bracket
// expressions and the two-letter elements Cl/Br are single tokens, every other
// character is its own token. Throws TokenizeError on an unterminated bracket.
std::vector<std::string> lex_smiles(std::string_view smiles);

// Ordered token set. Specials occupy indices 0..2, the remaining symbols follow
// in lexicographic order.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kPad = 2;
  static constexpr std::string_view kBosSymbol = "[BOS]";
  static constexpr std::string_view kEosSymbol = "[EOS]";
  static constexpr std::string_view kPadSymbol = "[PAD]";

  Vocabulary() = default;

  // Builds a vocabulary from non-special symbols (duplicates are ignored).
  static Vocabulary from_symbols(std::vector<std::string> symbols);

  TokenId bos() const { return kBos; }
  TokenId eos() const { return kEos; }
  TokenId pad() const { return kPad; }
  bool is_special(TokenId id) const { return id >= 0 && id <= kPad; }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<Token>& tokens() const { return tokens_; }
  const std::string& symbol(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)).symbol; }
  std::optional<TokenId> find(std::string_view symbol) const;

  // Greedy longest match, left to right. Never emits specials.
  std::vector<TokenId> tokenize(std::string_view smiles) const;
  std::string detokenize(std::span<const TokenId> ids) const;

  // FNV-1a over the symbols in index order; stamped into checkpoints.
  std::uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void index_symbols();

  std::vector<Token> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
  std::size_t max_plain_length_ = 1;
};

inline bool operator==(const Token& a, const Token& b) { return a.symbol == b.symbol && a.index == b.index; }

// Reads one SMILES per line, dropping a trailing CR and skipping empty lines.
std::vector<std::string> read_corpus(const std::filesystem::path& path);

// Union of all tokens in the corpus plus the specials. Throws ValidationError
// on an empty corpus and TokenizeError (message names the line) otherwise.
Vocabulary build_vocabulary(std::span<const std::string> corpus);

// Empirical token frequencies over non-special tokens.
struct TokenPriors {
  std::vector<double> probs;  // indexed by TokenId

  double operator[](TokenId id) const { return probs.at(static_cast<std::size_t>(id)); }
  std::size_t positive_count() const;

  void save(const std::filesystem::path& path, const Vocabulary& vocab) const;
  static TokenPriors load(const std::filesystem::path& path, const Vocabulary& vocab);
};

TokenPriors compute_priors(std::span<const std::string> corpus, const Vocabulary& vocab);

}  // namespace tssr
