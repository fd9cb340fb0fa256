#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tssr/molparse.hpp"
#include "tssr/rng.hpp"
#include "tssr/vocab.hpp"

namespace tssr {

struct TssrConfig {
  int k_subst = 8;
  double lambda_swap = 0.20;
  double lambda_err = 0.50;
  double lambda_dist = 0.30;
  int e_max = 12;

  // Throws ValidationError on negative weights, weights not summing to 1,
  // k_subst < 1 or e_max < 1.
  void validate() const;
};

enum class RepairPath : std::uint8_t { ValidDirect, RepairedFromInvalid, Unrepairable };

std::string_view to_string(RepairPath p);

struct RewardBreakdown {
  double f_swap = 0.0;
  double f_err = 0.0;
  double f_dist = 0.0;
  int n_fail_stage1 = 0;
  int n_fail_stage2 = 0;
  int n_swaps = 0;  // accepted substitutions over both stages
  RepairPath path = RepairPath::Unrepairable;
  double reward = -1.0;
  std::optional<std::vector<TokenId>> repaired_sequence;
  int initial_errors = 0;
  int final_errors = 0;
};

struct SyntaxFix {
  std::optional<std::vector<TokenId>> repaired;
  int n_fail = 0;
};

struct ChemReduction {
  int n_fail = 0;
  double f_err = 0.0;
  double f_dist = 1.0;
  std::vector<TokenId> best;
  int initial_errors = 0;
  int final_errors = 0;
  int accepted = 0;
};

// k distinct non-special tokens drawn one at a time proportional to prior,
// each removed from the pool once drawn.
std::vector<TokenId> sample_no_dup(const Vocabulary& v, int k, const TokenPriors& p, Rng& rng);

// Scores token sequences (specials already stripped). Holds pre-classified
// lexemes for the vocabulary so repeated parses skip text handling.
class SwapRewarder {
 public:
  SwapRewarder(const Vocabulary& vocab, TokenPriors priors, TssrConfig cfg);

  const TssrConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }

  ParseResult parse(std::span<const TokenId> seq) const;
  // Problem count of a parsed sequence, or nullopt when it does not parse.
  std::optional<int> problem_count(std::span<const TokenId> seq) const;

  SyntaxFix try_syntax_fix(std::span<const TokenId> seq, Rng& rng) const;
  ChemReduction try_reduce_chem_problems(std::span<const TokenId> seq, Rng& rng) const;
  RewardBreakdown reward(std::span<const TokenId> seq, Rng& rng) const;

 private:
  const Vocabulary* vocab_;
  TokenPriors priors_;
  TssrConfig cfg_;
  std::vector<Lexeme> lexemes_;
};

}  // namespace tssr
