#include "tssr/reward.hpp"

#include <cmath>
#include <numeric>

#include "tssr/chemcheck.hpp"
#include "tssr/error.hpp"

namespace tssr {

void TssrConfig::validate() const {
  if (k_subst < 1) throw ValidationError("k_subst must be at least 1");
  if (e_max < 1) throw ValidationError("e_max must be at least 1");
  if (lambda_swap < 0 || lambda_err < 0 || lambda_dist < 0) throw ValidationError("reward weights must be non-negative");
  const double sum = lambda_swap + lambda_err + lambda_dist;
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("reward weights must sum to 1");
}

std::string_view to_string(RepairPath p) {
  switch (p) {
    case RepairPath::ValidDirect: return "ValidDirect";
    case RepairPath::RepairedFromInvalid: return "RepairedFromInvalid";
    case RepairPath::Unrepairable: return "Unrepairable";
  }
  return "?";
}

std::vector<TokenId> sample_no_dup(const Vocabulary& v, int k, const TokenPriors& p, Rng& rng) {
  std::vector<TokenId> pool;
  std::vector<double> weight;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (v.is_special(id) || !(p[id] > 0.0)) continue;
    pool.push_back(id);
    weight.push_back(p[id]);
  }
  if (k < 0 || static_cast<std::size_t>(k) > pool.size()) {
    throw ValidationError("cannot draw " + std::to_string(k) + " distinct tokens from " + std::to_string(pool.size()) +
                          " tokens with positive prior");
  }
  std::vector<TokenId> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int draw = 0; draw < k; ++draw) {
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    const double target = rng.uniform() * total;
    std::size_t pick = 0;
    double acc = 0.0;
    for (; pick + 1 < pool.size(); ++pick) {
      acc += weight[pick];
      if (target < acc) break;
    }
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

SwapRewarder::SwapRewarder(const Vocabulary& vocab, TokenPriors priors, TssrConfig cfg)
    : vocab_(&vocab), priors_(std::move(priors)), cfg_(cfg) {
  cfg_.validate();
  if (priors_.probs.size() != vocab.size()) throw ValidationError("priors do not match the vocabulary size");
  if (static_cast<std::size_t>(cfg_.k_subst) > priors_.positive_count()) {
    throw ValidationError("k_subst exceeds the number of tokens with positive prior");
  }
  lexemes_.reserve(vocab.size());
  for (const auto& t : vocab.tokens()) lexemes_.push_back(classify_token(t.symbol));
}

ParseResult SwapRewarder::parse(std::span<const TokenId> seq) const {
  std::vector<Lexeme> lex;
  lex.reserve(seq.size());
  for (TokenId id : seq) lex.push_back(lexemes_.at(static_cast<std::size_t>(id)));
  return tssr::parse(lex);
}

std::optional<int> SwapRewarder::problem_count(std::span<const TokenId> seq) const {
  const ParseResult r = parse(seq);
  if (!parsed(r)) return std::nullopt;
  return static_cast<int>(count_problems(std::get<MolGraph>(r)));
}

namespace {

std::vector<std::size_t> shuffled_positions(std::size_t n, Rng& rng) {
  std::vector<std::size_t> pos(n);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(pos));
  return pos;
}

}  // namespace

SyntaxFix SwapRewarder::try_syntax_fix(std::span<const TokenId> seq, Rng& rng) const {
  SyntaxFix out;
  std::vector<TokenId> work(seq.begin(), seq.end());
  for (std::size_t i : shuffled_positions(work.size(), rng)) {
    const TokenId original = work[i];
    for (TokenId candidate : sample_no_dup(*vocab_, cfg_.k_subst, priors_, rng)) {
      if (candidate == original) continue;
      work[i] = candidate;
      if (parsed(parse(work))) {
        out.repaired = std::move(work);
        return out;
      }
      ++out.n_fail;
    }
    work[i] = original;
  }
  return out;
}

ChemReduction SwapRewarder::try_reduce_chem_problems(std::span<const TokenId> seq, Rng& rng) const {
  ChemReduction out;
  out.best.assign(seq.begin(), seq.end());
  const auto e0 = problem_count(seq);
  if (!e0) throw ValidationError("chemical repair needs a parseable sequence");
  out.initial_errors = out.final_errors = *e0;
  if (*e0 == 0) return out;

  int e_star = *e0;
  for (std::size_t i : shuffled_positions(out.best.size(), rng)) {
    const TokenId original = out.best[i];
    for (TokenId candidate : sample_no_dup(*vocab_, cfg_.k_subst, priors_, rng)) {
      if (candidate == original) continue;
      out.best[i] = candidate;
      const auto e = problem_count(out.best);
      if (e && *e < e_star) {
        e_star = *e;
        ++out.accepted;
        break;
      }
      out.best[i] = original;
      ++out.n_fail;
    }
    if (e_star == 0) break;
  }
  out.final_errors = e_star;
  out.f_err = static_cast<double>(*e0 - e_star) / std::max(1, *e0);
  out.f_dist = 1.0 - static_cast<double>(std::min(e_star, cfg_.e_max)) / cfg_.e_max;
  return out;
}

RewardBreakdown SwapRewarder::reward(std::span<const TokenId> seq, Rng& rng) const {
  RewardBreakdown out;
  if (seq.empty()) return out;
  for (TokenId id : seq) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_->size() || vocab_->is_special(id)) {
      throw ValidationError("sequence to score contains a special or out-of-range token");
    }
  }

  std::vector<TokenId> valid;
  if (parsed(parse(seq))) {
    out.path = RepairPath::ValidDirect;
    valid.assign(seq.begin(), seq.end());
  } else {
    SyntaxFix fix = try_syntax_fix(seq, rng);
    out.n_fail_stage1 = fix.n_fail;
    if (!fix.repaired) {
      out.f_swap = 1.0 / (1.0 + fix.n_fail);
      return out;
    }
    out.path = RepairPath::RepairedFromInvalid;
    out.n_swaps = 1;
    valid = std::move(*fix.repaired);
  }

  ChemReduction chem = try_reduce_chem_problems(valid, rng);
  out.n_fail_stage2 = chem.n_fail;
  out.n_swaps += chem.accepted;
  out.f_swap = 1.0 / (1.0 + out.n_fail_stage1 + out.n_fail_stage2);
  out.f_err = chem.f_err;
  out.f_dist = chem.f_dist;
  out.initial_errors = chem.initial_errors;
  out.final_errors = chem.final_errors;
  out.repaired_sequence = std::move(chem.best);
  const double mix = cfg_.lambda_swap * out.f_swap + cfg_.lambda_err * out.f_err + cfg_.lambda_dist * out.f_dist;
  out.reward = out.path == RepairPath::ValidDirect ? mix : -0.5 + mix;
  return out;
}

}  // namespace tssr
