#pragma once

#include "support.hpp"
#include "tssr/reward.hpp"

namespace test {

// Vocabulary and priors built from the first 2000 training lines.
struct RewardFixture {
  std::vector<std::string> corpus;
  tssr::Vocabulary vocab;
  tssr::TokenPriors priors;

  RewardFixture() : corpus(train_corpus().begin(), train_corpus().begin() + 2000) {
    vocab = tssr::build_vocabulary(corpus);
    priors = tssr::compute_priors(corpus, vocab);
  }

  tssr::SwapRewarder rewarder(int k_subst = 8) const {
    tssr::TssrConfig cfg;
    cfg.k_subst = k_subst;
    return tssr::SwapRewarder(vocab, priors, cfg);
  }

  int full_budget() const { return static_cast<int>(priors.positive_count()); }

  std::vector<tssr::TokenId> ids(const std::string& smiles) const { return vocab.tokenize(smiles); }
};

}  // namespace test
