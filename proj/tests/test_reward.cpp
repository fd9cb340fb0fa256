#include <doctest.h>

#include <cmath>
#include <set>

#include "reward_fixture.hpp"
#include "tssr/chemcheck.hpp"
#include "tssr/error.hpp"
#include "tssr/rng.hpp"

using namespace tssr;

namespace {

double formula(const TssrConfig& c, const RewardBreakdown& b) {
  const double base = c.lambda_swap * b.f_swap + c.lambda_err * b.f_err + c.lambda_dist * b.f_dist;
  return b.path == RepairPath::RepairedFromInvalid ? base - 0.5 : base;
}

// Upper 99% point of chi-square with df degrees of freedom (Wilson-Hilferty).
double chi2_99(double df) {
  const double z = 2.326347874;
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

}  // namespace

TEST_CASE("configuration invariants") {
  TssrConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda_err = 0.6;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.k_subst = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.lambda_swap = -0.1;
  c.lambda_err = 0.8;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("sample_no_dup draws distinct positive-prior tokens") {
  const test::RewardFixture fx;
  Rng rng(1);
  const int all = fx.full_budget();
  const auto full = sample_no_dup(fx.vocab, all, fx.priors, rng);
  std::set<TokenId> seen(full.begin(), full.end());
  CHECK(seen.size() == static_cast<std::size_t>(all));
  for (TokenId t : seen) CHECK(fx.priors[t] > 0.0);
  CHECK_THROWS_AS(sample_no_dup(fx.vocab, all + 1, fx.priors, rng), ValidationError);
  CHECK_THROWS_AS(SwapRewarder(fx.vocab, fx.priors, TssrConfig{all + 1, 0.2, 0.5, 0.3, 12}), ValidationError);
}

TEST_CASE("zero-prior tokens are never drawn and first draws follow the prior") {
  // Priors over {C, O, N, Cl} with a zero on N.
  const std::vector<std::string> corpus{"CCCCO", "CCl", "CCO"};
  Vocabulary v = Vocabulary::from_symbols({"C", "Cl", "N", "O"});
  TokenPriors p = compute_priors(corpus, v);
  REQUIRE(p[*v.find("N")] == 0.0);
  Rng rng(2024);
  const int draws = 100000;
  std::vector<double> counts(v.size(), 0.0);
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_no_dup(v, 3, p, rng);
    REQUIRE(s.size() == 3);
    for (TokenId t : s) REQUIRE(t != *v.find("N"));
    counts[static_cast<std::size_t>(s[0])] += 1;
  }
  double chi2 = 0;
  int cells = 0;
  for (std::size_t t = 0; t < v.size(); ++t) {
    if (p.probs[t] == 0.0) continue;
    const double expected = draws * p.probs[t];
    chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
    ++cells;
  }
  CHECK(chi2 < chi2_99(cells - 1));
}

TEST_CASE("stage one repairs a single bad token") {
  const test::RewardFixture fx;
  const SwapRewarder r = fx.rewarder(fx.full_budget());
  Rng rng(4);
  // An unclosed ring: swapping any ring digit or the last C for "1" closes it.
  auto fix = r.try_syntax_fix(fx.ids("C1CCCC"), rng);
  REQUIRE(fix.repaired);
  CHECK(r.parse(*fix.repaired).index() == 0);
  CHECK(fix.repaired->size() == 6);

  fix = r.try_syntax_fix(fx.ids("C(C"), rng);
  REQUIRE(fix.repaired);
  CHECK(parsed(r.parse(*fix.repaired)));

  const auto opens = fx.ids("((((((");
  fix = r.try_syntax_fix(opens, rng);
  CHECK_FALSE(fix.repaired);
  // Every position tries every token except "(" itself.
  CHECK(fix.n_fail == 6 * (fx.full_budget() - 1));
}

TEST_CASE("stage two base case and formulas") {
  const test::RewardFixture fx;
  const SwapRewarder r = fx.rewarder(fx.full_budget());
  Rng rng(8);
  const auto clean = fx.ids("CCO");
  const ChemReduction base = r.try_reduce_chem_problems(clean, rng);
  CHECK(base.n_fail == 0);
  CHECK(base.f_err == 0.0);
  CHECK(base.f_dist == 1.0);
  CHECK(base.best == clean);

  const auto seq = fx.ids("C(C)(C)(C)(C)Cc");
  const ChemReduction red = r.try_reduce_chem_problems(seq, rng);
  REQUIRE(red.initial_errors == 2);
  CHECK(red.final_errors <= red.initial_errors);
  CHECK(red.f_err == static_cast<double>(red.initial_errors - red.final_errors) / 2.0);
  CHECK(red.f_dist == 1.0 - red.final_errors / 12.0);
  CHECK(*r.problem_count(red.best) == red.final_errors);
  if (red.final_errors == 1) CHECK(red.f_dist == doctest::Approx(0.916666666667));
}

TEST_CASE("reward values on the documented paths") {
  const test::RewardFixture fx;
  const SwapRewarder r = fx.rewarder();
  Rng rng(9);
  const auto pristine = r.reward(fx.ids("c1ccccc1CCO"), rng);
  CHECK(pristine.path == RepairPath::ValidDirect);
  CHECK(pristine.reward == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pristine.n_swaps == 0);

  const auto nothing = r.reward({}, rng);
  CHECK(nothing.path == RepairPath::Unrepairable);
  CHECK(nothing.reward == -1.0);

  TssrConfig narrow;
  narrow.k_subst = 1;
  const SwapRewarder tiny(fx.vocab, fx.priors, narrow);
  const auto hopeless = tiny.reward(fx.ids("(((((((("), rng);
  CHECK(hopeless.path == RepairPath::Unrepairable);
  CHECK(hopeless.reward == -1.0);
  CHECK_FALSE(hopeless.repaired_sequence);

  const std::vector<TokenId> with_eos{*fx.vocab.find("C"), Vocabulary::kEos};
  CHECK_THROWS_AS(r.reward(with_eos, rng), ValidationError);
}

TEST_CASE("reward breakdowns obey the composite formula") {
  const test::RewardFixture fx;
  const SwapRewarder r = fx.rewarder();
  const TssrConfig& c = r.config();
  Rng gen(77);
  bool saw_three_failures_full_fix = false;
  std::vector<TokenId> alphabet;
  for (const auto& t : fx.vocab.tokens()) {
    if (!fx.vocab.is_special(t.index)) alphabet.push_back(t.index);
  }
  for (int i = 0; i < 3000; ++i) {
    std::vector<TokenId> seq(1 + gen.below(20));
    for (auto& t : seq) t = alphabet[gen.below(alphabet.size())];
    Rng rng(derive_seed(5, static_cast<std::uint64_t>(i)));
    const auto b = r.reward(seq, rng);
    REQUIRE(b.reward >= -1.0);
    REQUIRE(b.reward <= 1.0);
    if (b.path == RepairPath::Unrepairable) {
      REQUIRE(b.reward == -1.0);
      continue;
    }
    REQUIRE(b.f_swap == doctest::Approx(1.0 / (1 + b.n_fail_stage1 + b.n_fail_stage2)).epsilon(1e-15));
    REQUIRE(b.reward == doctest::Approx(formula(c, b)).epsilon(1e-15));
    REQUIRE(b.final_errors <= b.initial_errors);
    REQUIRE(b.repaired_sequence);
    REQUIRE(*r.problem_count(*b.repaired_sequence) == b.final_errors);
    if (b.path == RepairPath::RepairedFromInvalid) {
      REQUIRE(b.reward > -0.5);
      REQUIRE(b.reward <= 0.5);
      if (b.n_fail_stage1 + b.n_fail_stage2 == 3 && b.final_errors == 0 && b.initial_errors > 0) {
        CHECK(b.reward == doctest::Approx(0.35));
        saw_three_failures_full_fix = true;
      }
    } else {
      REQUIRE(b.n_fail_stage1 == 0);
    }
  }
  MESSAGE("three-failure full repair observed: " << saw_three_failures_full_fix);
}

TEST_CASE("reward is a pure function of the sequence and the stream seed") {
  const test::RewardFixture fx;
  const SwapRewarder r = fx.rewarder();
  const auto seq = fx.ids("CC(C(C1ccccc1");
  Rng a(123), b(123);
  const auto x = r.reward(seq, a);
  const auto y = r.reward(seq, b);
  CHECK(x.reward == y.reward);
  CHECK(x.path == y.path);
  CHECK(x.repaired_sequence == y.repaired_sequence);
  CHECK(x.n_fail_stage1 == y.n_fail_stage1);
  CHECK(x.n_fail_stage2 == y.n_fail_stage2);
}

TEST_CASE("single-substitution completeness on a small alphabet") {
  // Exhaustive over strings of length <= 4 on {C, (, ), 1, =, O}.
  Vocabulary v = Vocabulary::from_symbols({"(", ")", "1", "=", "C", "O"});
  TokenPriors p;
  p.probs.assign(v.size(), 0.0);
  for (TokenId t = 3; t < static_cast<TokenId>(v.size()); ++t) p.probs[static_cast<std::size_t>(t)] = 1.0 / 6.0;
  TssrConfig cfg;
  cfg.k_subst = 6;
  const SwapRewarder r(v, p, cfg);
  std::size_t strings = 0;
  for (int len = 1; len <= 4; ++len) {
    std::vector<TokenId> seq(static_cast<std::size_t>(len), 3);
    while (true) {
      if (!parsed(r.parse(seq))) {
        bool oracle = false;
        for (std::size_t i = 0; i < seq.size() && !oracle; ++i) {
          for (TokenId t = 3; t < 9 && !oracle; ++t) {
            if (t == seq[i]) continue;
            auto alt = seq;
            alt[i] = t;
            oracle = parsed(r.parse(alt));
          }
        }
        Rng rng(strings);
        REQUIRE(r.try_syntax_fix(seq, rng).repaired.has_value() == oracle);
        ++strings;
      }
      std::size_t k = 0;
      while (k < seq.size() && ++seq[k] == 9) seq[k++] = 3;
      if (k == seq.size()) break;
    }
  }
  CHECK(strings > 0);
}
