#include <doctest.h>

#include <cmath>

#include "model_fixture.hpp"
#include "support.hpp"
#include "tssr/optim.hpp"
#include "tssr/pretrain.hpp"

using namespace tssr;

namespace {

PretrainBatch random_batch(int vocab, int rows, int length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<TokenId>> seqs;
  for (int r = 0; r < rows; ++r) {
    std::vector<TokenId> s(1 + rng.below(static_cast<std::uint64_t>(length - 2)));
    for (auto& t : s) t = 3 + static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab - 3)));
    seqs.push_back(std::move(s));
  }
  return make_batch(seqs, length);
}

}  // namespace

TEST_CASE("batches are BOS, content, EOS then padding") {
  const std::vector<std::vector<TokenId>> seqs{{3, 4}, {5}};
  const PretrainBatch b = make_batch(seqs, 6);
  REQUIRE(b.rows() == 2);
  REQUIRE(b.length() == 6);
  CHECK(b.tokens(0, 0) == Vocabulary::kBos);
  CHECK(b.tokens(0, 1) == 3);
  CHECK(b.tokens(0, 3) == Vocabulary::kEos);
  CHECK(b.tokens(0, 4) == Vocabulary::kPad);
  CHECK(b.tokens(1, 2) == Vocabulary::kEos);
  for (int r = 0; r < 2; ++r) {
    for (int t = 0; t < 6; ++t) CHECK((b.mask(r, t) == 1) == (b.tokens(r, t) != Vocabulary::kPad));
  }
}

TEST_CASE("corpus encoding skips sequences that do not fit") {
  const std::vector<std::string> lines{"CCO", std::string(59, 'C'), std::string(58, 'C')};
  const Vocabulary v = build_vocabulary(lines);
  const EncodedCorpus enc = encode_corpus(lines, v);
  CHECK(enc.sequences.size() == 2);
  CHECK(enc.skipped_too_long == 1);
}

TEST_CASE("confidence-penalty loss on simple logits") {
  const std::vector<std::vector<TokenId>> seqs{{3}};
  const PretrainBatch b = make_batch(seqs, 3);  // BOS 3 EOS
  const int vocab = 5;
  // Uniform logits: cross entropy log V, negative entropy -log V.
  std::vector<Matrix<double>> logits(2, Matrix<double>::Zero(vocab, 1));
  const double beta = 0.1;
  CHECK(confidence_penalty_loss<double>(logits, b, beta, nullptr) == doctest::Approx(std::log(5.0) * (1 - beta)));
  // Near one-hot on the right targets: both terms vanish.
  logits[0](3, 0) = 40;
  logits[1](Vocabulary::kEos, 0) = 40;
  const double loss = confidence_penalty_loss<double>(logits, b, beta, nullptr);
  CHECK(loss < 1e-12);
  CHECK(loss >= -1e-12);
}

TEST_CASE("confidence-penalty gradient matches finite differences") {
  const PretrainBatch b = random_batch(8, 4, 8, 3);
  Rng rng(1);
  std::vector<Matrix<double>> logits;
  for (int t = 0; t + 1 < b.length(); ++t) {
    Matrix<double> m(8, 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    logits.push_back(m);
  }
  std::vector<Matrix<double>> grad;
  confidence_penalty_loss<double>(logits, b, 0.1, &grad);
  double worst = 0;
  const double h = 1e-6;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    for (Eigen::Index i = 0; i < logits[t].size(); ++i) {
      const double saved = logits[t].data()[i];
      logits[t].data()[i] = saved + h;
      const double up = confidence_penalty_loss<double>(logits, b, 0.1, nullptr);
      logits[t].data()[i] = saved - h;
      const double down = confidence_penalty_loss<double>(logits, b, 0.1, nullptr);
      logits[t].data()[i] = saved;
      const double num = (up - down) / (2 * h);
      const double ana = grad[t].data()[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sequence loss gradient through time matches finite differences") {
  for (HeadInput head : {HeadInput::Top, HeadInput::All}) {
    const ModelDims d = test::small_dims(8, 16, 2, head);
    Actor<double> a = make_actor<double>(d);
    Rng rng(7);
    init_actor(a, rng);
    test::jitter(a, 11, 0.2);
    const PretrainBatch b = random_batch(8, 3, 7, 5);
    Actor<double> g = make_actor<double>(d);
    sequence_loss(a, b, 0.1, Dropout{}, &g);
    const auto rep = test::check_gradient(a, g, [&] { return sequence_loss<double>(a, b, 0.1, Dropout{}, nullptr); });
    INFO(rep.worst);
    CHECK(rep.max_rel < 1e-4);
  }
}

TEST_CASE("dropout gradient matches finite differences for a fixed mask stream") {
  const ModelDims d = test::small_dims(8, 8, 2);
  Actor<double> a = make_actor<double>(d);
  Rng rng(9);
  init_actor(a, rng);
  const PretrainBatch b = random_batch(8, 2, 6, 6);
  auto loss = [&](Actor<double>* grad) {
    Rng masks(99);
    return sequence_loss(a, b, 0.1, Dropout{0.3, &masks}, grad);
  };
  Actor<double> g = make_actor<double>(d);
  loss(&g);
  const auto rep = test::check_gradient(a, g, [&] { return loss(nullptr); });
  INFO(rep.worst);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("gradient clipping and Adam") {
  Matrix<double> w = Matrix<double>::Constant(1, 1, 1.0);
  Matrix<double> gw(2, 1);
  std::vector<NamedTensor<double>> grads{{"g", &gw}};
  gw << 3, 4;
  CHECK(clip_grad_norm(grads, 10.0) == doctest::Approx(5.0));
  CHECK(gw(0) == 3.0);
  gw << 12, 16;
  CHECK(clip_grad_norm(grads, 10.0) == doctest::Approx(20.0));
  CHECK(global_norm(grads) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(gw(0) == doctest::Approx(6.0));
  gw.setZero();
  clip_grad_norm(grads, 10.0);
  CHECK(gw.isZero());

  Matrix<double> g1 = Matrix<double>::Zero(1, 1);
  std::vector<NamedTensor<double>> params{{"w", &w}};
  std::vector<NamedTensor<double>> pg{{"w", &g1}};
  AdamState<double> st = make_adam_state(params);
  adam_step(params, pg, st, AdamConfig{});
  CHECK(w(0, 0) == 1.0);
  g1(0, 0) = 2.0;
  adam_step(params, pg, st, AdamConfig{0.1});
  CHECK(w(0, 0) < 1.0);
  g1(0, 0) = std::nan("");
  const double before = w(0, 0);
  CHECK_THROWS(adam_step(params, pg, st, AdamConfig{0.1}));
  CHECK(w(0, 0) == before);
}

TEST_CASE("a short pretraining run lowers held-out loss") {
  std::vector<std::string> lines(test::train_corpus().begin(), test::train_corpus().begin() + 600);
  const Vocabulary v = build_vocabulary(lines);
  const EncodedCorpus enc = encode_corpus(lines, v);
  ModelDims d = test::small_dims(static_cast<int>(v.size()), 32, 1);
  PretrainOptions opt;
  opt.batch_size = 32;
  opt.epochs = 2;
  opt.lr = 3e-3;
  opt.seed = 1;
  const std::span<const std::vector<TokenId>> train(enc.sequences.data(), 500);
  const std::span<const std::vector<TokenId>> held(enc.sequences.data() + 500, 100);
  Actor<float> untrained = make_actor<float>(d);
  Rng init(derive_seed(opt.seed, 1));
  init_actor(untrained, init);
  const PretrainResult r = pretrain(train, d, opt);
  CHECK(r.log.size() == 2 * ((500 + 31) / 32));
  CHECK(heldout_loss(r.actor, held, 0.0) < heldout_loss(untrained, held, 0.0));
  const PretrainResult again = pretrain(train, d, opt);
  CHECK(again.actor.head_w == r.actor.head_w);
}
