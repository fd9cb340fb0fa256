#include "tssr/pretrain.hpp"

#include <cmath>
#include <numeric>

#include "tssr/error.hpp"

namespace tssr {

EncodedCorpus encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab, int length) {
  EncodedCorpus out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<TokenId> ids;
    try {
      ids = vocab.tokenize(lines[i]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (static_cast<int>(ids.size()) > length - 2) {
      ++out.skipped_too_long;
      continue;
    }
    out.sequences.push_back(std::move(ids));
  }
  return out;
}

PretrainBatch make_batch(std::span<const std::vector<TokenId>> sequences, int length) {
  PretrainBatch b;
  const auto rows = static_cast<Eigen::Index>(sequences.size());
  b.tokens.setConstant(rows, length, Vocabulary::kPad);
  b.mask.setZero(rows, length);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& s = sequences[static_cast<std::size_t>(r)];
    if (static_cast<int>(s.size()) > length - 2) throw ValidationError("sequence does not fit the padded length");
    b.tokens(r, 0) = Vocabulary::kBos;
    for (std::size_t t = 0; t < s.size(); ++t) b.tokens(r, static_cast<Eigen::Index>(t + 1)) = s[t];
    b.tokens(r, static_cast<Eigen::Index>(s.size() + 1)) = Vocabulary::kEos;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(s.size() + 2); ++t) b.mask(r, t) = 1;
  }
  return b;
}

template <typename T>
double confidence_penalty_loss(const std::vector<Matrix<T>>& logits, const PretrainBatch& batch, double beta,
                               std::vector<Matrix<T>>* dlogits) {
  // Column t of the batch holds the targets for logits[t - 1].
  double mask_sum = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) mask_sum += batch.mask.col(static_cast<Eigen::Index>(t + 1)).template cast<double>().sum();
  if (mask_sum <= 0.0) throw ValidationError("loss over an all-padding batch is undefined");
  if (dlogits) dlogits->assign(logits.size(), Matrix<T>());
  double total = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const Matrix<T> logp = log_softmax(logits[t]);
    const Matrix<T> p = logp.array().exp().matrix();
    if (dlogits) (*dlogits)[t] = Matrix<T>::Zero(logits[t].rows(), logits[t].cols());
    for (Eigen::Index b = 0; b < logits[t].cols(); ++b) {
      const auto col = static_cast<Eigen::Index>(t + 1);
      if (!batch.mask(b, col)) continue;
      const TokenId y = batch.tokens(b, col);
      const double neg_entropy = (p.col(b).array() * logp.col(b).array()).template cast<double>().sum();
      total += -static_cast<double>(logp(y, b)) + beta * neg_entropy;
      if (dlogits) {
        auto d = (*dlogits)[t].col(b);
        d = (p.col(b).array() * (T(1) + static_cast<T>(beta) * (logp.col(b).array() - static_cast<T>(neg_entropy)))).matrix();
        d(y) -= T(1);
        d *= static_cast<T>(1.0 / mask_sum);
      }
    }
  }
  const double loss = total / mask_sum;
  if (!std::isfinite(loss)) throw NumericError("non-finite pretraining loss");
  return loss;
}

template <typename T>
double sequence_loss(const Actor<T>& actor, const PretrainBatch& batch, double beta, Dropout drop, Actor<T>* grad) {
  // Only run as far as the longest row needs.
  int steps = 0;
  for (int r = 0; r < batch.rows(); ++r) {
    int len = 0;
    while (len < batch.length() && batch.mask(r, len)) ++len;
    steps = std::max(steps, len - 1);
  }
  if (steps <= 0) throw ValidationError("loss over an all-padding batch is undefined");
  std::vector<ActorStep<T>> cache;
  std::vector<Matrix<T>> logits;
  Hidden<T> h = zero_hidden<T>(actor.dims, batch.rows());
  std::vector<TokenId> inputs(static_cast<std::size_t>(batch.rows()));
  for (int t = 0; t < steps; ++t) {
    for (int r = 0; r < batch.rows(); ++r) inputs[static_cast<std::size_t>(r)] = batch.tokens(r, t);
    ActorStep<T> s = actor_step(actor, inputs, h, drop);
    h = s.backbone.h_new;
    logits.push_back(s.logits);
    if (grad) cache.push_back(std::move(s));
  }
  std::vector<Matrix<T>> dlogits;
  const double loss = confidence_penalty_loss(logits, batch, beta, grad ? &dlogits : nullptr);
  if (grad) {
    Hidden<T> dh;
    for (int t = steps; t-- > 0;) {
      dh = actor_step_backward(actor, cache[static_cast<std::size_t>(t)], dlogits[static_cast<std::size_t>(t)], dh, *grad);
    }
  }
  return loss;
}

PretrainResult pretrain(std::span<const std::vector<TokenId>> sequences, const ModelDims& dims,
                        const PretrainOptions& opt, const std::function<void(std::uint64_t, double)>& on_step) {
  if (sequences.empty()) throw ValidationError("pretraining corpus is empty");
  if (opt.batch_size < 1 || opt.epochs < 1) throw ValidationError("pretraining batch size and epochs must be positive");
  if (opt.beta < 0) throw ValidationError("pretrain_beta must be non-negative");
  if (!(opt.clip > 0)) throw ValidationError("pretrain_clip must be positive");
  Rng init_rng(derive_seed(opt.seed, 1));
  Rng order_rng(derive_seed(opt.seed, 2));
  Rng drop_rng(derive_seed(opt.seed, 3));

  PretrainResult out{make_actor<float>(dims), {}, {}};
  init_actor(out.actor, init_rng);
  Actor<float> grad = make_actor<float>(dims);
  const auto params = tensors(out.actor);
  const auto grads = tensors(grad);
  out.adam = make_adam_state(params);
  const AdamConfig adam{opt.lr, 0.9, 0.999, 1e-8};

  std::vector<std::size_t> order(sequences.size());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      std::vector<std::vector<TokenId>> rows;
      for (std::size_t i = start; i < end; ++i) rows.push_back(sequences[order[i]]);
      const PretrainBatch batch = make_batch(rows);
      zero_grads(grads);
      const double loss = sequence_loss(out.actor, batch, opt.beta, Dropout{opt.dropout, &drop_rng}, &grad);
      clip_grad_norm(grads, opt.clip);
      adam_step(params, grads, out.adam, adam);
      ++step;
      out.log.emplace_back(step, loss);
      if (on_step) on_step(step, loss);
    }
  }
  return out;
}

double heldout_loss(const Actor<float>& actor, std::span<const std::vector<TokenId>> sequences, double beta, int batch_size) {
  if (sequences.empty()) throw ValidationError("held-out corpus is empty");
  double weighted = 0.0;
  double tokens = 0.0;
  for (std::size_t start = 0; start < sequences.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(sequences.size(), start + static_cast<std::size_t>(batch_size));
    const PretrainBatch batch = make_batch(sequences.subspan(start, end - start));
    const double n = batch.mask.rightCols(batch.length() - 1).cast<double>().sum();
    weighted += n * sequence_loss(actor, batch, beta, Dropout{}, static_cast<Actor<float>*>(nullptr));
    tokens += n;
  }
  return weighted / tokens;
}

template double confidence_penalty_loss(const std::vector<Matrix<float>>&, const PretrainBatch&, double, std::vector<Matrix<float>>*);
template double confidence_penalty_loss(const std::vector<Matrix<double>>&, const PretrainBatch&, double, std::vector<Matrix<double>>*);
template double sequence_loss(const Actor<float>&, const PretrainBatch&, double, Dropout, Actor<float>*);
template double sequence_loss(const Actor<double>&, const PretrainBatch&, double, Dropout, Actor<double>*);

}  // namespace tssr
