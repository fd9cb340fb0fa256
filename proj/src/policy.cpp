#include "tssr/policy.hpp"

#include <cmath>

#include "tssr/error.hpp"

namespace tssr {

void ModelDims::validate() const {
  if (vocab_size < 4) throw ValidationError("vocabulary must contain at least one non-special token");
  if (embed_dim < 1 || hidden_dim < 1 || num_layers < 1) throw ValidationError("model dimensions must be positive");
}

namespace {

template <typename T>
GruLayer<T> zero_layer(int in, int hidden) {
  GruLayer<T> l;
  l.w_ih = Matrix<T>::Zero(3 * hidden, in);
  l.w_hh = Matrix<T>::Zero(3 * hidden, hidden);
  l.b_ih = Matrix<T>::Zero(3 * hidden, 1);
  l.b_hh = Matrix<T>::Zero(3 * hidden, 1);
  return l;
}

template <typename T>
Backbone<T> zero_backbone(const ModelDims& d) {
  Backbone<T> b;
  b.embedding = Matrix<T>::Zero(d.embed_dim, d.vocab_size);
  for (int l = 0; l < d.num_layers; ++l) b.layers.push_back(zero_layer<T>(l == 0 ? d.embed_dim : d.hidden_dim, d.hidden_dim));
  return b;
}

template <typename T>
void backbone_tensors(Backbone<T>& b, const std::string& prefix, std::vector<NamedTensor<T>>& out) {
  out.push_back({prefix + ".embedding", &b.embedding});
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    const std::string p = prefix + ".gru." + std::to_string(l);
    out.push_back({p + ".weight_ih", &b.layers[l].w_ih});
    out.push_back({p + ".weight_hh", &b.layers[l].w_hh});
    out.push_back({p + ".bias_ih", &b.layers[l].b_ih});
    out.push_back({p + ".bias_hh", &b.layers[l].b_hh});
  }
}

template <typename T>
void xavier_uniform(Matrix<T>& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  }
}

// Semi-orthogonal matrix from the QR factorization of a Gaussian matrix, with
// signs fixed by diag(R) so that the result is uniformly distributed.
template <typename T>
void orthogonal(Matrix<T>& m, Rng& rng) {
  const bool tall = m.rows() >= m.cols();
  const Eigen::Index rows = tall ? m.rows() : m.cols();
  const Eigen::Index cols = tall ? m.cols() : m.rows();
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  m = (tall ? q : Eigen::MatrixXd(q.transpose())).cast<T>();
}

template <typename T>
void init_backbone(Backbone<T>& b, Rng& rng) {
  for (Eigen::Index j = 0; j < b.embedding.cols(); ++j) {
    for (Eigen::Index i = 0; i < b.embedding.rows(); ++i) b.embedding(i, j) = static_cast<T>(rng.normal());
  }
  for (auto& l : b.layers) {
    xavier_uniform(l.w_ih, rng);
    orthogonal(l.w_hh, rng);
    l.b_ih.setZero();
    l.b_hh.setZero();
  }
}

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& x) {
  return (T(1) + (-x.array()).exp()).inverse().matrix();
}

template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, Dropout drop) {
  const double keep = 1.0 - drop.rate;
  Matrix<T> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = drop.rng->uniform() < keep ? static_cast<T>(1.0 / keep) : T(0);
  }
  return m;
}

template <typename T>
BackboneStep<T> backbone_forward(const Backbone<T>& b, std::span<const TokenId> tokens, const Hidden<T>& h, Dropout drop) {
  const auto batch = static_cast<Eigen::Index>(tokens.size());
  const auto vocab = b.embedding.cols();
  const Eigen::Index hd = b.layers.front().w_hh.cols();
  BackboneStep<T> s;
  s.tokens.assign(tokens.begin(), tokens.end());
  s.h_prev = h;
  Matrix<T> x(b.embedding.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const TokenId t = tokens[static_cast<std::size_t>(j)];
    if (t < 0 || t >= vocab) throw ValidationError("token index " + std::to_string(t) + " out of range");
    x.col(j) = b.embedding.col(t);
  }
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    const GruLayer<T>& g = b.layers[l];
    if (drop.active()) {
      s.drop_mask.push_back(dropout_mask<T>(x.rows(), x.cols(), drop));
      x = x.cwiseProduct(s.drop_mask.back());
    }
    Matrix<T> gi = g.w_ih * x;
    gi.colwise() += g.b_ih.col(0);
    Matrix<T> gh = g.w_hh * h[l];
    gh.colwise() += g.b_hh.col(0);
    Matrix<T> r = sigmoid<T>(gi.topRows(hd) + gh.topRows(hd));
    Matrix<T> z = sigmoid<T>(gi.middleRows(hd, hd) + gh.middleRows(hd, hd));
    Matrix<T> ghn = gh.bottomRows(hd);
    Matrix<T> n = (gi.bottomRows(hd) + r.cwiseProduct(ghn)).array().tanh().matrix();
    Matrix<T> hn = (n.array() + z.array() * (h[l].array() - n.array())).matrix();
    s.input.push_back(std::move(x));
    s.r.push_back(std::move(r));
    s.z.push_back(std::move(z));
    s.n.push_back(std::move(n));
    s.gh_n.push_back(std::move(ghn));
    x = hn;
    s.h_new.push_back(std::move(hn));
  }
  return s;
}

// dh_new is consumed (layer outputs' gradients); returns d h_prev.
template <typename T>
Hidden<T> backbone_backward(const Backbone<T>& b, const BackboneStep<T>& s, Hidden<T> dh_new, Backbone<T>& grad) {
  const std::size_t layers = b.layers.size();
  Hidden<T> dh_prev(layers);
  for (std::size_t li = layers; li-- > 0;) {
    const GruLayer<T>& g = b.layers[li];
    GruLayer<T>& gg = grad.layers[li];
    const auto& z = s.z[li].array();
    const auto& n = s.n[li].array();
    const auto& r = s.r[li].array();
    const auto dh = dh_new[li].array();
    const Eigen::Index hd = g.w_hh.cols();
    const Eigen::Index batch = s.h_new[li].cols();

    Matrix<T> dan = (dh * (T(1) - z) * (T(1) - n * n)).matrix();
    Matrix<T> dz = (dh * (s.h_prev[li].array() - n) * z * (T(1) - z)).matrix();
    Matrix<T> dr = (dan.array() * s.gh_n[li].array() * r * (T(1) - r)).matrix();
    Matrix<T> dgi(3 * hd, batch), dgh(3 * hd, batch);
    dgi << dr, dz, dan;
    dgh << dr, dz, (dan.array() * r).matrix();

    gg.w_ih.noalias() += dgi * s.input[li].transpose();
    gg.b_ih += dgi.rowwise().sum();
    gg.w_hh.noalias() += dgh * s.h_prev[li].transpose();
    gg.b_hh += dgh.rowwise().sum();
    dh_prev[li] = g.w_hh.transpose() * dgh;
    dh_prev[li].array() += dh * z;

    Matrix<T> dx = g.w_ih.transpose() * dgi;
    if (!s.drop_mask.empty()) dx = dx.cwiseProduct(s.drop_mask[li]);
    if (li > 0) {
      dh_new[li - 1] += dx;
    } else {
      for (Eigen::Index j = 0; j < batch; ++j) grad.embedding.col(s.tokens[static_cast<std::size_t>(j)]) += dx.col(j);
    }
  }
  return dh_prev;
}

void check_tokens(std::span<const TokenId> tokens, int vocab) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab) throw ValidationError("token index " + std::to_string(t) + " out of range");
  }
}

}  // namespace

template <typename T>
std::vector<NamedTensor<T>> tensors(Actor<T>& a, const std::string& prefix) {
  std::vector<NamedTensor<T>> out;
  backbone_tensors(a.gru, prefix, out);
  out.push_back({prefix + ".head.weight", &a.head_w});
  out.push_back({prefix + ".head.bias", &a.head_b});
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> tensors(Critic<T>& c, const std::string& prefix) {
  std::vector<NamedTensor<T>> out;
  backbone_tensors(c.gru, prefix, out);
  out.push_back({prefix + ".value.0.weight", &c.value_w1});
  out.push_back({prefix + ".value.0.bias", &c.value_b1});
  out.push_back({prefix + ".value.1.weight", &c.value_w2});
  out.push_back({prefix + ".value.1.bias", &c.value_b2});
  return out;
}

template <typename T>
Actor<T> make_actor(const ModelDims& d) {
  d.validate();
  Actor<T> a;
  a.dims = d;
  a.gru = zero_backbone<T>(d);
  a.head_w = Matrix<T>::Zero(d.vocab_size, d.head_width());
  a.head_b = Matrix<T>::Zero(d.vocab_size, 1);
  return a;
}

template <typename T>
Critic<T> make_critic(const ModelDims& d) {
  d.validate();
  Critic<T> c;
  c.dims = d;
  c.gru = zero_backbone<T>(d);
  c.value_w1 = Matrix<T>::Zero(d.hidden_dim, d.hidden_dim);
  c.value_b1 = Matrix<T>::Zero(d.hidden_dim, 1);
  c.value_w2 = Matrix<T>::Zero(1, d.hidden_dim);
  c.value_b2 = Matrix<T>::Zero(1, 1);
  return c;
}

template <typename T>
void init_actor(Actor<T>& a, Rng& rng) {
  init_backbone(a.gru, rng);
  xavier_uniform(a.head_w, rng);
  a.head_b.setZero();
}

template <typename T>
void init_critic(Critic<T>& c, Rng& rng) {
  init_backbone(c.gru, rng);
  xavier_uniform(c.value_w1, rng);
  xavier_uniform(c.value_w2, rng);
  c.value_b1.setZero();
  c.value_b2.setZero();
}

template <typename T>
std::size_t parameter_count(const Actor<T>& a) {
  std::size_t n = 0;
  for (const auto& t : tensors(const_cast<Actor<T>&>(a))) n += static_cast<std::size_t>(t.value->size());
  return n;
}

template <typename T, typename U>
Actor<U> cast_actor(const Actor<T>& a) {
  Actor<U> out = make_actor<U>(a.dims);
  auto src = tensors(const_cast<Actor<T>&>(a));
  auto dst = tensors(out);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<U>();
  return out;
}

template <typename T, typename U>
Critic<U> cast_critic(const Critic<T>& c) {
  Critic<U> out = make_critic<U>(c.dims);
  auto src = tensors(const_cast<Critic<T>&>(c));
  auto dst = tensors(out);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<U>();
  return out;
}

template <typename T>
Hidden<T> zero_hidden(const ModelDims& d, int batch) {
  return Hidden<T>(static_cast<std::size_t>(d.num_layers), Matrix<T>::Zero(d.hidden_dim, batch));
}

template <typename T>
ActorStep<T> actor_step(const Actor<T>& a, std::span<const TokenId> tokens, const Hidden<T>& h, Dropout drop) {
  ActorStep<T> s;
  s.backbone = backbone_forward(a.gru, tokens, h, drop);
  const auto& hn = s.backbone.h_new;
  const Eigen::Index hd = a.dims.hidden_dim;
  const auto batch = static_cast<Eigen::Index>(tokens.size());
  s.head_in.resize(a.dims.head_width(), batch);
  s.head_in.topRows(hd) = hn.back();
  if (a.dims.head_input == HeadInput::Top) {
    s.head_in.bottomRows(hd) = hn.back();
  } else {
    for (std::size_t l = 0; l < hn.size(); ++l) s.head_in.middleRows(hd * static_cast<Eigen::Index>(l + 1), hd) = hn[l];
  }
  s.logits = a.head_w * s.head_in;
  s.logits.colwise() += a.head_b.col(0);
  return s;
}

template <typename T>
Hidden<T> actor_step_backward(const Actor<T>& a, const ActorStep<T>& step, const Matrix<T>& dlogits,
                              const Hidden<T>& dh_next, Actor<T>& grad) {
  const Eigen::Index hd = a.dims.hidden_dim;
  grad.head_w.noalias() += dlogits * step.head_in.transpose();
  grad.head_b += dlogits.rowwise().sum();
  const Matrix<T> dhead = a.head_w.transpose() * dlogits;
  const std::size_t layers = a.gru.layers.size();
  Hidden<T> dh = dh_next.empty() ? zero_hidden<T>(a.dims, static_cast<int>(dlogits.cols())) : dh_next;
  dh[layers - 1] += dhead.topRows(hd);
  if (a.dims.head_input == HeadInput::Top) {
    dh[layers - 1] += dhead.bottomRows(hd);
  } else {
    for (std::size_t l = 0; l < layers; ++l) dh[l] += dhead.middleRows(hd * static_cast<Eigen::Index>(l + 1), hd);
  }
  return backbone_backward(a.gru, step.backbone, std::move(dh), grad.gru);
}

template <typename T>
CriticStep<T> critic_step(const Critic<T>& c, std::span<const TokenId> tokens, const Hidden<T>& h) {
  CriticStep<T> s;
  s.backbone = backbone_forward(c.gru, tokens, h, Dropout{});
  Matrix<T> pre = c.value_w1 * s.backbone.h_new.back();
  pre.colwise() += c.value_b1.col(0);
  s.act = pre.array().tanh().matrix();
  s.values = c.value_w2 * s.act;
  s.values.array() += c.value_b2(0, 0);
  return s;
}

template <typename T>
void critic_step_backward(const Critic<T>& c, const CriticStep<T>& step, const Matrix<T>& dvalues, Critic<T>& grad) {
  grad.value_w2.noalias() += dvalues * step.act.transpose();
  grad.value_b2(0, 0) += dvalues.sum();
  Matrix<T> dpre = (c.value_w2.transpose() * dvalues).cwiseProduct((T(1) - step.act.array().square()).matrix());
  grad.value_w1.noalias() += dpre * step.backbone.h_new.back().transpose();
  grad.value_b1 += dpre.rowwise().sum();
  Hidden<T> dh = zero_hidden<T>(c.dims, static_cast<int>(dvalues.cols()));
  dh.back() = c.value_w1.transpose() * dpre;
  backbone_backward(c.gru, step.backbone, std::move(dh), grad.gru);
}

template <typename T>
Matrix<T> log_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const T m = logits.col(j).maxCoeff();
    const T lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

TokenId draw_categorical(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (target < acc) return static_cast<TokenId>(i);
  }
  // Rounding left target past the last nonzero bucket.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<TokenId>(i);
  }
  return 0;
}

namespace {

// Log-probabilities in double for one column of logits.
template <typename T>
std::vector<double> column_log_probs(const Matrix<T>& logits, Eigen::Index j) {
  const Eigen::VectorXd col = logits.col(j).template cast<double>();
  const double m = col.maxCoeff();
  const double lse = m + std::log((col.array() - m).exp().sum());
  std::vector<double> out(static_cast<std::size_t>(col.size()));
  for (Eigen::Index i = 0; i < col.size(); ++i) out[static_cast<std::size_t>(i)] = col(i) - lse;
  return out;
}

double entropy_of(const std::vector<double>& logp) {
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  return std::max(0.0, h);
}

template <typename T>
Hidden<T> select_columns(const Hidden<T>& h, const std::vector<Eigen::Index>& keep) {
  Hidden<T> out;
  for (const auto& m : h) {
    Matrix<T> sel(m.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) sel.col(static_cast<Eigen::Index>(j)) = m.col(keep[j]);
    out.push_back(std::move(sel));
  }
  return out;
}

}  // namespace

template <typename T>
std::vector<SampledSequence> sample_batch(const Actor<T>& a, std::span<Rng> rngs, int t_max) {
  if (t_max < 2) throw ValidationError("t_max must be at least 2");
  const std::size_t batch = rngs.size();
  std::vector<SampledSequence> out(batch);
  std::vector<std::size_t> active(batch);
  std::vector<TokenId> last(batch, Vocabulary::kBos);
  for (std::size_t i = 0; i < batch; ++i) {
    active[i] = i;
    out[i].tokens.push_back(Vocabulary::kBos);
  }
  Hidden<T> h = zero_hidden<T>(a.dims, static_cast<int>(batch));
  std::vector<double> probs(static_cast<std::size_t>(a.dims.vocab_size));
  while (!active.empty()) {
    const ActorStep<T> step = actor_step(a, last, h);
    std::vector<Eigen::Index> keep;
    std::vector<std::size_t> still;
    std::vector<TokenId> next;
    for (std::size_t j = 0; j < active.size(); ++j) {
      SampledSequence& seq = out[active[j]];
      const auto logp = column_log_probs(step.logits, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(logp[i]);
      const TokenId tok = draw_categorical(probs, rngs[active[j]]);
      seq.tokens.push_back(tok);
      seq.log_probs.push_back(logp[static_cast<std::size_t>(tok)]);
      seq.entropies.push_back(entropy_of(logp));
      if (tok != Vocabulary::kEos && static_cast<int>(seq.tokens.size()) < t_max) {
        keep.push_back(static_cast<Eigen::Index>(j));
        still.push_back(active[j]);
        next.push_back(tok);
      }
    }
    if (keep.size() != active.size()) {
      h = select_columns(step.backbone.h_new, keep);
    } else {
      h = step.backbone.h_new;
    }
    active = std::move(still);
    last = std::move(next);
  }
  return out;
}

template <typename T>
SampledSequence sample_sequence(const Actor<T>& a, Rng& rng, int t_max) {
  return std::move(sample_batch(a, std::span<Rng>(&rng, 1), t_max).front());
}

template <typename T>
StepScores logprob_entropy(const Actor<T>& a, std::span<const TokenId> tokens) {
  if (tokens.empty() || tokens.front() != Vocabulary::kBos) throw ValidationError("sequence must start with BOS");
  check_tokens(tokens, a.dims.vocab_size);
  StepScores out;
  Hidden<T> h = zero_hidden<T>(a.dims, 1);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    ActorStep<T> step = actor_step(a, tokens.subspan(t, 1), h);
    const auto logp = column_log_probs(step.logits, 0);
    out.log_probs.push_back(logp[static_cast<std::size_t>(tokens[t + 1])]);
    out.entropies.push_back(entropy_of(logp));
    h = std::move(step.backbone.h_new);
  }
  return out;
}

template <typename T>
double value(const Critic<T>& c, std::span<const TokenId> prefix) {
  if (prefix.empty() || prefix.front() != Vocabulary::kBos) throw ValidationError("prefix must start with BOS");
  check_tokens(prefix, c.dims.vocab_size);
  Hidden<T> h = zero_hidden<T>(c.dims, 1);
  double v = 0.0;
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    CriticStep<T> step = critic_step(c, prefix.subspan(t, 1), h);
    v = static_cast<double>(step.values(0, 0));
    h = std::move(step.backbone.h_new);
  }
  return v;
}

#define TSSR_INSTANTIATE(T)                                                                                        \
  template std::vector<NamedTensor<T>> tensors(Actor<T>&, const std::string&);                                     \
  template std::vector<NamedTensor<T>> tensors(Critic<T>&, const std::string&);                                    \
  template Actor<T> make_actor<T>(const ModelDims&);                                                               \
  template Critic<T> make_critic<T>(const ModelDims&);                                                             \
  template void init_actor(Actor<T>&, Rng&);                                                                       \
  template void init_critic(Critic<T>&, Rng&);                                                                     \
  template std::size_t parameter_count(const Actor<T>&);                                                           \
  template Hidden<T> zero_hidden<T>(const ModelDims&, int);                                                        \
  template ActorStep<T> actor_step(const Actor<T>&, std::span<const TokenId>, const Hidden<T>&, Dropout);          \
  template Hidden<T> actor_step_backward(const Actor<T>&, const ActorStep<T>&, const Matrix<T>&, const Hidden<T>&, \
                                         Actor<T>&);                                                               \
  template CriticStep<T> critic_step(const Critic<T>&, std::span<const TokenId>, const Hidden<T>&);                \
  template void critic_step_backward(const Critic<T>&, const CriticStep<T>&, const Matrix<T>&, Critic<T>&);        \
  template Matrix<T> log_softmax(const Matrix<T>&);                                                                \
  template SampledSequence sample_sequence(const Actor<T>&, Rng&, int);                                            \
  template std::vector<SampledSequence> sample_batch(const Actor<T>&, std::span<Rng>, int);                        \
  template StepScores logprob_entropy(const Actor<T>&, std::span<const TokenId>);                                  \
  template double value(const Critic<T>&, std::span<const TokenId>);

TSSR_INSTANTIATE(float)
TSSR_INSTANTIATE(double)
#undef TSSR_INSTANTIATE

template Actor<double> cast_actor<float, double>(const Actor<float>&);
template Actor<float> cast_actor<double, float>(const Actor<double>&);
template Critic<double> cast_critic<float, double>(const Critic<float>&);
template Critic<float> cast_critic<double, float>(const Critic<double>&);

}  // namespace tssr
