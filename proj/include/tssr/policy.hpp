#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "tssr/rng.hpp"
#include "tssr/vocab.hpp"

namespace tssr {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// What the output head sees: the top layer output concatenated with either the
// top hidden state (2*d_h) or every layer's hidden state ((1+L)*d_h).
enum class HeadInput { Top, All };

struct ModelDims {
  int vocab_size = 0;
  int embed_dim = 0;
  int hidden_dim = 512;
  int num_layers = 3;
  HeadInput head_input = HeadInput::Top;

  int head_width() const { return head_input == HeadInput::Top ? 2 * hidden_dim : (1 + num_layers) * hidden_dim; }
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// One GRU layer with PyTorch gate layout: rows [reset; update; candidate].
template <typename T>
struct GruLayer {
  Matrix<T> w_ih;  // 3H x in
  Matrix<T> w_hh;  // 3H x H
  Matrix<T> b_ih;  // 3H x 1
  Matrix<T> b_hh;  // 3H x 1
};

template <typename T>
struct Backbone {
  Matrix<T> embedding;  // embed_dim x vocab, column per token
  std::vector<GruLayer<T>> layers;
};

template <typename T>
struct Actor {
  ModelDims dims;
  Backbone<T> gru;
  Matrix<T> head_w;  // vocab x head_width
  Matrix<T> head_b;  // vocab x 1
};

template <typename T>
struct Critic {
  ModelDims dims;
  Backbone<T> gru;
  Matrix<T> value_w1;  // H x H
  Matrix<T> value_b1;  // H x 1
  Matrix<T> value_w2;  // 1 x H
  Matrix<T> value_b2;  // 1 x 1
};

template <typename T>
struct NamedTensor {
  std::string name;
  Matrix<T>* value;
};

template <typename T>
std::vector<NamedTensor<T>> tensors(Actor<T>& a, const std::string& prefix = "actor");
template <typename T>
std::vector<NamedTensor<T>> tensors(Critic<T>& c, const std::string& prefix = "critic");

// Zero-initialized parameters of the given shape (also used as gradient sets).
template <typename T>
Actor<T> make_actor(const ModelDims& dims);
template <typename T>
Critic<T> make_critic(const ModelDims& dims);

// Xavier-uniform input and head weights, orthogonal recurrent weights,
// N(0,1) embeddings, zero biases.
template <typename T>
void init_actor(Actor<T>& a, Rng& rng);
template <typename T>
void init_critic(Critic<T>& c, Rng& rng);

template <typename T>
std::size_t parameter_count(const Actor<T>& a);

template <typename T, typename U>
Actor<U> cast_actor(const Actor<T>& a);
template <typename T, typename U>
Critic<U> cast_critic(const Critic<T>& c);

// Per-layer hidden states for a batch: hidden[l] is H x B.
template <typename T>
using Hidden = std::vector<Matrix<T>>;

template <typename T>
Hidden<T> zero_hidden(const ModelDims& dims, int batch);

struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rate > 0.0 && rng != nullptr; }
};

// Everything the backward pass of one batched step needs.
template <typename T>
struct BackboneStep {
  std::vector<TokenId> tokens;
  std::vector<Matrix<T>> input;      // per layer, after dropout (in x B)
  std::vector<Matrix<T>> drop_mask;  // per layer, empty when dropout is off
  Hidden<T> h_prev;
  Hidden<T> h_new;
  std::vector<Matrix<T>> r, z, n, gh_n;
};

template <typename T>
struct ActorStep {
  BackboneStep<T> backbone;
  Matrix<T> head_in;  // head_width x B
  Matrix<T> logits;   // vocab x B
};

template <typename T>
struct CriticStep {
  BackboneStep<T> backbone;
  Matrix<T> act;     // H x B, tanh layer
  Matrix<T> values;  // 1 x B
};

template <typename T>
ActorStep<T> actor_step(const Actor<T>& a, std::span<const TokenId> tokens, const Hidden<T>& h, Dropout drop = {});

// Accumulates parameter gradients for d(loss)/d(logits) and returns the
// gradient with respect to the step's incoming hidden state. dh_next (may be
// empty) carries the gradient flowing into h_new from later time steps.
template <typename T>
Hidden<T> actor_step_backward(const Actor<T>& a, const ActorStep<T>& step, const Matrix<T>& dlogits,
                              const Hidden<T>& dh_next, Actor<T>& grad);

template <typename T>
CriticStep<T> critic_step(const Critic<T>& c, std::span<const TokenId> tokens, const Hidden<T>& h);

template <typename T>
void critic_step_backward(const Critic<T>& c, const CriticStep<T>& step, const Matrix<T>& dvalues, Critic<T>& grad);

// Column-wise log-softmax of logits (vocab x B).
template <typename T>
Matrix<T> log_softmax(const Matrix<T>& logits);

struct SampledSequence {
  std::vector<TokenId> tokens;  // starts with BOS; ends with EOS when emitted
  std::vector<double> log_probs;
  std::vector<double> entropies;
};

// Multinomial draw from a probability vector with one uniform.
TokenId draw_categorical(std::span<const double> probs, Rng& rng);

template <typename T>
SampledSequence sample_sequence(const Actor<T>& a, Rng& rng, int t_max = 60);

// Batched generation; sequence i draws from rngs[i] only, so the result does
// not depend on how sequences are grouped.
template <typename T>
std::vector<SampledSequence> sample_batch(const Actor<T>& a, std::span<Rng> rngs, int t_max = 60);

struct StepScores {
  std::vector<double> log_probs;
  std::vector<double> entropies;
};

// Teacher-forced scoring of a sequence that starts with BOS.
template <typename T>
StepScores logprob_entropy(const Actor<T>& a, std::span<const TokenId> tokens);

// Critic estimate after consuming a prefix that starts with BOS.
template <typename T>
double value(const Critic<T>& c, std::span<const TokenId> prefix);

}  // namespace tssr
