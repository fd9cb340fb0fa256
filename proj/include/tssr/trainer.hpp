#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tssr/checkpoint.hpp"
#include "tssr/optim.hpp"
#include "tssr/policy.hpp"
#include "tssr/reward.hpp"

namespace tssr {

enum class TrainMode { Pretrained, FromScratch };  // F-RL, P-RL
enum class BestBy { EpochMean, EpisodeMax };

struct PpoConfig {
  int steps_per_epoch = 512;
  int steps_per_collect = 60;
  int repeat_per_collect = 1;
  int batch_size = 512;
  int epochs = 1000;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double eps_clip = 0.2;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  std::optional<double> lr;  // regime default when unset
  double value_clip = 0.2;
  int n_env = 1;
  bool norm_adv = false;
  int t_max = 60;
  BestBy best_by = BestBy::EpochMean;

  void validate() const;
  double learning_rate(TrainMode mode) const { return lr.value_or(mode == TrainMode::FromScratch ? 1e-4 : 1e-8); }
};

// Token-level MDP: observation is the last token, reward only at termination.
class Environment {
 public:
  struct Step {
    TokenId observation;
    double reward;
    bool done;
    std::optional<RewardBreakdown> breakdown;  // set when done
  };

  // Episode i scores its terminal string with Rng(derive_seed(reward_seed, i)).
  Environment(const SwapRewarder& rewarder, int t_max, std::uint64_t reward_seed);

  TokenId reset();
  Step step(TokenId action);

  const std::vector<TokenId>& prefix() const { return prefix_; }
  bool done() const { return done_; }
  std::uint64_t episodes_started() const { return episodes_; }

 private:
  const SwapRewarder* rewarder_;
  int t_max_;
  std::uint64_t reward_seed_;
  std::uint64_t episodes_ = 0;
  std::vector<TokenId> prefix_;
  bool done_ = true;
};

// Strips every special token (EOS included) before scoring.
std::vector<TokenId> content_tokens(std::span<const TokenId> seq);

struct Gae {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation. V of the successor of a done transition
// (and of the last transition) is taken as 0.
Gae compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                double gamma, double lambda);

template <typename T>
struct PpoBatch {
  std::vector<TokenId> observations;
  std::vector<TokenId> actions;
  Hidden<T> actor_hidden;   // snapshots before each step, one column per transition
  Hidden<T> critic_hidden;
  std::vector<double> logp_old;
  std::vector<double> value_old;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
};

struct PpoLoss {
  double total = 0.0;
  double clip_term = 0.0;     // mean clipped surrogate (maximized)
  double value_term = 0.0;    // mean clipped squared error
  double entropy_term = 0.0;  // mean entropy
  double clip_fraction = 0.0;
};

// Clipped surrogate + c_v * clipped value loss - c_s * entropy, each averaged
// over the batch. With grads set, accumulates exact gradients (hidden
// snapshots are constants).
template <typename T>
PpoLoss ppo_loss(const Actor<T>& actor, const Critic<T>& critic, const PpoBatch<T>& batch, const PpoConfig& cfg,
                 Actor<T>* actor_grad, Critic<T>* critic_grad);

struct EpisodeRecord {
  std::uint64_t episode = 0;
  int length = 0;  // actions taken, EOS included
  double terminal_reward = 0.0;
  double discounted_return = 0.0;
  RepairPath path = RepairPath::Unrepairable;
};

struct ModelState {
  Actor<float> actor;
  Critic<float> critic;
  AdamState<float> adam;
  std::uint64_t episodes = 0;
  int epoch = 0;
};

struct TrainOptions {
  TrainMode mode = TrainMode::FromScratch;
  PpoConfig ppo;
  ModelDims dims;
  std::uint64_t seed = 0;
};

struct TrainCallbacks {
  std::function<void(const EpisodeRecord&)> on_episode;
  std::function<void(int epoch, double mean_return, std::size_t episodes)> on_epoch;
};

struct TrainResult {
  ModelState initial;
  ModelState best;
  ModelState final;
  double best_score = 0.0;
  int best_epoch = 0;  // 0 when no episode ever finished
  double peak_return = 0.0;
  std::vector<double> epoch_mean_returns;
  std::vector<EpisodeRecord> episodes;
};

// Builds the starting actor/critic. F-RL requires a checkpoint holding
// actor tensors; a critic without stored weights copies the actor backbone
// and gets a fresh value head. P-RL forbids a checkpoint.
ModelState initial_state(const TrainOptions& opt, const Checkpoint* init, std::uint64_t vocab_hash);

TrainResult train(const SwapRewarder& rewarder, const TrainOptions& opt, const Checkpoint* init,
                  const TrainCallbacks& callbacks = {});

Checkpoint to_checkpoint(const ModelState& s, std::uint64_t vocab_hash, std::uint64_t seed);

}  // namespace tssr
