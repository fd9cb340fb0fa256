#include "tssr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "tssr/error.hpp"

namespace tssr {

void PpoConfig::validate() const {
  auto positive = [](bool ok, const char* key) {
    if (!ok) throw ValidationError(std::string(key) + " must be positive");
  };
  positive(steps_per_epoch > 0, "steps_per_epoch");
  positive(steps_per_collect > 0, "steps_per_collect");
  positive(repeat_per_collect > 0, "repeat_per_collect");
  positive(batch_size > 0, "batch_size");
  positive(epochs > 0, "epochs");
  positive(max_grad_norm > 0, "max_grad_norm");
  positive(value_clip > 0, "value_clip");
  positive(vf_coef >= 0, "vf_coef");
  positive(ent_coef >= 0, "ent_coef");
  if (lr) positive(*lr > 0, "lr");
  if (!(gamma > 0 && gamma <= 1)) throw ValidationError("gamma must lie in (0, 1]");
  if (!(gae_lambda > 0 && gae_lambda <= 1)) throw ValidationError("gae_lambda must lie in (0, 1]");
  if (!(eps_clip > 0 && eps_clip < 1)) throw ValidationError("eps_clip must lie in (0, 1)");
  if (n_env != 1) throw ValidationError("only n_env = 1 is supported");
  if (t_max < 2) throw ValidationError("t_max must be at least 2");
}

std::vector<TokenId> content_tokens(std::span<const TokenId> seq) {
  std::vector<TokenId> out;
  for (TokenId t : seq) {
    if (t > Vocabulary::kPad) out.push_back(t);
  }
  return out;
}

Environment::Environment(const SwapRewarder& rewarder, int t_max, std::uint64_t reward_seed)
    : rewarder_(&rewarder), t_max_(t_max), reward_seed_(reward_seed) {
  if (t_max < 2) throw ValidationError("t_max must be at least 2");
}

TokenId Environment::reset() {
  prefix_.assign(1, Vocabulary::kBos);
  done_ = false;
  ++episodes_;
  return Vocabulary::kBos;
}

Environment::Step Environment::step(TokenId action) {
  if (done_) throw ValidationError("step called on a finished episode");
  if (action < 0 || static_cast<std::size_t>(action) >= rewarder_->vocab().size()) {
    throw ValidationError("action out of range");
  }
  prefix_.push_back(action);
  Step out{action, 0.0, false, std::nullopt};
  if (action == Vocabulary::kEos || static_cast<int>(prefix_.size()) >= t_max_) {
    done_ = true;
    out.done = true;
    Rng rng(derive_seed(reward_seed_, episodes_ - 1));
    out.breakdown = rewarder_->reward(content_tokens(prefix_), rng);
    out.reward = out.breakdown->reward;
  }
  return out;
}

Gae compute_gae(std::span<const double> rewards, std::span<const double> values, std::span<const bool> dones,
                double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ValidationError("GAE inputs differ in length");
  Gae out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const bool last = dones[t] || t + 1 == n;
    const double next_value = last ? 0.0 : values[t + 1];
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + (last ? 0.0 : gamma * lambda * running);
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

template <typename T>
PpoLoss ppo_loss(const Actor<T>& actor, const Critic<T>& critic, const PpoBatch<T>& batch, const PpoConfig& cfg,
                 Actor<T>* actor_grad, Critic<T>* critic_grad) {
  const std::size_t n = batch.size();
  if (n == 0) throw ValidationError("empty PPO batch");
  const ActorStep<T> as = actor_step(actor, batch.observations, batch.actor_hidden);
  const CriticStep<T> cs = critic_step(critic, batch.observations, batch.critic_hidden);
  const Matrix<T> logp = log_softmax(as.logits);
  const auto vocab = as.logits.rows();
  Matrix<T> dlogits = Matrix<T>::Zero(vocab, static_cast<Eigen::Index>(n));
  Matrix<T> dvalues = Matrix<T>::Zero(1, static_cast<Eigen::Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  PpoLoss out;
  for (std::size_t j = 0; j < n; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const TokenId a = batch.actions[j];
    const double adv = batch.advantages[j];
    const double ratio = std::exp(static_cast<double>(logp(a, col)) - batch.logp_old[j]);
    if (!std::isfinite(ratio)) throw NumericError("non-finite probability ratio at transition " + std::to_string(j));
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip);
    const double surr1 = ratio * adv;
    const double surr2 = clipped_ratio * adv;
    const bool unclipped = surr1 <= surr2;
    out.clip_term += std::min(surr1, surr2) * inv_n;
    if (std::abs(ratio - 1.0) > cfg.eps_clip) out.clip_fraction += inv_n;

    const auto lp = logp.col(col).template cast<double>().array();
    const Eigen::ArrayXd p = lp.exp();
    const double entropy = -(p * lp).sum();
    out.entropy_term += entropy * inv_n;

    const double v = static_cast<double>(cs.values(0, col));
    const double v_old = batch.value_old[j];
    const double g = batch.returns[j];
    const double v_clip = v_old + std::clamp(v - v_old, -cfg.value_clip, cfg.value_clip);
    const double e1 = (v - g) * (v - g);
    const double e2 = (v_clip - g) * (v_clip - g);
    out.value_term += std::max(e1, e2) * inv_n;

    if (actor_grad) {
      Eigen::ArrayXd d = cfg.ent_coef * p * (lp + entropy);
      if (unclipped) {
        const double s = -adv * ratio;
        d -= s * p;
        d(a) += s;
      }
      dlogits.col(col) = (d * inv_n).cast<T>().matrix();
    }
    if (critic_grad) {
      double dv = 0.0;
      if (e1 >= e2) {
        dv = 2.0 * (v - g);
      } else if (std::abs(v - v_old) < cfg.value_clip) {
        dv = 2.0 * (v_clip - g);
      }
      dvalues(0, col) = static_cast<T>(cfg.vf_coef * dv * inv_n);
    }
  }
  out.total = -out.clip_term + cfg.vf_coef * out.value_term - cfg.ent_coef * out.entropy_term;
  if (!std::isfinite(out.total)) throw NumericError("non-finite PPO loss");
  if (actor_grad) actor_step_backward(actor, as, dlogits, Hidden<T>{}, *actor_grad);
  if (critic_grad) critic_step_backward(critic, cs, dvalues, *critic_grad);
  return out;
}

template PpoLoss ppo_loss(const Actor<float>&, const Critic<float>&, const PpoBatch<float>&, const PpoConfig&,
                          Actor<float>*, Critic<float>*);
template PpoLoss ppo_loss(const Actor<double>&, const Critic<double>&, const PpoBatch<double>&, const PpoConfig&,
                          Actor<double>*, Critic<double>*);

namespace {

std::vector<NamedTensor<float>> joint_tensors(Actor<float>& a, Critic<float>& c) {
  auto out = tensors(a);
  auto more = tensors(c);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

struct Transition {
  TokenId observation;
  TokenId action;
  double logp_old;
  double value_old;
  double reward;
  bool done;
  Hidden<float> actor_hidden;
  Hidden<float> critic_hidden;
};

Hidden<float> gather(const std::vector<Transition>& buf, std::span<const std::size_t> idx, bool actor) {
  const Hidden<float>& first = actor ? buf[idx[0]].actor_hidden : buf[idx[0]].critic_hidden;
  Hidden<float> out;
  for (std::size_t l = 0; l < first.size(); ++l) {
    Matrix<float> m(first[l].rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const Hidden<float>& h = actor ? buf[idx[j]].actor_hidden : buf[idx[j]].critic_hidden;
      m.col(static_cast<Eigen::Index>(j)) = h[l];
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

ModelState initial_state(const TrainOptions& opt, const Checkpoint* init, std::uint64_t vocab_hash) {
  ModelState s{make_actor<float>(opt.dims), make_critic<float>(opt.dims), {}, 0, 0};
  Rng actor_rng(derive_seed(opt.seed, 1));
  Rng critic_rng(derive_seed(opt.seed, 4));
  init_critic(s.critic, critic_rng);
  if (opt.mode == TrainMode::FromScratch) {
    if (init) throw ValidationError("P-RL trains from random weights and takes no init checkpoint");
    init_actor(s.actor, actor_rng);
  } else {
    if (!init) throw ValidationError("F-RL needs an init checkpoint");
    if (init->dims.vocab_size != opt.dims.vocab_size || init->vocab_hash != vocab_hash) {
      throw ValidationError("init checkpoint was built for a different vocabulary (|V| = " +
                            std::to_string(init->dims.vocab_size) + ", expected " +
                            std::to_string(opt.dims.vocab_size) + ")");
    }
    if (!(init->dims == opt.dims)) throw ValidationError("init checkpoint model dimensions differ from the configuration");
    restore_tensors(init->tensors, tensors(s.actor));
    if (init->has_prefix("critic.")) {
      restore_tensors(init->tensors, tensors(s.critic));
    } else {
      std::vector<NamedTensor<float>> backbone;
      for (const auto& t : tensors(s.critic, "actor")) {
        if (t.name.find(".value.") == std::string::npos) backbone.push_back(t);
      }
      restore_tensors(init->tensors, backbone);
    }
  }
  s.adam = make_adam_state(joint_tensors(s.actor, s.critic));
  return s;
}

Checkpoint to_checkpoint(const ModelState& s, std::uint64_t vocab_hash, std::uint64_t seed) {
  ModelState& m = const_cast<ModelState&>(s);
  Checkpoint c;
  c.vocab_hash = vocab_hash;
  c.dims = s.actor.dims;
  c.parameter_count = parameter_count(s.actor);
  store_tensors(c.tensors, tensors(m.actor));
  store_tensors(c.tensors, tensors(m.critic));
  const auto names = joint_tensors(m.actor, m.critic);
  if (s.adam.m.size() == names.size()) {
    std::vector<NamedTensor<float>> mv, vv;
    for (std::size_t i = 0; i < names.size(); ++i) {
      mv.push_back({"adam.m." + names[i].name, &m.adam.m[i]});
      vv.push_back({"adam.v." + names[i].name, &m.adam.v[i]});
    }
    store_tensors(c.optimizer, mv);
    store_tensors(c.optimizer, vv);
  }
  c.counters = {{"adam.step", s.adam.step}, {"episodes", s.episodes}, {"epoch", static_cast<std::uint64_t>(s.epoch)}};
  c.rng_seed = seed;
  return c;
}

TrainResult train(const SwapRewarder& rewarder, const TrainOptions& opt, const Checkpoint* init,
                  const TrainCallbacks& callbacks) {
  opt.ppo.validate();
  const PpoConfig& cfg = opt.ppo;
  if (opt.dims.vocab_size != static_cast<int>(rewarder.vocab().size())) {
    throw ValidationError("model vocabulary size differs from the reward vocabulary");
  }
  TrainResult result;
  ModelState state = initial_state(opt, init, rewarder.vocab().hash());
  result.initial = state;
  const auto params = joint_tensors(state.actor, state.critic);
  Actor<float> actor_grad = make_actor<float>(opt.dims);
  Critic<float> critic_grad = make_critic<float>(opt.dims);
  const auto grads = joint_tensors(actor_grad, critic_grad);
  const AdamConfig adam{cfg.learning_rate(opt.mode), 0.9, 0.999, 1e-8};

  Rng policy_rng(derive_seed(opt.seed, 5));
  Rng batch_rng(derive_seed(opt.seed, 6));
  Environment env(rewarder, cfg.t_max, derive_seed(opt.seed, 7));

  std::vector<Transition> buffer;
  Hidden<float> h_actor, h_critic;
  TokenId observation = 0;
  bool in_episode = false;
  bool have_best = false;
  bool have_peak = false;
  std::vector<double> probs(static_cast<std::size_t>(opt.dims.vocab_size));

  auto update = [&] {
    std::size_t complete = 0;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      if (buffer[i].done) complete = i + 1;
    }
    if (complete == 0) return;
    std::vector<double> rewards, values;
    const auto dones = std::make_unique<bool[]>(complete);
    for (std::size_t i = 0; i < complete; ++i) {
      rewards.push_back(buffer[i].reward);
      values.push_back(buffer[i].value_old);
      dones[i] = buffer[i].done;
    }
    Gae gae = compute_gae(rewards, values, std::span<const bool>(dones.get(), complete), cfg.gamma, cfg.gae_lambda);
    if (cfg.norm_adv && complete > 1) {
      const double mean = std::accumulate(gae.advantages.begin(), gae.advantages.end(), 0.0) / static_cast<double>(complete);
      double var = 0.0;
      for (double a : gae.advantages) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(complete));
      for (double& a : gae.advantages) a = (a - mean) / (sd + 1e-8);
    }
    std::vector<std::size_t> order(complete);
    for (int rep = 0; rep < cfg.repeat_per_collect; ++rep) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      batch_rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t start = 0; start < complete; start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(complete, start + static_cast<std::size_t>(cfg.batch_size));
        std::span<const std::size_t> idx(order.data() + start, end - start);
        PpoBatch<float> batch;
        for (std::size_t i : idx) {
          batch.observations.push_back(buffer[i].observation);
          batch.actions.push_back(buffer[i].action);
          batch.logp_old.push_back(buffer[i].logp_old);
          batch.value_old.push_back(buffer[i].value_old);
          batch.advantages.push_back(gae.advantages[i]);
          batch.returns.push_back(gae.returns[i]);
        }
        batch.actor_hidden = gather(buffer, idx, true);
        batch.critic_hidden = gather(buffer, idx, false);
        zero_grads(grads);
        ppo_loss(state.actor, state.critic, batch, cfg, &actor_grad, &critic_grad);
        clip_grad_norm(grads, cfg.max_grad_norm);
        adam_step(params, grads, state.adam, adam);
      }
    }
    buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(complete));
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_sum = 0.0;
    std::size_t epoch_episodes = 0;
    int epoch_steps = 0;
    while (epoch_steps < cfg.steps_per_epoch) {
      const int collect = std::min(cfg.steps_per_collect, cfg.steps_per_epoch - epoch_steps);
      for (int s = 0; s < collect; ++s) {
        if (!in_episode) {
          observation = env.reset();
          h_actor = zero_hidden<float>(opt.dims, 1);
          h_critic = zero_hidden<float>(opt.dims, 1);
          in_episode = true;
        }
        const std::span<const TokenId> obs(&observation, 1);
        ActorStep<float> as = actor_step(state.actor, obs, h_actor);
        CriticStep<float> cs = critic_step(state.critic, obs, h_critic);
        const Eigen::VectorXd col = as.logits.col(0).cast<double>();
        const double m = col.maxCoeff();
        const double lse = m + std::log((col.array() - m).exp().sum());
        for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(col(static_cast<Eigen::Index>(i)) - lse);
        const TokenId action = draw_categorical(probs, policy_rng);
        Environment::Step st = env.step(action);
        buffer.push_back({observation, action, col(action) - lse, static_cast<double>(cs.values(0, 0)), st.reward, st.done,
                          std::move(h_actor), std::move(h_critic)});
        h_actor = std::move(as.backbone.h_new);
        h_critic = std::move(cs.backbone.h_new);
        observation = st.observation;
        if (st.done) {
          in_episode = false;
          ++state.episodes;
          EpisodeRecord rec;
          rec.episode = state.episodes;
          rec.length = static_cast<int>(env.prefix().size()) - 1;
          rec.terminal_reward = st.reward;
          rec.discounted_return = std::pow(cfg.gamma, rec.length - 1) * st.reward;
          rec.path = st.breakdown->path;
          if (!have_peak || rec.discounted_return > result.peak_return) result.peak_return = rec.discounted_return;
          have_peak = true;
          epoch_sum += rec.discounted_return;
          ++epoch_episodes;
          if (cfg.best_by == BestBy::EpisodeMax && (!have_best || rec.discounted_return > result.best_score)) {
            have_best = true;
            result.best_score = rec.discounted_return;
            result.best_epoch = epoch;
            state.epoch = epoch;
            result.best = state;
          }
          result.episodes.push_back(rec);
          if (callbacks.on_episode) callbacks.on_episode(rec);
        }
      }
      epoch_steps += collect;
      update();
    }
    state.epoch = epoch;
    const double mean = epoch_episodes ? epoch_sum / static_cast<double>(epoch_episodes) : 0.0;
    result.epoch_mean_returns.push_back(mean);
    if (cfg.best_by == BestBy::EpochMean && epoch_episodes > 0 && (!have_best || mean > result.best_score)) {
      have_best = true;
      result.best_score = mean;
      result.best_epoch = epoch;
      result.best = state;
    }
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, mean, epoch_episodes);
  }
  if (!have_best) result.best = state;
  result.final = std::move(state);
  return result;
}

}  // namespace tssr
