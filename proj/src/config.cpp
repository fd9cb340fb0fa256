#include "tssr/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "tssr/error.hpp"

namespace tssr {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ValidationError("invalid integer for " + key + ": '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("invalid number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("invalid boolean for " + key + ": '" + v + "'");
}

std::string fmt(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TSSR_STRING(field, help_text)                                          \
  Entry{{#field, help_text},                                                   \
        [](RunConfig& c, const std::string& v) { c.field = v; },               \
        [](const RunConfig& c) { return c.field; }}
#define TSSR_INT(name, field, type, help_text)                                 \
  Entry{{name, help_text},                                                     \
        [](RunConfig& c, const std::string& v) { c.field = parse_int<type>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define TSSR_REAL(name, field, help_text)                                      \
  Entry{{name, help_text},                                                     \
        [](RunConfig& c, const std::string& v) { c.field = parse_double(name, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      TSSR_STRING(mode, "training regime: prl (from scratch) or frl (from a pretrained checkpoint)"),
      TSSR_INT("seed", seed, std::uint64_t, "master random seed"),
      TSSR_INT("threads", threads, int, "worker threads for scoring and evaluation"),
      TSSR_STRING(corpus, "training corpus, one SMILES per line"),
      TSSR_STRING(heldout, "held-out corpus for pretraining loss"),
      TSSR_STRING(vocab, "vocabulary file"),
      TSSR_STRING(priors, "token prior file"),
      TSSR_STRING(checkpoint, "model checkpoint to write (pretrain) or read (sample)"),
      TSSR_STRING(init_checkpoint, "pretrained checkpoint used to start F-RL"),
      TSSR_STRING(out_dir, "directory for logs, reports and checkpoints"),
      TSSR_STRING(samples, "samples file, one SMILES per line"),
      TSSR_STRING(input, "input SMILES file for repair and oracle-export"),
      TSSR_STRING(output, "output file for repair and oracle-export"),
      TSSR_STRING(report, "metrics report file"),
      TSSR_INT("n_samples", n_samples, int, "number of sequences to sample"),
      TSSR_INT("steps_per_epoch", ppo.steps_per_epoch, int, "environment steps per epoch"),
      TSSR_INT("steps_per_collect", ppo.steps_per_collect, int, "environment steps per collect"),
      TSSR_INT("repeat_per_collect", ppo.repeat_per_collect, int, "PPO passes over each collect"),
      TSSR_INT("batch_size", ppo.batch_size, int, "PPO minibatch size"),
      TSSR_INT("epochs", ppo.epochs, int, "training epochs"),
      TSSR_REAL("gamma", ppo.gamma, "discount factor"),
      TSSR_REAL("gae_lambda", ppo.gae_lambda, "GAE lambda"),
      TSSR_REAL("eps_clip", ppo.eps_clip, "policy ratio clip radius"),
      TSSR_REAL("ent_coef", ppo.ent_coef, "entropy bonus coefficient"),
      TSSR_REAL("vf_coef", ppo.vf_coef, "value loss coefficient"),
      TSSR_REAL("max_grad_norm", ppo.max_grad_norm, "global gradient norm clip for PPO"),
      Entry{{"lr", "PPO learning rate; empty selects 1e-4 for prl and 1e-8 for frl"},
            [](RunConfig& c, const std::string& v) {
              if (v.empty()) c.ppo.lr.reset();
              else c.ppo.lr = parse_double("lr", v);
            },
            [](const RunConfig& c) { return c.ppo.lr ? fmt(*c.ppo.lr) : std::string(); }},
      TSSR_REAL("value_clip", ppo.value_clip, "value clip radius"),
      TSSR_INT("n_env", ppo.n_env, int, "parallel environments (only 1 is supported)"),
      Entry{{"norm_adv", "normalize advantages per batch (true/false)"},
            [](RunConfig& c, const std::string& v) { c.ppo.norm_adv = parse_bool("norm_adv", v); },
            [](const RunConfig& c) { return std::string(c.ppo.norm_adv ? "true" : "false"); }},
      TSSR_INT("t_max", ppo.t_max, int, "episode length cap, BOS and EOS included"),
      Entry{{"best_by", "best checkpoint criterion: epoch_mean or episode_max"},
            [](RunConfig& c, const std::string& v) {
              if (v == "epoch_mean") c.ppo.best_by = BestBy::EpochMean;
              else if (v == "episode_max") c.ppo.best_by = BestBy::EpisodeMax;
              else throw ValidationError("invalid value for best_by: '" + v + "'");
            },
            [](const RunConfig& c) { return std::string(c.ppo.best_by == BestBy::EpochMean ? "epoch_mean" : "episode_max"); }},
      TSSR_INT("k_subst", tssr.k_subst, int, "substitution candidates per position"),
      TSSR_REAL("lambda_swap", tssr.lambda_swap, "reward weight of swap efficiency"),
      TSSR_REAL("lambda_err", tssr.lambda_err, "reward weight of error reduction"),
      TSSR_REAL("lambda_dist", tssr.lambda_dist, "reward weight of distance to validity"),
      TSSR_INT("e_max", tssr.e_max, int, "problem count at which distance saturates"),
      TSSR_REAL("pretrain_lr", pretrain.lr, "pretraining learning rate"),
      TSSR_REAL("pretrain_beta", pretrain.beta, "confidence penalty weight"),
      TSSR_REAL("pretrain_clip", pretrain.clip, "pretraining gradient norm clip"),
      TSSR_INT("pretrain_epochs", pretrain.epochs, int, "pretraining epochs"),
      TSSR_INT("pretrain_batch", pretrain.batch_size, int, "pretraining batch size"),
      TSSR_REAL("dropout", pretrain.dropout, "dropout rate during pretraining"),
      TSSR_INT("embed_dim", embed_dim, int, "embedding width; 0 selects 2 x vocabulary size"),
      TSSR_INT("hidden_dim", hidden_dim, int, "GRU hidden units per layer"),
      TSSR_INT("num_layers", num_layers, int, "GRU layers"),
      Entry{{"head_input", "output head input: top (2 x hidden) or all (hidden x (1 + layers))"},
            [](RunConfig& c, const std::string& v) {
              if (v == "top") c.head_input = HeadInput::Top;
              else if (v == "all") c.head_input = HeadInput::All;
              else throw ValidationError("invalid value for head_input: '" + v + "'");
            },
            [](const RunConfig& c) { return std::string(c.head_input == HeadInput::Top ? "top" : "all"); }},
  };
  return table;
}

#undef TSSR_STRING
#undef TSSR_INT
#undef TSSR_REAL

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  throw ValidationError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

TrainMode RunConfig::train_mode() const {
  if (mode == "prl") return TrainMode::FromScratch;
  if (mode == "frl") return TrainMode::Pretrained;
  throw ValidationError("mode must be prl or frl, got '" + mode + "'");
}

ModelDims RunConfig::dims(std::size_t vocab_size) const {
  ModelDims d;
  d.vocab_size = static_cast<int>(vocab_size);
  d.embed_dim = embed_dim > 0 ? embed_dim : 2 * d.vocab_size;
  d.hidden_dim = hidden_dim;
  d.num_layers = num_layers;
  d.head_input = head_input;
  d.validate();
  return d;
}

PretrainOptions RunConfig::pretrain_options() const {
  PretrainOptions o = pretrain;
  o.seed = seed;
  return o;
}

void RunConfig::validate() const {
  train_mode();
  if (threads < 1) throw ValidationError("threads must be at least 1");
  if (n_samples < 1) throw ValidationError("n_samples must be at least 1");
  if (embed_dim < 0) throw ValidationError("embed_dim must be non-negative");
  if (hidden_dim < 1 || num_layers < 1) throw ValidationError("hidden_dim and num_layers must be positive");
  ppo.validate();
  tssr.validate();
  if (!(pretrain.lr > 0)) throw ValidationError("pretrain_lr must be positive");
  if (pretrain.beta < 0) throw ValidationError("pretrain_beta must be non-negative");
  if (!(pretrain.clip > 0)) throw ValidationError("pretrain_clip must be positive");
  if (pretrain.epochs < 1 || pretrain.batch_size < 1) throw ValidationError("pretrain_epochs and pretrain_batch must be positive");
  if (pretrain.dropout < 0 || pretrain.dropout >= 1) throw ValidationError("dropout must lie in [0, 1)");
}

void RunConfig::set(const std::string& key, const std::string& value) { find_entry(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return find_entry(key).get(*this); }

void RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos && (hash == 0 || line[hash - 1] == ' ' || line[hash - 1] == '\t')) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    try {
      set(key, trim(body.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::string RunConfig::str() const {
  std::string out;
  for (const auto& e : entries()) out += e.key.name + " = " + e.get(*this) + "\n";
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << str();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace tssr
