#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tssr/policy.hpp"
#include "tssr/pretrain.hpp"
#include "tssr/reward.hpp"
#include "tssr/trainer.hpp"

namespace tssr {

// Flat run configuration shared by every subcommand. Text form is one
// "key = value" per line; '#' starts a comment.
struct RunConfig {
  std::string mode = "prl";
  std::uint64_t seed = 0;
  int threads = 1;

  std::string corpus, heldout, vocab, priors, checkpoint, init_checkpoint, out_dir = ".", samples, input, output, report;
  int n_samples = 10000;

  PpoConfig ppo;
  TssrConfig tssr;
  PretrainOptions pretrain;  // seed is taken from `seed`

  int embed_dim = 0;  // 0 means 2 * |V|
  int hidden_dim = 512;
  int num_layers = 3;
  HeadInput head_input = HeadInput::Top;

  TrainMode train_mode() const;
  ModelDims dims(std::size_t vocab_size) const;
  PretrainOptions pretrain_options() const;

  // Checks every key against its module's invariants.
  void validate() const;

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  void load(const std::filesystem::path& path);  // merges into *this
  void save(const std::filesystem::path& path) const;
  std::string str() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every accepted key, in the order used for dumps.
const std::vector<ConfigKey>& config_keys();

}  // namespace tssr
