// Command-line front end. Every subcommand takes --config FILE plus one flag
// per configuration key; flags override values read from the file.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tssr/tssr.h"

namespace {

using RunFn = tssr_status (*)(const tssr_config*);

struct Command {
  CLI::App* app;
  RunFn run;
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_key_options(Command& cmd) {
  cmd.app->add_option("--config", cmd.config_file, "configuration file (key = value lines)");
  for (size_t i = 0; i < tssr_config_key_count(); ++i) {
    const std::string name = tssr_config_key_name(i);
    const std::string flags = name == "n_samples" ? "--n_samples,--n" : "--" + name;
    cmd.options[name] = cmd.app->add_option(flags, cmd.values[name], tssr_config_key_help(i));
  }
}

int exit_code(tssr_status s) {
  if (s == TSSR_OK) return 0;
  return s == TSSR_ERR_VALIDATION ? 1 : 2;
}

int fail(tssr_status s) {
  std::fprintf(stderr, "error: %s\n", tssr_last_error());
  return exit_code(s);
}

int execute(Command& cmd) {
  tssr_config* cfg = nullptr;
  tssr_status s = tssr_config_create(&cfg);
  if (s != TSSR_OK) return fail(s);
  if (!cmd.config_file.empty()) s = tssr_config_load(cfg, cmd.config_file.c_str());
  for (const auto& [key, value] : cmd.values) {
    if (s != TSSR_OK) break;
    if (cmd.options.at(key)->count() > 0) s = tssr_config_set(cfg, key.c_str(), value.c_str());
  }
  if (s == TSSR_OK) s = cmd.run(cfg);
  tssr_config_destroy(cfg);
  return s == TSSR_OK ? 0 : fail(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Molecule generation with swap-repair rewards"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tssr_version());

  std::vector<Command> commands;
  commands.reserve(7);
  CLI::App* vocab = app.add_subcommand("vocab", "vocabulary tools");
  vocab->require_subcommand(1);
  commands.push_back({vocab->add_subcommand("build", "build vocabulary and token priors from a corpus"),
                      tssr_run_vocab_build, {}, {}});
  commands.push_back({app.add_subcommand("pretrain", "maximum-likelihood pretraining"), tssr_run_pretrain, {}, {}});
  commands.push_back({app.add_subcommand("train", "PPO training with swap-repair rewards"), tssr_run_train, {}, {}});
  commands.push_back({app.add_subcommand("sample", "sample SMILES from a checkpoint"), tssr_run_sample, {}, {}});
  commands.push_back({app.add_subcommand("repair", "score and repair SMILES from a file"), tssr_run_repair, {}, {}});
  commands.push_back({app.add_subcommand("eval", "generation metrics for a sample file"), tssr_run_eval, {}, {}});
  commands.push_back({app.add_subcommand("oracle-export", "per-molecule parse and problem counts as TSV"),
                      tssr_run_oracle_export, {}, {}});
  for (auto& cmd : commands) add_key_options(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto& cmd : commands) {
    if (cmd.app->parsed()) return execute(cmd);
  }
  return 1;
}
