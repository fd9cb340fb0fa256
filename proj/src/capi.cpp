#include "tssr/tssr.h"

#include <cstring>
#include <iostream>
#include <memory>
#include <string>

#include "tssr/chemcheck.hpp"
#include "tssr/config.hpp"
#include "tssr/error.hpp"
#include "tssr/runner.hpp"

struct tssr_config {
  tssr::RunConfig cfg;
};

struct tssr_vocab {
  tssr::Vocabulary vocab;
};

struct tssr_rewarder {
  std::unique_ptr<tssr::Vocabulary> vocab;
  std::unique_ptr<tssr::SwapRewarder> rewarder;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
tssr_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return TSSR_OK;
  } catch (const tssr::ValidationError& e) {
    last_error = e.what();
    return TSSR_ERR_VALIDATION;
  } catch (const tssr::IoError& e) {
    last_error = e.what();
    return TSSR_ERR_IO;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return TSSR_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TSSR_ERR_RUNTIME;
  } catch (...) {
    last_error = "unknown error";
    return TSSR_ERR_RUNTIME;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw tssr::ValidationError(std::string(what) + " must not be null");
}

void copy_out(const std::string& s, char* buf, size_t buf_len, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && buf_len > s.size()) std::memcpy(buf, s.c_str(), s.size() + 1);
}

}  // namespace

extern "C" {

const char* tssr_last_error(void) { return last_error.c_str(); }

const char* tssr_version(void) { return "1.0.0"; }

tssr_status tssr_config_create(tssr_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new tssr_config{};
  });
}

void tssr_config_destroy(tssr_config* cfg) { delete cfg; }

tssr_status tssr_config_load(tssr_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.load(path);
  });
}

tssr_status tssr_config_set(tssr_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

tssr_status tssr_config_get(const tssr_config* cfg, const char* key, char* buf, size_t buf_len, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    copy_out(cfg->cfg.get(key), buf, buf_len, needed);
  });
}

tssr_status tssr_config_validate(const tssr_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.validate();
  });
}

tssr_status tssr_config_save(const tssr_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.save(path);
  });
}

size_t tssr_config_key_count(void) { return tssr::config_keys().size(); }

const char* tssr_config_key_name(size_t index) {
  const auto& keys = tssr::config_keys();
  return index < keys.size() ? keys[index].name.c_str() : nullptr;
}

const char* tssr_config_key_help(size_t index) {
  const auto& keys = tssr::config_keys();
  return index < keys.size() ? keys[index].help.c_str() : nullptr;
}

#define TSSR_RUN(fn, impl)                      \
  tssr_status fn(const tssr_config* cfg) {      \
    return guarded([&] {                        \
      require(cfg, "cfg");                      \
      tssr::impl(cfg->cfg, std::cerr);          \
    });                                         \
  }

TSSR_RUN(tssr_run_vocab_build, run_vocab_build)
TSSR_RUN(tssr_run_pretrain, run_pretrain)
TSSR_RUN(tssr_run_train, run_train)
TSSR_RUN(tssr_run_sample, run_sample)
TSSR_RUN(tssr_run_repair, run_repair)
TSSR_RUN(tssr_run_eval, run_eval)
TSSR_RUN(tssr_run_oracle_export, run_oracle_export)
#undef TSSR_RUN

tssr_status tssr_vocab_load(const char* path, tssr_vocab** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new tssr_vocab{tssr::Vocabulary::load(path)};
  });
}

tssr_status tssr_vocab_build(const char* corpus_path, tssr_vocab** out) {
  return guarded([&] {
    require(corpus_path, "corpus_path");
    require(out, "out");
    const auto corpus = tssr::read_corpus(corpus_path);
    *out = new tssr_vocab{tssr::build_vocabulary(corpus)};
  });
}

tssr_status tssr_vocab_save(const tssr_vocab* vocab, const char* path) {
  return guarded([&] {
    require(vocab, "vocab");
    require(path, "path");
    vocab->vocab.save(path);
  });
}

void tssr_vocab_destroy(tssr_vocab* vocab) { delete vocab; }

size_t tssr_vocab_size(const tssr_vocab* vocab) { return vocab ? vocab->vocab.size() : 0; }

uint64_t tssr_vocab_hash(const tssr_vocab* vocab) { return vocab ? vocab->vocab.hash() : 0; }

tssr_status tssr_check_smiles(const char* smiles, int* parse_ok, int* chem_problems) {
  return guarded([&] {
    require(smiles, "smiles");
    const tssr::ParseResult r = tssr::parse_smiles(smiles);
    const bool ok = tssr::parsed(r);
    if (parse_ok) *parse_ok = ok ? 1 : 0;
    if (chem_problems) *chem_problems = ok ? static_cast<int>(tssr::count_problems(std::get<tssr::MolGraph>(r))) : -1;
  });
}

tssr_status tssr_canonicalize(const char* smiles, char* buf, size_t buf_len, size_t* needed) {
  return guarded([&] {
    require(smiles, "smiles");
    const tssr::ParseResult r = tssr::parse_smiles(smiles);
    if (!tssr::parsed(r)) throw tssr::ValidationError("SMILES does not parse");
    copy_out(tssr::canonicalize(std::get<tssr::MolGraph>(r)), buf, buf_len, needed);
  });
}

tssr_status tssr_rewarder_create(const tssr_vocab* vocab, const char* priors_path, const tssr_config* cfg,
                                 tssr_rewarder** out) {
  return guarded([&] {
    require(vocab, "vocab");
    require(priors_path, "priors_path");
    require(cfg, "cfg");
    require(out, "out");
    auto r = std::make_unique<tssr_rewarder>();
    r->vocab = std::make_unique<tssr::Vocabulary>(vocab->vocab);
    tssr::TokenPriors priors = tssr::TokenPriors::load(priors_path, *r->vocab);
    r->rewarder = std::make_unique<tssr::SwapRewarder>(*r->vocab, std::move(priors), cfg->cfg.tssr);
    *out = r.release();
  });
}

void tssr_rewarder_destroy(tssr_rewarder* rewarder) { delete rewarder; }

tssr_status tssr_reward_smiles(const tssr_rewarder* rewarder, const char* smiles, uint64_t seed,
                               tssr_reward_result* out, char* repaired, size_t repaired_len) {
  return guarded([&] {
    require(rewarder, "rewarder");
    require(smiles, "smiles");
    require(out, "out");
    const auto ids = rewarder->vocab->tokenize(smiles);
    tssr::Rng rng(seed);
    const tssr::RewardBreakdown b = rewarder->rewarder->reward(ids, rng);
    out->reward = b.reward;
    out->f_swap = b.f_swap;
    out->f_err = b.f_err;
    out->f_dist = b.f_dist;
    out->path = static_cast<tssr_repair_path>(static_cast<int>(b.path));
    out->n_fail_stage1 = b.n_fail_stage1;
    out->n_fail_stage2 = b.n_fail_stage2;
    out->n_swaps = b.n_swaps;
    out->initial_errors = b.initial_errors;
    out->final_errors = b.final_errors;
    const std::string text = b.repaired_sequence ? rewarder->vocab->detokenize(*b.repaired_sequence) : std::string();
    if (repaired && repaired_len > 0) {
      const std::size_t n = std::min(text.size(), repaired_len - 1);
      std::memcpy(repaired, text.data(), n);
      repaired[n] = '\0';
    }
  });
}

}  // extern "C"
