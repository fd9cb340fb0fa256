/* C interface to the tssr library. All functions return a tssr_status; on
 * failure tssr_last_error() describes the problem (thread-local, valid until
 * the next call on the same thread). Handles are opaque and owned by the
 * caller, who releases them with the matching *_destroy function. */
#ifndef TSSR_TSSR_H
#define TSSR_TSSR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TSSR_API __declspec(dllexport)
#else
#define TSSR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tssr_status {
  TSSR_OK = 0,
  TSSR_ERR_VALIDATION = 1, /* bad configuration, arguments or input data */
  TSSR_ERR_IO = 2,         /* unreadable or unwritable files */
  TSSR_ERR_RUNTIME = 3     /* numerical failure or anything unexpected */
} tssr_status;

typedef struct tssr_config tssr_config;
typedef struct tssr_vocab tssr_vocab;
typedef struct tssr_rewarder tssr_rewarder;

TSSR_API const char* tssr_last_error(void);
TSSR_API const char* tssr_version(void);

/* Run configuration ("key = value" text format). */
TSSR_API tssr_status tssr_config_create(tssr_config** out);
TSSR_API void tssr_config_destroy(tssr_config* cfg);
TSSR_API tssr_status tssr_config_load(tssr_config* cfg, const char* path);
TSSR_API tssr_status tssr_config_set(tssr_config* cfg, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf when it fits; *needed receives
 * the size including the terminator. */
TSSR_API tssr_status tssr_config_get(const tssr_config* cfg, const char* key, char* buf, size_t buf_len, size_t* needed);
TSSR_API tssr_status tssr_config_validate(const tssr_config* cfg);
TSSR_API tssr_status tssr_config_save(const tssr_config* cfg, const char* path);
TSSR_API size_t tssr_config_key_count(void);
TSSR_API const char* tssr_config_key_name(size_t index);
TSSR_API const char* tssr_config_key_help(size_t index);

/* Subcommands. Progress lines go to stderr. */
TSSR_API tssr_status tssr_run_vocab_build(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_pretrain(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_train(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_sample(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_repair(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_eval(const tssr_config* cfg);
TSSR_API tssr_status tssr_run_oracle_export(const tssr_config* cfg);

/* Vocabulary. */
TSSR_API tssr_status tssr_vocab_load(const char* path, tssr_vocab** out);
TSSR_API tssr_status tssr_vocab_build(const char* corpus_path, tssr_vocab** out);
TSSR_API tssr_status tssr_vocab_save(const tssr_vocab* vocab, const char* path);
TSSR_API void tssr_vocab_destroy(tssr_vocab* vocab);
TSSR_API size_t tssr_vocab_size(const tssr_vocab* vocab);
TSSR_API uint64_t tssr_vocab_hash(const tssr_vocab* vocab);

/* Single-molecule checks. chem_problems is -1 when the string does not parse. */
TSSR_API tssr_status tssr_check_smiles(const char* smiles, int* parse_ok, int* chem_problems);
TSSR_API tssr_status tssr_canonicalize(const char* smiles, char* buf, size_t buf_len, size_t* needed);

/* Terminal reward. The rewarder keeps its own copy of the vocabulary. */
typedef enum tssr_repair_path {
  TSSR_PATH_VALID_DIRECT = 0,
  TSSR_PATH_REPAIRED_FROM_INVALID = 1,
  TSSR_PATH_UNREPAIRABLE = 2
} tssr_repair_path;

typedef struct tssr_reward_result {
  double reward;
  double f_swap;
  double f_err;
  double f_dist;
  tssr_repair_path path;
  int n_fail_stage1;
  int n_fail_stage2;
  int n_swaps;
  int initial_errors;
  int final_errors;
} tssr_reward_result;

/* Uses the k_subst, lambda_* and e_max keys of cfg. */
TSSR_API tssr_status tssr_rewarder_create(const tssr_vocab* vocab, const char* priors_path, const tssr_config* cfg,
                                          tssr_rewarder** out);
TSSR_API void tssr_rewarder_destroy(tssr_rewarder* rewarder);
/* Scores a SMILES string with a random stream seeded by `seed`. The repaired
 * string is copied into repaired (may be NULL) when it fits. */
TSSR_API tssr_status tssr_reward_smiles(const tssr_rewarder* rewarder, const char* smiles, uint64_t seed,
                                        tssr_reward_result* out, char* repaired, size_t repaired_len);

#ifdef __cplusplus
}
#endif

#endif /* TSSR_TSSR_H */
