#pragma once

#include <ostream>

#include "tssr/config.hpp"

namespace tssr {

// Subcommand bodies. Each validates the configuration first, writes its
// outputs and the effective configuration, and reports progress on `log`.
// Errors surface as ValidationError (bad input) or IoError/NumericError.
void run_vocab_build(const RunConfig& cfg, std::ostream& log);
void run_pretrain(const RunConfig& cfg, std::ostream& log);
void run_train(const RunConfig& cfg, std::ostream& log);
void run_sample(const RunConfig& cfg, std::ostream& log);
void run_repair(const RunConfig& cfg, std::ostream& log);
void run_eval(const RunConfig& cfg, std::ostream& log);
void run_oracle_export(const RunConfig& cfg, std::ostream& log);

}  // namespace tssr
