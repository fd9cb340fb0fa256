#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tssr/optim.hpp"
#include "tssr/policy.hpp"
#include "tssr/vocab.hpp"

namespace tssr {

inline constexpr int kMaxSequenceLength = 60;

// Token matrix with one padded sequence per row (BOS, content, EOS, PAD...).
// mask(b, t) is 1 exactly where tokens(b, t) is not PAD.
struct PretrainBatch {
  Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tokens;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;

  int rows() const { return static_cast<int>(tokens.rows()); }
  int length() const { return static_cast<int>(tokens.cols()); }
};

struct EncodedCorpus {
  std::vector<std::vector<TokenId>> sequences;  // content tokens only
  std::size_t skipped_too_long = 0;
};

// Tokenizes every line; lines with more than length-2 tokens are skipped and
// counted. A line that does not tokenize aborts with its 1-based line number.
EncodedCorpus encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab, int length = kMaxSequenceLength);

PretrainBatch make_batch(std::span<const std::vector<TokenId>> sequences, int length = kMaxSequenceLength);

// Masked cross-entropy with a confidence penalty, averaged over unmasked
// target positions: mean of -log p(y) + beta * sum_i p_i log p_i.
// logits[t] scores targets(:, t); dlogits (optional) receives d loss/d logits.
template <typename T>
double confidence_penalty_loss(const std::vector<Matrix<T>>& logits, const PretrainBatch& targets_batch, double beta,
                               std::vector<Matrix<T>>* dlogits);

// Teacher-forced loss of a batch: token t predicts token t+1. With grad set,
// accumulates exact BPTT gradients.
template <typename T>
double sequence_loss(const Actor<T>& actor, const PretrainBatch& batch, double beta, Dropout drop, Actor<T>* grad);

struct PretrainOptions {
  double lr = 1e-3;
  double beta = 0.1;
  double clip = 10.0;
  int epochs = 1;
  int batch_size = 256;
  double dropout = 0.2;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  Actor<float> actor;
  AdamState<float> adam;
  std::vector<std::pair<std::uint64_t, double>> log;  // (step, batch loss)
};

// Initializes an actor from the seed and runs the configured shuffled epochs.
// on_step (optional) sees each (step, loss) as it is produced.
PretrainResult pretrain(std::span<const std::vector<TokenId>> sequences, const ModelDims& dims,
                        const PretrainOptions& opt,
                        const std::function<void(std::uint64_t, double)>& on_step = {});

// Mean per-token loss (beta = 0 gives plain cross entropy) over a corpus.
double heldout_loss(const Actor<float>& actor, std::span<const std::vector<TokenId>> sequences, double beta,
                    int batch_size = 256);

}  // namespace tssr
