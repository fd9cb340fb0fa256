#pragma once

#include <bitset>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tssr/molparse.hpp"
#include "tssr/reward.hpp"

namespace tssr {

inline constexpr std::size_t kFingerprintBits = 2048;
using Fingerprint = std::bitset<kFingerprintBits>;

// Circular fingerprint: radius 0..2 atom environments, 64-bit hashed and
// folded into 2048 bits.
Fingerprint fingerprint(const MolGraph& g);
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Mean over molecules of 1 - max Tanimoto to any other entry. Needs >= 2.
double nn_diversity(std::span<const Fingerprint> fps, int threads = 1);

// Ring atoms plus linkers, after repeatedly stripping degree-1 non-ring atoms.
MolGraph murcko_scaffold(const MolGraph& g);

struct ScaffoldStats {
  std::size_t scaffold_count = 0;
  double scaffold_similarity = 0.0;
  bool reference_empty = false;
};

ScaffoldStats scaffold_stats(std::span<const MolGraph> generated, std::span<const MolGraph> reference, int threads = 1);

struct GenerationMetrics {
  std::size_t n_gen = 0;
  std::size_t n_syntactic_valid = 0;
  std::size_t n_chem_valid = 0;
  std::size_t n_novel = 0;             // chemically valid, canonical form absent from training
  std::size_t n_novel_syntactic = 0;   // parseable, canonical form absent from training
  std::size_t n_unique = 0;            // distinct canonical forms among chemically valid
  std::size_t n_unique_syntactic = 0;  // distinct canonical forms among parseable
  double validity = 0.0;
  double chem_validity = 0.0;
  double novelty = 0.0;
  double novelty_syntactic = 0.0;
  double uniqueness = 0.0;
  double uniqueness_syntactic = 0.0;
  double mean_length = 0.0;
  bool novelty_undefined = false;
  bool uniqueness_undefined = false;
  std::vector<std::string> valid_canonical;  // distinct chemically valid forms, first-seen order
};

// training_canonical holds canonical forms of the training corpus.
GenerationMetrics evaluate(std::span<const std::string> generated, const std::unordered_set<std::string>& training_canonical,
                           int threads = 1);

// Canonical forms of every parseable line.
std::unordered_set<std::string> canonical_set(std::span<const std::string> smiles, int threads = 1);

struct RepairStats {
  double swap_count = 0.0;
  double fix_rate = 0.0;
  double chem_err_mean = 0.0;
};

RepairStats repair_stats(std::span<const RewardBreakdown> breakdowns);

double peak_reward(std::span<const double> discounted_returns);

// Tokens per second: n_updates * batch * mean_length / seconds.
double throughput(double n_updates, double batch, double mean_length, double seconds);

struct ProportionTest {
  double z = 0.0;
  bool significant = false;
};

ProportionTest two_proportion_test(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2);

// Ordered "key = value" report; fractions are written with 6 decimals.
class Report {
 public:
  void count(const std::string& key, std::size_t v);
  void fraction(const std::string& key, double v);
  void text(const std::string& key, const std::string& v);

  std::string str() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace tssr
