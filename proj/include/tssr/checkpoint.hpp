#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tssr/policy.hpp"

namespace tssr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;  // row-major

  friend bool operator==(const StoredTensor&, const StoredTensor&) = default;
};

// Binary layout (all integers and reals little-endian):
//   "TSSR" u32 version u64 vocab_hash
//   u32 vocab u32 embed u32 hidden u32 layers u32 head_input u64 parameter_count
//   u32 n, n x tensor                     model tensors
//   u32 n, n x tensor                     optimizer tensors
//   u32 n, n x (u32 len, name, u64)       counters (optimizer steps, episodes)
//   u64 rng_seed
// tensor = u32 len, name, u32 rank, rank x u64 dim, f32 data
struct Checkpoint {
  std::uint64_t vocab_hash = 0;
  ModelDims dims;
  std::uint64_t parameter_count = 0;
  std::vector<StoredTensor> tensors;
  std::vector<StoredTensor> optimizer;
  std::vector<std::pair<std::string, std::uint64_t>> counters;
  std::uint64_t rng_seed = 0;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const StoredTensor* find(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;
  std::uint64_t counter(const std::string& name, std::uint64_t fallback = 0) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

template <typename T>
void store_tensors(std::vector<StoredTensor>& out, const std::vector<NamedTensor<T>>& src, const std::string& prefix = "");

// Copies stored values into src tensors; throws ValidationError on a missing
// name or shape mismatch.
template <typename T>
void restore_tensors(const std::vector<StoredTensor>& in, const std::vector<NamedTensor<T>>& dst, const std::string& prefix = "");

}  // namespace tssr
