#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tssr/molparse.hpp"
#include "tssr/vocab.hpp"

namespace test {

inline std::filesystem::path data_dir() { return TSSR_TEST_DATA_DIR; }

inline const std::vector<std::string>& train_corpus() {
  static const std::vector<std::string> lines = tssr::read_corpus(data_dir() / "moses_train_10k.smi");
  return lines;
}

inline tssr::MolGraph graph(const std::string& smiles) {
  auto r = tssr::parse_smiles(smiles);
  if (!tssr::parsed(r)) throw std::runtime_error("test molecule does not parse: " + smiles);
  return std::get<tssr::MolGraph>(std::move(r));
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tssr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
