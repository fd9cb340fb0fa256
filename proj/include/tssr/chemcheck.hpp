#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tssr/molparse.hpp"

namespace tssr {

// Fixed problem taxonomy. Values 6..12 are reserved so that the category
// count stays at kMaxErrorCategories.
enum class ProblemCategory : std::uint8_t {
  ValenceExceeded = 1,
  KekulizationFailure = 2,
  AromaticAtomNotInRing = 3,
  AromaticBondOutsideRing = 4,
  BadCharge = 5,
};
inline constexpr int kMaxErrorCategories = 12;

std::string_view to_string(ProblemCategory c);

struct ChemProblem {
  ProblemCategory category;
  std::optional<int> atom;  // unset for molecule-level problems
  std::string message;
};

struct Diagnostics {
  std::vector<ChemProblem> problems;

  std::size_t count() const { return problems.size(); }
  bool valid() const { return problems.empty(); }
};

// Kekulé bond orders: aromatic bonds resolved to Single or Double.
struct KekuleAssignment {
  std::vector<BondOrder> orders;  // indexed like MolGraph::bonds
};

struct KekulizeFailure {
  std::vector<int> atoms;  // aromatic atoms left without their double bond
  KekuleAssignment partial;
};

// Matching on the aromatic ring subgraph. Atoms that need a double bond must be
// matched; [nH]-type, o and s donors stay unmatched; plain n may go either way.
std::variant<KekuleAssignment, KekulizeFailure> kekulize(const MolGraph& g);

// Allowed total valences for an element at a charge; empty when the charge is
// outside the supported table. Elements absent from the table are unchecked.
std::optional<std::vector<int>> allowed_valences(const std::string& element, int charge);
bool element_known(const std::string& element);

struct ChemAnalysis {
  Diagnostics diagnostics;
  KekuleAssignment kekule;
  std::vector<int> hydrogens;  // total H per atom (explicit + implicit)
};

// Full diagnostics. Problems are ordered by (category, atom index).
ChemAnalysis analyze(const MolGraph& g, bool with_messages = true);
Diagnostics detect_problems(const MolGraph& g);
// Same count as detect_problems(g).count() without building messages.
std::size_t count_problems(const MolGraph& g);

}  // namespace tssr
