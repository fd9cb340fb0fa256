#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tssr {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;               // "C", "Cl", "H", ...; capitalized even when aromatic
  bool aromatic = false;
  int charge = 0;
  std::optional<int> hydrogens;      // set for bracket atoms only
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

// Heavy-atom graph. Implicit hydrogens are not materialized.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  std::size_t atom_count() const { return atoms.size(); }
  bool empty() const { return atoms.empty(); }

  // adjacency[i] lists (neighbor, bond index) pairs.
  std::vector<std::vector<std::pair<int, int>>> adjacency() const;
  int find_bond(int a, int b) const;  // -1 when absent
};

// A SMILES token classified once, so the parser never re-reads text.
struct Lexeme {
  enum class Kind : std::uint8_t { Atom, Bond, BranchOpen, BranchClose, RingClosure, Dot, Invalid };
  Kind kind = Kind::Invalid;
  Atom atom;                              // Kind::Atom
  BondOrder bond = BondOrder::Single;     // Kind::Bond
  int ring = -1;                          // Kind::RingClosure
};

Lexeme classify_token(std::string_view symbol);

struct ParseFailure {
  enum class Kind : std::uint8_t { UnbalancedBranch, EmptyBranch, UnclosedRing, DanglingBond, BadTokenPosition };
  Kind kind;
  std::size_t position;  // token index of the first offending token
};

std::string_view to_string(ParseFailure::Kind kind);

using ParseResult = std::variant<MolGraph, ParseFailure>;

inline bool parsed(const ParseResult& r) { return std::holds_alternative<MolGraph>(r); }

// Sanitization-free SMILES walk over pre-classified tokens.
ParseResult parse(std::span<const Lexeme> tokens);
ParseResult parse_symbols(std::span<const std::string> symbols);
// Lexes with lex_smiles first; an unterminated bracket is a BadTokenPosition.
ParseResult parse_smiles(std::string_view smiles);

// Canonical SMILES via invariant refinement, tie breaking and rank-ordered DFS.
std::string canonicalize(const MolGraph& g);

// Graph with atom i moved to position perm[i]; bonds are reordered too.
MolGraph relabel(const MolGraph& g, std::span<const int> perm);

// Bond indices that lie on at least one cycle of the subgraph selected by `use`.
std::vector<bool> cyclic_bonds(const MolGraph& g, const std::vector<bool>& use);

}  // namespace tssr
