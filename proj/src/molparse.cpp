#include "tssr/molparse.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>

#include "tssr/vocab.hpp"

namespace tssr {
namespace {

constexpr std::array<std::string_view, 46> kBracketElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",
    "Cl", "Ar", "K",  "Ca", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Ag", "Sn", "Sb", "Te", "I",  "Xe", "Pt", "Au", "Hg"};

bool known_element(std::string_view s) {
  return std::find(kBracketElements.begin(), kBracketElements.end(), s) != kBracketElements.end();
}

Lexeme atom_lexeme(std::string element, bool aromatic) {
  Lexeme lx;
  lx.kind = Lexeme::Kind::Atom;
  lx.atom.element = std::move(element);
  lx.atom.aromatic = aromatic;
  return lx;
}

Lexeme invalid() { return Lexeme{}; }

// [isotope] symbol [chirality] [H[n]] [charge] [:class]
Lexeme classify_bracket(std::string_view body) {
  std::size_t i = 0;
  while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
  if (i >= body.size()) return invalid();

  std::string element;
  bool aromatic = false;
  const char c0 = body[i];
  if (std::isupper(static_cast<unsigned char>(c0))) {
    if (i + 1 < body.size() && std::islower(static_cast<unsigned char>(body[i + 1])) &&
        known_element(body.substr(i, 2))) {
      element = std::string(body.substr(i, 2));
      i += 2;
    } else if (known_element(body.substr(i, 1))) {
      element = std::string(1, c0);
      i += 1;
    } else {
      return invalid();
    }
  } else if (std::islower(static_cast<unsigned char>(c0))) {
    for (std::string_view arom : {"se", "as", "te", "b", "c", "n", "o", "p", "s"}) {
      if (body.substr(i, arom.size()) == arom) {
        element = std::string(arom);
        element[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(element[0])));
        aromatic = true;
        i += arom.size();
        break;
      }
    }
    if (element.empty()) return invalid();
  } else if (c0 == '*') {
    element = "*";
    i += 1;
  } else {
    return invalid();
  }

  while (i < body.size() && body[i] == '@') ++i;

  int hydrogens = 0;
  if (i < body.size() && body[i] == 'H') {
    ++i;
    hydrogens = 1;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      hydrogens = body[i] - '0';
      ++i;
    }
  }

  int charge = 0;
  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    const char sign = body[i];
    const int unit = sign == '+' ? 1 : -1;
    ++i;
    if (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      charge = unit * (body[i] - '0');
      ++i;
    } else {
      charge = unit;
      while (i < body.size() && body[i] == sign) {
        charge += unit;
        ++i;
      }
    }
  }

  if (i < body.size() && body[i] == ':') {
    ++i;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
  }
  if (i != body.size()) return invalid();

  Lexeme lx = atom_lexeme(std::move(element), aromatic);
  lx.atom.charge = charge;
  lx.atom.hydrogens = hydrogens;
  return lx;
}

}  // namespace

std::vector<std::vector<std::pair<int, int>>> MolGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, int>>> adj(atoms.size());
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    adj[static_cast<std::size_t>(bonds[k].a)].emplace_back(bonds[k].b, static_cast<int>(k));
    adj[static_cast<std::size_t>(bonds[k].b)].emplace_back(bonds[k].a, static_cast<int>(k));
  }
  return adj;
}

int MolGraph::find_bond(int a, int b) const {
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    if ((bonds[k].a == a && bonds[k].b == b) || (bonds[k].a == b && bonds[k].b == a)) return static_cast<int>(k);
  }
  return -1;
}

static Lexeme of_kind(Lexeme::Kind kind) {
  Lexeme lx;
  lx.kind = kind;
  return lx;
}

Lexeme classify_token(std::string_view s) {
  if (s.empty()) return invalid();
  if (s.size() == 1) {
    const char c = s[0];
    switch (c) {
      case '(': return of_kind(Lexeme::Kind::BranchOpen);
      case ')': return of_kind(Lexeme::Kind::BranchClose);
      case '.': return of_kind(Lexeme::Kind::Dot);
      case '-':
      case '/':
      case '\\': {
        Lexeme lx = of_kind(Lexeme::Kind::Bond);
        lx.bond = BondOrder::Single;
        return lx;
      }
      case '=': {
        Lexeme lx = of_kind(Lexeme::Kind::Bond);
        lx.bond = BondOrder::Double;
        return lx;
      }
      case '#': {
        Lexeme lx = of_kind(Lexeme::Kind::Bond);
        lx.bond = BondOrder::Triple;
        return lx;
      }
      case ':': {
        Lexeme lx = of_kind(Lexeme::Kind::Bond);
        lx.bond = BondOrder::Aromatic;
        return lx;
      }
      case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
        return atom_lexeme(std::string(1, c), false);
      case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
        return atom_lexeme(std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c)))), true);
      case '*':
        return atom_lexeme("*", false);
      default:
        if (c >= '0' && c <= '9') {
          Lexeme lx = of_kind(Lexeme::Kind::RingClosure);
          lx.ring = c - '0';
          return lx;
        }
        return invalid();
    }
  }
  if (s == "Cl" || s == "Br") return atom_lexeme(std::string(s), false);
  if (s.front() == '[' && s.back() == ']' && s.size() > 2) return classify_bracket(s.substr(1, s.size() - 2));
  return invalid();
}

std::string_view to_string(ParseFailure::Kind kind) {
  switch (kind) {
    case ParseFailure::Kind::UnbalancedBranch: return "UnbalancedBranch";
    case ParseFailure::Kind::EmptyBranch: return "EmptyBranch";
    case ParseFailure::Kind::UnclosedRing: return "UnclosedRing";
    case ParseFailure::Kind::DanglingBond: return "DanglingBond";
    case ParseFailure::Kind::BadTokenPosition: return "BadTokenPosition";
  }
  return "?";
}

std::vector<bool> cyclic_bonds(const MolGraph& g, const std::vector<bool>& use) {
  // Tarjan bridge finding; a selected bond is cyclic iff it is not a bridge.
  const std::size_t n = g.atoms.size();
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (!use[k]) continue;
    adj[static_cast<std::size_t>(g.bonds[k].a)].emplace_back(g.bonds[k].b, static_cast<int>(k));
    adj[static_cast<std::size_t>(g.bonds[k].b)].emplace_back(g.bonds[k].a, static_cast<int>(k));
  }
  std::vector<bool> cyclic(g.bonds.size(), false);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) cyclic[k] = use[k];
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    int atom;
    int via_bond;
    std::size_t next;
  };
  std::vector<Frame> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    stack.push_back({static_cast<int>(root), -1, 0});
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto u = static_cast<std::size_t>(f.atom);
      if (f.next < adj[u].size()) {
        const auto [v, k] = adj[u][f.next++];
        if (k == f.via_bond) continue;
        const auto vi = static_cast<std::size_t>(v);
        if (disc[vi] == -1) {
          disc[vi] = low[vi] = timer++;
          stack.push_back({v, k, 0});
        } else {
          low[u] = std::min(low[u], disc[vi]);
        }
      } else {
        const int via = f.via_bond;
        stack.pop_back();
        if (!stack.empty()) {
          const auto p = static_cast<std::size_t>(stack.back().atom);
          low[p] = std::min(low[p], low[u]);
          if (low[u] > disc[p]) cyclic[static_cast<std::size_t>(via)] = false;
        }
      }
    }
  }
  return cyclic;
}

ParseResult parse(std::span<const Lexeme> tokens) {
  using Kind = ParseFailure::Kind;
  if (tokens.empty()) return ParseFailure{Kind::BadTokenPosition, 0};

  struct OpenRing {
    int atom = -1;
    std::optional<BondOrder> bond;
    std::size_t position = 0;
  };
  struct OpenBranch {
    int atom;
    std::size_t position;
    std::size_t atoms_at_open;
  };

  MolGraph g;
  std::vector<bool> implicit_bond;
  std::array<OpenRing, 10> rings{};
  std::vector<OpenBranch> branches;
  int prev = -1;
  std::optional<BondOrder> pending;
  std::size_t pending_pos = 0;

  auto add_bond = [&](int a, int b, std::optional<BondOrder> order) {
    const bool both_aromatic = g.atoms[static_cast<std::size_t>(a)].aromatic && g.atoms[static_cast<std::size_t>(b)].aromatic;
    BondOrder o = order.value_or(both_aromatic ? BondOrder::Aromatic : BondOrder::Single);
    g.bonds.push_back({a, b, o});
    implicit_bond.push_back(!order.has_value());
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Lexeme& t = tokens[i];
    switch (t.kind) {
      case Lexeme::Kind::Atom: {
        g.atoms.push_back(t.atom);
        const int idx = static_cast<int>(g.atoms.size()) - 1;
        if (prev >= 0) {
          if (pending == BondOrder::Aromatic && !(t.atom.aromatic && g.atoms[static_cast<std::size_t>(prev)].aromatic)) {
            return ParseFailure{Kind::BadTokenPosition, pending_pos};
          }
          add_bond(prev, idx, pending);
        }
        prev = idx;
        pending.reset();
        break;
      }
      case Lexeme::Kind::Bond:
        if (prev < 0) return ParseFailure{Kind::BadTokenPosition, i};
        if (pending) return ParseFailure{Kind::DanglingBond, pending_pos};
        pending = t.bond;
        pending_pos = i;
        break;
      case Lexeme::Kind::RingClosure: {
        if (prev < 0) return ParseFailure{Kind::BadTokenPosition, i};
        OpenRing& r = rings[static_cast<std::size_t>(t.ring)];
        if (r.atom < 0) {
          r = {prev, pending, i};
        } else {
          if (r.atom == prev) return ParseFailure{Kind::BadTokenPosition, i};
          if (g.find_bond(r.atom, prev) >= 0) return ParseFailure{Kind::BadTokenPosition, i};
          if (r.bond && pending && *r.bond != *pending) return ParseFailure{Kind::DanglingBond, i};
          auto order = pending ? pending : r.bond;
          if (order == BondOrder::Aromatic &&
              !(g.atoms[static_cast<std::size_t>(r.atom)].aromatic && g.atoms[static_cast<std::size_t>(prev)].aromatic)) {
            return ParseFailure{Kind::BadTokenPosition, i};
          }
          add_bond(r.atom, prev, order);
          r = OpenRing{};
        }
        pending.reset();
        break;
      }
      case Lexeme::Kind::BranchOpen:
        if (prev < 0) return ParseFailure{Kind::BadTokenPosition, i};
        if (pending) return ParseFailure{Kind::DanglingBond, pending_pos};
        branches.push_back({prev, i, g.atoms.size()});
        break;
      case Lexeme::Kind::BranchClose:
        if (i == 0) return ParseFailure{Kind::BadTokenPosition, i};
        if (pending) return ParseFailure{Kind::DanglingBond, pending_pos};
        if (branches.empty()) return ParseFailure{Kind::UnbalancedBranch, i};
        if (branches.back().atoms_at_open == g.atoms.size()) return ParseFailure{Kind::EmptyBranch, i};
        prev = branches.back().atom;
        branches.pop_back();
        break;
      case Lexeme::Kind::Dot:
        if (prev < 0) return ParseFailure{Kind::BadTokenPosition, i};
        if (pending) return ParseFailure{Kind::DanglingBond, pending_pos};
        prev = -1;
        break;
      case Lexeme::Kind::Invalid:
        return ParseFailure{Kind::BadTokenPosition, i};
    }
  }

  if (pending) return ParseFailure{Kind::DanglingBond, pending_pos};
  std::optional<ParseFailure> first;
  if (!branches.empty()) first = ParseFailure{Kind::UnbalancedBranch, branches.front().position};
  for (const auto& r : rings) {
    if (r.atom >= 0 && (!first || r.position < first->position)) first = ParseFailure{Kind::UnclosedRing, r.position};
  }
  if (first) return *first;

  // An implicit bond between two aromatic atoms that is not on a ring is a
  // plain single bond (biphenyl-style linkers).
  std::vector<bool> all(g.bonds.size(), true);
  const auto cyclic = cyclic_bonds(g, all);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (implicit_bond[k] && g.bonds[k].order == BondOrder::Aromatic && !cyclic[k]) g.bonds[k].order = BondOrder::Single;
  }
  return g;
}

ParseResult parse_symbols(std::span<const std::string> symbols) {
  std::vector<Lexeme> lx;
  lx.reserve(symbols.size());
  for (const auto& s : symbols) lx.push_back(classify_token(s));
  return parse(lx);
}

ParseResult parse_smiles(std::string_view smiles) {
  std::vector<std::string> symbols;
  try {
    symbols = lex_smiles(smiles);
  } catch (const TokenizeError& e) {
    // e.position() is a character offset; convert to a token index.
    const auto before = lex_smiles(smiles.substr(0, e.position()));
    return ParseFailure{ParseFailure::Kind::BadTokenPosition, before.size()};
  }
  return parse_symbols(symbols);
}

MolGraph relabel(const MolGraph& g, std::span<const int> perm) {
  MolGraph out;
  out.atoms.resize(g.atoms.size());
  for (std::size_t i = 0; i < g.atoms.size(); ++i) out.atoms[static_cast<std::size_t>(perm[i])] = g.atoms[i];
  std::vector<std::pair<int, Bond>> keyed;
  for (const auto& b : g.bonds) {
    Bond nb{perm[static_cast<std::size_t>(b.a)], perm[static_cast<std::size_t>(b.b)], b.order};
    if (nb.a > nb.b) std::swap(nb.a, nb.b);
    keyed.emplace_back(nb.a * static_cast<int>(g.atoms.size()) + nb.b, nb);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (auto& [k, b] : keyed) out.bonds.push_back(b);
  return out;
}

}  // namespace tssr
