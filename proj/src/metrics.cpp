#include "tssr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tssr/chemcheck.hpp"
#include "tssr/error.hpp"
#include "tssr/parallel.hpp"
#include "tssr/rng.hpp"

namespace tssr {
namespace {

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hydrogen counts that do not depend on which Kekulé structure was found, so
// the fingerprint is independent of atom order.
std::vector<int> stable_hydrogens(const MolGraph& g) {
  std::vector<int> h = analyze(g, false).hydrogens;
  for (std::size_t u = 0; u < g.atoms.size(); ++u) {
    const Atom& a = g.atoms[u];
    if (!a.aromatic || a.hydrogens) continue;
    int base = 0;
    for (const auto& b : g.bonds) {
      if (b.a == static_cast<int>(u) || b.b == static_cast<int>(u)) base += b.order == BondOrder::Aromatic ? 1 : static_cast<int>(b.order);
    }
    if (a.element == "C") {
      h[u] = std::max(0, 3 - base);
    } else if (a.element == "B") {
      h[u] = std::max(0, 2 - base);
    } else {
      h[u] = 0;
    }
  }
  return h;
}

}  // namespace

Fingerprint fingerprint(const MolGraph& g) {
  Fingerprint fp;
  const std::size_t n = g.atoms.size();
  if (n == 0) return fp;
  const auto adj = g.adjacency();
  const std::vector<int> hyd = stable_hydrogens(g);
  std::vector<std::uint64_t> id(n);
  for (std::size_t u = 0; u < n; ++u) {
    const Atom& a = g.atoms[u];
    std::uint64_t h = combine(0, hash_string(a.element));
    h = combine(h, adj[u].size());
    h = combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(a.charge)));
    h = combine(h, a.aromatic ? 1 : 0);
    h = combine(h, static_cast<std::uint64_t>(hyd[u]));
    id[u] = h;
    fp.set(h % kFingerprintBits);
  }
  for (std::uint64_t round = 1; round <= 2; ++round) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t u = 0; u < n; ++u) {
      std::vector<std::pair<int, std::uint64_t>> env;
      for (auto [v, k] : adj[u]) env.emplace_back(static_cast<int>(g.bonds[static_cast<std::size_t>(k)].order), id[static_cast<std::size_t>(v)]);
      std::sort(env.begin(), env.end());
      std::uint64_t h = combine(round, id[u]);
      for (auto [order, nid] : env) h = combine(combine(h, static_cast<std::uint64_t>(order)), nid);
      next[u] = h;
      fp.set(h % kFingerprintBits);
    }
    id = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  const std::size_t uni = (a | b).count();
  if (uni == 0) return 1.0;
  return static_cast<double>((a & b).count()) / static_cast<double>(uni);
}

double nn_diversity(std::span<const Fingerprint> fps, int threads) {
  if (fps.size() < 2) throw ValidationError("nearest-neighbour diversity needs at least two molecules");
  std::vector<double> best(fps.size(), 0.0);
  parallel_for(fps.size(), threads, [&](std::size_t i) {
    double m = 0.0;
    for (std::size_t j = 0; j < fps.size(); ++j) {
      if (j != i) m = std::max(m, tanimoto(fps[i], fps[j]));
    }
    best[i] = m;
  });
  double sum = 0.0;
  for (double b : best) sum += 1.0 - b;
  return sum / static_cast<double>(fps.size());
}

MolGraph murcko_scaffold(const MolGraph& g) {
  const std::size_t n = g.atoms.size();
  const std::vector<bool> cyclic = cyclic_bonds(g, std::vector<bool>(g.bonds.size(), true));
  std::vector<bool> in_ring(n, false), alive(n, true);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (!cyclic[k]) continue;
    in_ring[static_cast<std::size_t>(g.bonds[k].a)] = true;
    in_ring[static_cast<std::size_t>(g.bonds[k].b)] = true;
  }
  const auto adj = g.adjacency();
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t u = 0; u < n; ++u) {
      if (!alive[u] || in_ring[u]) continue;
      int degree = 0;
      for (auto [v, k] : adj[u]) degree += alive[static_cast<std::size_t>(v)] ? 1 : 0;
      if (degree <= 1) {
        alive[u] = false;
        changed = true;
      }
    }
  }
  MolGraph out;
  std::vector<int> index(n, -1);
  for (std::size_t u = 0; u < n; ++u) {
    if (!alive[u]) continue;
    index[u] = static_cast<int>(out.atoms.size());
    out.atoms.push_back(g.atoms[u]);
  }
  for (const auto& b : g.bonds) {
    const int a = index[static_cast<std::size_t>(b.a)], c = index[static_cast<std::size_t>(b.b)];
    if (a >= 0 && c >= 0) out.bonds.push_back({a, c, b.order});
  }
  return out;
}

ScaffoldStats scaffold_stats(std::span<const MolGraph> generated, std::span<const MolGraph> reference, int threads) {
  auto unique_scaffolds = [threads](std::span<const MolGraph> mols) {
    std::vector<std::string> keys(mols.size());
    std::vector<MolGraph> scaffolds(mols.size());
    parallel_for(mols.size(), threads, [&](std::size_t i) {
      scaffolds[i] = murcko_scaffold(mols[i]);
      if (!scaffolds[i].empty()) keys[i] = canonicalize(scaffolds[i]);
    });
    std::vector<Fingerprint> fps;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < mols.size(); ++i) {
      if (keys[i].empty() || !seen.insert(keys[i]).second) continue;
      fps.push_back(fingerprint(scaffolds[i]));
    }
    return fps;
  };
  const std::vector<Fingerprint> gen = unique_scaffolds(generated);
  const std::vector<Fingerprint> ref = unique_scaffolds(reference);
  ScaffoldStats out;
  out.scaffold_count = gen.size();
  out.reference_empty = ref.empty();
  if (gen.empty() || ref.empty()) return out;
  std::vector<double> best(gen.size(), 0.0);
  parallel_for(gen.size(), threads, [&](std::size_t i) {
    double m = 0.0;
    for (const auto& r : ref) m = std::max(m, tanimoto(gen[i], r));
    best[i] = m;
  });
  double sum = 0.0;
  for (double b : best) sum += b;
  out.scaffold_similarity = sum / static_cast<double>(gen.size());
  return out;
}

std::unordered_set<std::string> canonical_set(std::span<const std::string> smiles, int threads) {
  std::vector<std::string> keys(smiles.size());
  parallel_for(smiles.size(), threads, [&](std::size_t i) {
    const ParseResult r = parse_smiles(smiles[i]);
    if (parsed(r)) keys[i] = canonicalize(std::get<MolGraph>(r));
  });
  std::unordered_set<std::string> out;
  for (auto& k : keys) {
    if (!k.empty()) out.insert(std::move(k));
  }
  return out;
}

GenerationMetrics evaluate(std::span<const std::string> generated, const std::unordered_set<std::string>& training,
                           int threads) {
  if (generated.empty()) throw ValidationError("no generated molecules to evaluate");
  struct Row {
    bool parsed = false;
    bool chem_valid = false;
    std::string canonical;
    std::size_t length = 0;
  };
  std::vector<Row> rows(generated.size());
  parallel_for(generated.size(), threads, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      row.length = lex_smiles(generated[i]).size();
    } catch (const TokenizeError&) {
      row.length = generated[i].size();
    }
    const ParseResult r = parse_smiles(generated[i]);
    if (!parsed(r)) return;
    const MolGraph& g = std::get<MolGraph>(r);
    row.parsed = true;
    row.canonical = canonicalize(g);
    row.chem_valid = count_problems(g) == 0;
  });

  GenerationMetrics m;
  m.n_gen = generated.size();
  std::unordered_set<std::string> chem_seen, syn_seen;
  double length_sum = 0.0;
  for (const Row& row : rows) {
    length_sum += static_cast<double>(row.length);
    if (!row.parsed) continue;
    ++m.n_syntactic_valid;
    const bool novel = !training.contains(row.canonical);
    if (novel) ++m.n_novel_syntactic;
    if (syn_seen.insert(row.canonical).second) ++m.n_unique_syntactic;
    if (!row.chem_valid) continue;
    ++m.n_chem_valid;
    if (novel) ++m.n_novel;
    if (chem_seen.insert(row.canonical).second) {
      ++m.n_unique;
      m.valid_canonical.push_back(row.canonical);
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  m.validity = ratio(m.n_syntactic_valid, m.n_gen);
  m.chem_validity = ratio(m.n_chem_valid, m.n_gen);
  m.novelty = ratio(m.n_novel, m.n_chem_valid);
  m.novelty_syntactic = ratio(m.n_novel_syntactic, m.n_syntactic_valid);
  m.uniqueness = ratio(m.n_unique, m.n_chem_valid);
  m.uniqueness_syntactic = ratio(m.n_unique_syntactic, m.n_syntactic_valid);
  m.novelty_undefined = m.n_chem_valid == 0;
  m.uniqueness_undefined = m.n_chem_valid == 0;
  m.mean_length = length_sum / static_cast<double>(m.n_gen);
  return m;
}

RepairStats repair_stats(std::span<const RewardBreakdown> breakdowns) {
  if (breakdowns.empty()) throw ValidationError("no reward breakdowns to summarize");
  RepairStats s;
  for (const auto& b : breakdowns) {
    s.swap_count += b.n_swaps;
    s.fix_rate += b.path == RepairPath::RepairedFromInvalid ? 1.0 : 0.0;
    s.chem_err_mean += b.initial_errors;
  }
  const auto n = static_cast<double>(breakdowns.size());
  s.swap_count /= n;
  s.fix_rate /= n;
  s.chem_err_mean /= n;
  return s;
}

double peak_reward(std::span<const double> returns) {
  if (returns.empty()) throw ValidationError("peak reward needs at least one episode");
  return *std::max_element(returns.begin(), returns.end());
}

double throughput(double n_updates, double batch, double mean_length, double seconds) {
  if (!(seconds > 0)) throw ValidationError("throughput needs a positive duration");
  return n_updates * batch * mean_length / seconds;
}

ProportionTest two_proportion_test(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw ValidationError("proportion test needs non-empty samples");
  if (k1 > n1 || k2 > n2) throw ValidationError("successes exceed sample size");
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  ProportionTest t;
  t.z = se > 0 ? (p1 - p2) / se : 0.0;
  t.significant = std::abs(t.z) > 1.96;
  return t;
}

void Report::count(const std::string& key, std::size_t v) { entries_.emplace_back(key, std::to_string(v)); }

void Report::fraction(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  entries_.emplace_back(key, buf);
}

void Report::text(const std::string& key, const std::string& v) { entries_.emplace_back(key, v); }

std::string Report::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace tssr
