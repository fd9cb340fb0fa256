#include "tssr/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tssr {

std::vector<std::string> lex_smiles(std::string_view smiles) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < smiles.size()) {
    const char c = smiles[i];
    if (c == '[') {
      const auto close = smiles.find(']', i + 1);
      if (close == std::string_view::npos) {
        throw TokenizeError(i, "unterminated bracket expression at position " + std::to_string(i));
      }
      out.emplace_back(smiles.substr(i, close - i + 1));
      i = close + 1;
      continue;
    }
    if (i + 1 < smiles.size()) {
      const auto two = smiles.substr(i, 2);
      if (two == "Cl" || two == "Br") {
        out.emplace_back(two);
        i += 2;
        continue;
      }
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

Vocabulary Vocabulary::from_symbols(std::vector<std::string> symbols) {
  std::set<std::string> unique;
  for (auto& s : symbols) {
    if (s.empty()) throw ValidationError("empty token symbol");
    if (s == kBosSymbol || s == kEosSymbol || s == kPadSymbol) continue;
    unique.insert(std::move(s));
  }
  Vocabulary v;
  v.tokens_.push_back({std::string(kBosSymbol), kBos});
  v.tokens_.push_back({std::string(kEosSymbol), kEos});
  v.tokens_.push_back({std::string(kPadSymbol), kPad});
  for (const auto& s : unique) {
    v.tokens_.push_back({s, static_cast<TokenId>(v.tokens_.size())});
  }
  v.index_symbols();
  return v;
}

void Vocabulary::index_symbols() {
  lookup_.clear();
  max_plain_length_ = 1;
  for (const auto& t : tokens_) {
    lookup_.emplace(t.symbol, t.index);
    if (t.symbol.front() != '[') max_plain_length_ = std::max(max_plain_length_, t.symbol.size());
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view symbol) const {
  auto it = lookup_.find(std::string(symbol));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view smiles) const {
  std::vector<TokenId> out;
  out.reserve(smiles.size());
  std::size_t i = 0;
  while (i < smiles.size()) {
    if (smiles[i] == '[') {
      const auto close = smiles.find(']', i + 1);
      if (close != std::string_view::npos) {
        auto id = find(smiles.substr(i, close - i + 1));
        if (id && !is_special(*id)) {
          out.push_back(*id);
          i = close + 1;
          continue;
        }
      }
      throw TokenizeError(i, "no vocabulary token matches at position " + std::to_string(i));
    }
    bool matched = false;
    for (std::size_t len = std::min(max_plain_length_, smiles.size() - i); len >= 1; --len) {
      if (auto id = find(smiles.substr(i, len)); id && !is_special(*id)) {
        out.push_back(*id);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) throw TokenizeError(i, "no vocabulary token matches at position " + std::to_string(i));
  }
  return out;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (is_special(id)) continue;
    out += symbol(id);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t.symbol) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t.symbol << '\n';
  if (!out) throw IoError("failed writing vocabulary file " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocabulary file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 3 || lines[0] != kBosSymbol || lines[1] != kEosSymbol || lines[2] != kPadSymbol) {
    throw ValidationError("vocabulary file " + path.string() + " must start with [BOS], [EOS], [PAD]");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    v.tokens_.push_back({lines[i], static_cast<TokenId>(i)});
  }
  v.index_symbols();
  if (v.lookup_.size() != v.tokens_.size()) throw ValidationError("duplicate token in " + path.string());
  return v;
}

std::vector<std::string> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

Vocabulary build_vocabulary(std::span<const std::string> corpus) {
  if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::set<std::string> symbols;
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    try {
      for (auto& tok : lex_smiles(corpus[n])) symbols.insert(std::move(tok));
    } catch (const TokenizeError& e) {
      throw TokenizeError(e.position(), "line " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  return Vocabulary::from_symbols({symbols.begin(), symbols.end()});
}

std::size_t TokenPriors::positive_count() const {
  return static_cast<std::size_t>(std::count_if(probs.begin(), probs.end(), [](double p) { return p > 0.0; }));
}

TokenPriors compute_priors(std::span<const std::string> corpus, const Vocabulary& vocab) {
  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    try {
      for (TokenId id : vocab.tokenize(corpus[n])) ++counts[static_cast<std::size_t>(id)];
    } catch (const TokenizeError& e) {
      throw TokenizeError(e.position(), "line " + std::to_string(n + 1) + ": " + e.what());
    }
  }
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!vocab.is_special(static_cast<TokenId>(i))) total += counts[i];
  }
  if (total == 0) throw ValidationError("token priors: zero total count");
  TokenPriors p;
  p.probs.assign(vocab.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (vocab.is_special(static_cast<TokenId>(i))) continue;
    p.probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return p;
}

void TokenPriors::save(const std::filesystem::path& path, const Vocabulary& vocab) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write priors file " + path.string());
  char buf[64];
  for (const auto& t : vocab.tokens()) {
    std::snprintf(buf, sizeof buf, "%.17g", probs.at(static_cast<std::size_t>(t.index)));
    out << t.symbol << '\t' << buf << '\n';
  }
  if (!out) throw IoError("failed writing priors file " + path.string());
}

TokenPriors TokenPriors::load(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read priors file " + path.string());
  TokenPriors p;
  p.probs.assign(vocab.size(), 0.0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ValidationError("priors line " + std::to_string(lineno) + ": missing tab");
    auto id = vocab.find(std::string_view(line).substr(0, tab));
    if (!id) throw ValidationError("priors line " + std::to_string(lineno) + ": token not in vocabulary");
    p.probs[static_cast<std::size_t>(*id)] = std::stod(line.substr(tab + 1));
  }
  for (TokenId s : {Vocabulary::kBos, Vocabulary::kEos, Vocabulary::kPad}) {
    if (p[s] != 0.0) throw ValidationError("priors: special tokens must carry zero probability");
  }
  return p;
}

}  // namespace tssr
