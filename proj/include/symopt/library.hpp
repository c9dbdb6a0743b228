#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/units.hpp"

namespace symopt {

using TokenId = std::size_t;
using Sequence = std::vector<TokenId>;

// Sentinel for "no token" (empty parent/sibling observation slots).
inline constexpr TokenId kNoToken = std::numeric_limits<TokenId>::max();

// How a token's output unit relates to its children's units.
enum class UnitRule {
  FixedOutput,         // output unit is a declared constant (terminals, custom ops)
  DimensionlessInOut,  // children and output are dimensionless (trig, exp, log)
  UnitPreserving,      // output unit equals every child's unit (+, -)
  Multiplicative,      // output = product of child units (*)
  Divisive,            // output = first / second child unit (/)
  Power,               // exponent dimensionless, output generally undeterminable
};

struct TokenSpec {
  std::string symbol;
  int arity = 0;
  std::optional<int> lex_rank;  // defaults to declaration order
  UnitRule unit_rule = UnitRule::FixedOutput;
  UnitSignature output_unit = UnitSignature::dimensionless();
  std::set<std::string> tags;
};

struct Token {
  std::string symbol;
  int arity = 0;
  int lex_rank = 0;
  UnitRule unit_rule = UnitRule::FixedOutput;
  UnitSignature output_unit;
  std::set<std::string> tags;

  bool has_tag(const std::string& t) const { return tags.count(t) > 0; }
};

// The ordered token vocabulary. Token positions are stable: every logit,
// adjustment, and mask vector indexes tokens by this order. Immutable after
// construction; safe to share across threads.
class Library {
 public:
  static Library build(const std::vector<TokenSpec>& specs) {
    if (specs.empty()) throw ConfigError("library: empty token list");
    Library lib;
    std::set<int> ranks_seen;
    int next_rank = 0;
    for (const auto& spec : specs) {
      if (spec.arity < 0) throw ConfigError("library: negative arity for " + spec.symbol);
      if (lib.index_.count(spec.symbol)) {
        throw ConfigError("library: duplicate symbol " + spec.symbol);
      }
      Token tok;
      tok.symbol = spec.symbol;
      tok.arity = spec.arity;
      tok.unit_rule = spec.unit_rule;
      tok.output_unit = spec.output_unit;
      tok.tags = spec.tags;
      if (tok.arity == 0) {
        tok.tags.insert("terminal");
      } else if (tok.tags.count("terminal")) {
        throw ConfigError("library: 'terminal' tag on arity>0 token " + spec.symbol);
      }
      if (spec.lex_rank) {
        tok.lex_rank = *spec.lex_rank;
      } else {
        while (ranks_seen.count(next_rank)) ++next_rank;
        tok.lex_rank = next_rank;
      }
      if (!ranks_seen.insert(tok.lex_rank).second) {
        throw ConfigError("library: duplicate lex rank " + std::to_string(tok.lex_rank) +
                          " for " + spec.symbol);
      }
      lib.index_.emplace(tok.symbol, lib.tokens_.size());
      lib.tokens_.push_back(std::move(tok));
    }
    bool has_terminal = false;
    for (const auto& t : lib.tokens_) has_terminal |= (t.arity == 0);
    if (!has_terminal) {
      throw ConfigError("library: no terminal token; no finite sequence can complete");
    }
    for (const auto& t : lib.tokens_) {
      lib.max_arity_ = std::max(lib.max_arity_, t.arity);
    }
    lib.arity_classes_.resize(static_cast<std::size_t>(lib.max_arity_) + 1);
    for (TokenId id = 0; id < lib.tokens_.size(); ++id) {
      lib.arity_classes_[static_cast<std::size_t>(lib.tokens_[id].arity)].push_back(id);
    }
    return lib;
  }

  std::size_t size() const { return tokens_.size(); }
  const Token& token(TokenId id) const { return tokens_[id]; }
  const std::vector<Token>& tokens() const { return tokens_; }

  int arity(TokenId id) const { return tokens_[id].arity; }
  int lex_rank(TokenId id) const { return tokens_[id].lex_rank; }
  const std::string& symbol(TokenId id) const { return tokens_[id].symbol; }

  bool has(const std::string& symbol) const { return index_.count(symbol) > 0; }

  TokenId id_of(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) throw ConfigError("library: unknown symbol " + symbol);
    return it->second;
  }

  int max_arity() const { return max_arity_; }

  // A(n): tokens with arity n. Empty for n > max arity.
  const std::vector<TokenId>& arity_class(int n) const {
    static const std::vector<TokenId> empty;
    if (n < 0 || n > max_arity_) return empty;
    return arity_classes_[static_cast<std::size_t>(n)];
  }

  std::vector<TokenId> with_tag(const std::string& tag) const {
    std::vector<TokenId> out;
    for (TokenId id = 0; id < tokens_.size(); ++id) {
      if (tokens_[id].has_tag(tag)) out.push_back(id);
    }
    return out;
  }

  std::string render(const Sequence& seq) const {
    std::string s;
    for (TokenId id : seq) {
      if (!s.empty()) s += " ";
      s += symbol(id);
    }
    return s;
  }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::vector<TokenId>> arity_classes_;
  int max_arity_ = 0;
};

// Descriptors for the usual symbolic-regression symbols, so configs can name
// tokens without spelling out arity/tags every time.
inline std::optional<TokenSpec> standard_token(const std::string& symbol) {
  auto make = [&](int arity, UnitRule rule, std::set<std::string> tags) {
    TokenSpec s;
    s.symbol = symbol;
    s.arity = arity;
    s.unit_rule = rule;
    s.tags = std::move(tags);
    return s;
  };
  if (symbol == "+") return make(2, UnitRule::UnitPreserving, {"commutative"});
  if (symbol == "-") return make(2, UnitRule::UnitPreserving, {});
  if (symbol == "*") return make(2, UnitRule::Multiplicative, {"commutative"});
  if (symbol == "/") return make(2, UnitRule::Divisive, {});
  if (symbol == "sin") return make(1, UnitRule::DimensionlessInOut, {"trig"});
  if (symbol == "cos") return make(1, UnitRule::DimensionlessInOut, {"trig"});
  if (symbol == "tan") return make(1, UnitRule::DimensionlessInOut, {"trig"});
  if (symbol == "exp") return make(1, UnitRule::DimensionlessInOut, {"exp"});
  if (symbol == "log") return make(1, UnitRule::DimensionlessInOut, {"log"});
  if (symbol == "sqrt") return make(1, UnitRule::Power, {});
  if (symbol == "pow") return make(2, UnitRule::Power, {});
  if (symbol.size() >= 2 && symbol[0] == 'x') {
    bool digits = true;
    for (std::size_t i = 1; i < symbol.size(); ++i) digits &= (std::isdigit(symbol[i]) != 0);
    if (digits) {
      auto s = make(0, UnitRule::FixedOutput, {"variable"});
      return s;
    }
  }
  return std::nullopt;
}

// Builds a library from plain symbols using the standard descriptors.
inline Library standard_library(const std::vector<std::string>& symbols) {
  std::vector<TokenSpec> specs;
  specs.reserve(symbols.size());
  for (const auto& s : symbols) {
    auto spec = standard_token(s);
    if (!spec) throw ConfigError("no standard descriptor for symbol " + s);
    specs.push_back(std::move(*spec));
  }
  return Library::build(specs);
}

}  // namespace symopt
