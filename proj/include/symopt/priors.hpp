#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/logits.hpp"
#include "symopt/traversal.hpp"

namespace symopt {

// ---------------------------------------------------------------------------
// Individual priors. All entries are finite: priors bias the distribution but
// never remove support.
// ---------------------------------------------------------------------------

// Multiplies the resulting probability vector elementwise by lambda (after
// renormalization). The adjustment is log(lambda), independent of the base
// logits.
inline LogitAdjustment token_specific_prior(std::span<const double> lambda) {
  LogitAdjustment adj = LogitAdjustment::zeros(lambda.size());
  for (std::size_t v = 0; v < lambda.size(); ++v) {
    if (!(lambda[v] > 0.0)) {
      throw ConfigError("token-specific prior: lambda entries must be positive (use a "
                        "constraint for hard exclusion)");
    }
    adj.values[v] = std::log(lambda[v]);
  }
  return adj;
}

// Token-specific prior applied only at the listed positions; absent positions
// receive the zero adjustment.
inline LogitAdjustment positional_prior(const std::map<std::size_t, std::vector<double>>& table,
                                        std::size_t position, std::size_t vocab) {
  auto it = table.find(position);
  if (it == table.end()) return LogitAdjustment::zeros(vocab);
  if (it->second.size() != vocab) throw ConfigError("positional prior: lambda length mismatch");
  return token_specific_prior(it->second);
}

// Discourages sequence lengths far from `target_length`: arity>=2 tokens are
// penalized by the quadratic before the target position, terminals after it,
// arity-1 tokens never. Positions are indexed from 0 at the first token.
// Arities above 2 share the arity-2 branch.
inline LogitAdjustment soft_length_prior(std::size_t position, double target_length, double sigma,
                                         const Library& lib) {
  if (!(sigma > 0.0)) throw ConfigError("soft-length prior: sigma must be positive");
  LogitAdjustment adj = LogitAdjustment::zeros(lib.size());
  const double i = static_cast<double>(position);
  const double q = -(i - target_length) * (i - target_length) / (2.0 * sigma * sigma);
  for (TokenId v = 0; v < lib.size(); ++v) {
    const int arity = lib.arity(v);
    if (arity >= 2 && i < target_length) adj.values[v] = q;
    if (arity == 0 && i > target_length) adj.values[v] = q;
  }
  return adj;
}

// Against a uniform base distribution, makes the arity marginal uniform:
// each token gets -log |A(arity(v))|.
inline LogitAdjustment uniform_arity_prior(const Library& lib) {
  LogitAdjustment adj = LogitAdjustment::zeros(lib.size());
  for (TokenId v = 0; v < lib.size(); ++v) {
    adj.values[v] = -std::log(static_cast<double>(lib.arity_class(lib.arity(v)).size()));
  }
  return adj;
}

// Scales external language-model logits; `strength` acts like an inverse
// temperature on their contribution.
inline LogitAdjustment language_model_prior(std::span<const double> lm_logits, double strength,
                                            std::size_t vocab) {
  if (lm_logits.size() != vocab) throw ConfigError("language-model prior: logit length mismatch");
  LogitAdjustment adj = LogitAdjustment::zeros(vocab);
  for (std::size_t v = 0; v < vocab; ++v) adj.values[v] = strength * lm_logits[v];
  return adj;
}

// ---------------------------------------------------------------------------
// Bundled language-model stand-in: a bigram frequency model over traversals
// with add-one smoothing. Conditions on the preceding token of the sequence.
// ---------------------------------------------------------------------------

class BigramModel {
 public:
  // Corpus format: one space-separated traversal per line.
  static BigramModel fit_file(const std::string& path, const Library& lib) {
    std::ifstream in(path);
    if (!in) throw ConfigError("bigram corpus not readable: " + path);
    std::vector<Sequence> corpus;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      Sequence seq;
      std::string sym;
      while (ss >> sym) seq.push_back(lib.id_of(sym));
      if (!seq.empty()) corpus.push_back(std::move(seq));
    }
    return fit(corpus, lib);
  }

  static BigramModel fit(const std::vector<Sequence>& corpus, const Library& lib) {
    BigramModel m;
    m.vocab_ = lib.size();
    // Row vocab_ is the begin-of-sequence context; add-one smoothing.
    std::vector<std::vector<double>> counts(m.vocab_ + 1,
                                            std::vector<double>(m.vocab_, 1.0));
    for (const auto& seq : corpus) {
      std::size_t prev = m.vocab_;
      for (TokenId t : seq) {
        counts[prev][t] += 1.0;
        prev = t;
      }
    }
    m.logp_.resize(counts.size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
      double total = 0.0;
      for (double c : counts[r]) total += c;
      m.logp_[r].resize(m.vocab_);
      for (std::size_t v = 0; v < m.vocab_; ++v) {
        m.logp_[r][v] = std::log(counts[r][v] / total);
      }
    }
    return m;
  }

  std::vector<double> logits_for(const TraversalState& state) const {
    return logp_[state.last_token().value_or(vocab_)];
  }

  std::size_t vocab() const { return vocab_; }

 private:
  std::size_t vocab_ = 0;
  std::vector<std::vector<double>> logp_;
};

// ---------------------------------------------------------------------------
// Prior set
// ---------------------------------------------------------------------------

struct TokenSpecificPrior {
  std::vector<double> lambda;
};

struct PositionalPrior {
  std::map<std::size_t, std::vector<double>> table;
};

struct SoftLengthPrior {
  double target_length = 10.0;
  double sigma = 5.0;
};

struct UniformArityPrior {};

struct LanguageModelPrior {
  double strength = 1.0;
  // Pluggable conditional logit source; defaults are built from BigramModel.
  std::function<std::vector<double>(const TraversalState&)> source;
};

using Prior = std::variant<TokenSpecificPrior, PositionalPrior, SoftLengthPrior, UniformArityPrior,
                           LanguageModelPrior>;

inline LogitAdjustment prior_adjustment(const Prior& prior, const TraversalState& state,
                                        const Library& lib) {
  struct V {
    const TraversalState& state;
    const Library& lib;
    LogitAdjustment operator()(const TokenSpecificPrior& p) const {
      return token_specific_prior(p.lambda);
    }
    LogitAdjustment operator()(const PositionalPrior& p) const {
      return positional_prior(p.table, state.length(), lib.size());
    }
    LogitAdjustment operator()(const SoftLengthPrior& p) const {
      return soft_length_prior(state.length(), p.target_length, p.sigma, lib);
    }
    LogitAdjustment operator()(const UniformArityPrior&) const {
      return uniform_arity_prior(lib);
    }
    LogitAdjustment operator()(const LanguageModelPrior& p) const {
      if (!p.source) throw ConfigError("language-model prior: no logit source");
      return language_model_prior(p.source(state), p.strength, lib.size());
    }
  };
  return std::visit(V{state, lib}, prior);
}

class PriorSet {
 public:
  PriorSet() = default;

  PriorSet& add(Prior p) {
    items_.push_back(std::move(p));
    return *this;
  }

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<Prior>& items() const { return items_; }

  LogitAdjustment adjustment_for(const TraversalState& state, const Library& lib) const {
    LogitAdjustment total = LogitAdjustment::zeros(lib.size());
    for (const auto& p : items_) {
      const LogitAdjustment a = prior_adjustment(p, state, lib);
      for (std::size_t v = 0; v < lib.size(); ++v) total.values[v] += a.values[v];
    }
    return total;
  }

 private:
  std::vector<Prior> items_;
};

}  // namespace symopt
