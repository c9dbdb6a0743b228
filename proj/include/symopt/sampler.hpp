#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "symopt/constraints.hpp"
#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/logits.hpp"
#include "symopt/policy.hpp"
#include "symopt/priors.hpp"
#include "symopt/rng.hpp"
#include "symopt/traversal.hpp"

namespace symopt {

// Anything that can emit per-step logits over the library: the recurrent
// policy, or fixed/tabular logit sources in tests.
template <class P>
concept SamplingPolicy = requires(const P& p, typename P::State& s, TokenId a, TokenId b) {
  { p.initial_state() } -> std::convertible_to<typename P::State>;
  { p.step(s, a, b) } -> std::convertible_to<std::vector<double>>;
};

struct SampleOptions {
  std::size_t max_steps = 64;          // hard safety cap on tokens per sequence
  bool truncate_on_overrun = false;    // record a truncated sample instead of throwing
};

struct SampleRecord {
  Sequence sequence;
  double log_prob = 0.0;               // sum of per-step adjusted log-probabilities
  std::vector<double> entropies;       // per-step entropy of the adjusted distribution
  std::size_t length = 0;
  bool truncated = false;
};

namespace detail {

// Per-step adjusted distribution: Softmax(policy logits + priors + masks).
template <SamplingPolicy P>
std::vector<double> adjusted_distribution(const P& policy, typename P::State& hidden,
                                          const TraversalState& state, const PriorSet& priors,
                                          const ConstraintSet& constraints, const Library& lib) {
  const auto [parent, sibling] = observation(state);
  std::vector<double> logits = policy.step(hidden, parent, sibling);
  if (logits.size() != lib.size()) throw ContractViolation("policy vocab mismatch");
  const LogitAdjustment adj = priors.adjustment_for(state, lib);
  const Mask mask = constraints.mask_for(state, lib);
  for (std::size_t v = 0; v < lib.size(); ++v) logits[v] += adj.values[v] + mask.values[v];
  return softmax(logits);
}

}  // namespace detail

// Samples one complete sequence from the composed distribution
// Categorical(Softmax(l + sum priors + sum masks)), recording the exact
// log-likelihood and per-step entropies. Masked tokens have sampling
// probability exactly zero. Requires a termination source: a max-length
// constraint or the options' safety cap.
template <SamplingPolicy P, class Rng>
SampleRecord sample_sequence(const P& policy, const PriorSet& priors,
                             const ConstraintSet& constraints, const Library& lib, Rng& rng,
                             const SampleOptions& opts = {}) {
  SampleRecord rec;
  TraversalState state(lib);
  typename P::State hidden = policy.initial_state();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (!state.complete()) {
    if (state.length() >= opts.max_steps) {
      if (opts.truncate_on_overrun) {
        rec.truncated = true;
        break;
      }
      throw Error("sample_sequence: safety cap of " + std::to_string(opts.max_steps) +
                  " steps exceeded; configure a length constraint or raise the cap");
    }
    const std::vector<double> p =
        detail::adjusted_distribution(policy, hidden, state, priors, constraints, lib);
    const double u = unif(rng);
    double cum = 0.0;
    TokenId chosen = kNoToken;
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (p[v] <= 0.0) continue;
      cum += p[v];
      chosen = v;
      if (u < cum) break;
    }
    rec.log_prob += std::log(p[chosen]);
    rec.entropies.push_back(entropy(p));
    state.append(chosen);
  }
  rec.sequence = state.sequence();
  rec.length = rec.sequence.size();
  return rec;
}

// Exact log-likelihood the sampler would record for `seq`; deterministic, and
// bit-identical to a SampleRecord's log_prob (same arithmetic order). An
// unreachable sequence (one that crosses a masked token) yields -inf.
template <SamplingPolicy P>
double sequence_log_prob(const P& policy, const PriorSet& priors,
                         const ConstraintSet& constraints, const Sequence& seq,
                         const Library& lib) {
  TraversalState state(lib);
  typename P::State hidden = policy.initial_state();
  double log_prob = 0.0;
  for (TokenId tok : seq) {
    std::vector<double> p;
    try {
      p = detail::adjusted_distribution(policy, hidden, state, priors, constraints, lib);
    } catch (const InfeasibleStepError&) {
      return kNegInf;
    }
    if (p[tok] <= 0.0) return kNegInf;
    log_prob += std::log(p[tok]);
    state.append(tok);
  }
  return log_prob;
}

// Draws a batch of independent sequences. Element i uses its own RNG stream
// derived from (master_seed, batch_index, i).
template <SamplingPolicy P>
std::vector<SampleRecord> sample_batch(const P& policy, const PriorSet& priors,
                                       const ConstraintSet& constraints, const Library& lib,
                                       std::size_t batch_size, std::uint64_t master_seed,
                                       std::uint64_t batch_index = 0,
                                       const SampleOptions& opts = {}) {
  std::vector<SampleRecord> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::mt19937_64 rng(substream(master_seed, batch_index, i));
    out.push_back(sample_sequence(policy, priors, constraints, lib, rng, opts));
  }
  return out;
}

// Exact probability of every reachable complete sequence of length <= max_len,
// by depth-first expansion of the adjusted categorical at each step. Dead-end
// prefixes (infeasible steps, or prefixes that cannot close within max_len)
// contribute zero mass, so the total is 1 exactly when no dead ends exist.
// Refuses to expand more than `node_limit` prefixes.
template <SamplingPolicy P>
std::map<Sequence, double> enumerate_distribution(const P& policy, const PriorSet& priors,
                                                  const ConstraintSet& constraints,
                                                  const Library& lib, std::size_t max_len,
                                                  std::size_t node_limit = 1000000) {
  std::map<Sequence, double> dist;
  std::size_t expanded = 0;

  struct Frame {
    TraversalState state;
    typename P::State hidden;
    double prob;
  };
  auto expand = [&](auto&& self, Frame frame) -> void {
    if (frame.state.complete()) {
      dist[frame.state.sequence()] += frame.prob;
      return;
    }
    if (frame.state.length() >= max_len) return;
    if (++expanded > node_limit) {
      throw Error("enumerate_distribution: more than " + std::to_string(node_limit) +
                  " prefixes; the space at max_len " + std::to_string(max_len) +
                  " is too large to enumerate");
    }
    std::vector<double> p;
    typename P::State hidden = frame.hidden;
    try {
      p = detail::adjusted_distribution(policy, hidden, frame.state, priors, constraints, lib);
    } catch (const InfeasibleStepError&) {
      return;
    }
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (p[v] <= 0.0) continue;
      Frame next{frame.state, hidden, frame.prob * p[v]};
      next.state.append(v);
      self(self, std::move(next));
    }
  };
  expand(expand, Frame{TraversalState(lib), policy.initial_state(), 1.0});
  return dist;
}

}  // namespace symopt
