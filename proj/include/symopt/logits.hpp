#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/library.hpp"

namespace symopt {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Hard logit adjustment: every entry is 0 (allowed) or -inf (constrained).
// Entry v = -inf means v is in the constrained set C_i for this step.
struct Mask {
  std::vector<double> values;

  static Mask none(std::size_t n) { return Mask{std::vector<double>(n, 0.0)}; }

  std::size_t size() const { return values.size(); }
  void block(TokenId v) { values[v] = kNegInf; }
  bool blocked(TokenId v) const { return values[v] == kNegInf; }

  std::size_t blocked_count() const {
    std::size_t n = 0;
    for (double x : values) n += (x == kNegInf);
    return n;
  }
  bool any_blocked() const { return blocked_count() > 0; }
};

// Smooth logit adjustment: finite entries that bias the distribution without
// removing support.
struct LogitAdjustment {
  std::vector<double> values;

  static LogitAdjustment zeros(std::size_t n) {
    return LogitAdjustment{std::vector<double>(n, 0.0)};
  }
  std::size_t size() const { return values.size(); }
};

// Entrywise sum of masks == union of constrained sets. Throws
// InfeasibleStepError when the union covers the whole library; the
// `step`/`names` overload lets callers attribute the failure.
inline Mask compose_masks(std::span<const Mask> masks, std::size_t vocab, std::size_t step,
                          const std::vector<std::string>& names) {
  Mask out = Mask::none(vocab);
  for (const Mask& m : masks) {
    if (m.size() != vocab) throw ConfigError("compose_masks: mask length mismatch");
    for (std::size_t v = 0; v < vocab; ++v) out.values[v] += m.values[v];
  }
  bool any_allowed = false;
  for (double x : out.values) any_allowed |= (x == 0.0);
  if (!any_allowed && vocab > 0) throw InfeasibleStepError(step, names);
  return out;
}

inline Mask compose_masks(std::span<const Mask> masks, std::size_t vocab) {
  return compose_masks(masks, vocab, 0, {});
}

inline LogitAdjustment compose_adjustments(std::span<const LogitAdjustment> adjustments,
                                           std::size_t vocab) {
  LogitAdjustment out = LogitAdjustment::zeros(vocab);
  for (const LogitAdjustment& a : adjustments) {
    if (a.size() != vocab) throw ConfigError("compose_adjustments: length mismatch");
    for (std::size_t v = 0; v < vocab; ++v) out.values[v] += a.values[v];
  }
  return out;
}

// Numerically stable softmax. -inf entries yield probability exactly zero; the
// max subtraction considers finite entries only, so masked logits never
// produce NaN. All entries -inf is an error (the feasibility guard upstream
// must prevent it).
inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = kNegInf;
  for (double x : logits) {
    if (x != kNegInf && x > mx) mx = x;
  }
  if (mx == kNegInf) throw Error("softmax: all logits are -inf");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] != kNegInf) {
      p[i] = std::exp(logits[i] - mx);
      z += p[i];
    }
  }
  for (double& x : p) x /= z;
  return p;
}

// Shannon entropy of a probability vector, 0*log(0) taken as 0.
inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace symopt
