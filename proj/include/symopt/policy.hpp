#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "symopt/constraints.hpp"
#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/logits.hpp"
#include "symopt/priors.hpp"
#include "symopt/traversal.hpp"

#include "json.hpp"

namespace symopt {

// Observation fed to the policy before sampling the next token: the parent
// and preceding-sibling root of the position being filled.
inline std::pair<TokenId, TokenId> observation(const TraversalState& state) {
  const PositionContext ctx = state.context();
  return {ctx.parent.value_or(kNoToken), ctx.left_sibling_root.value_or(kNoToken)};
}

// Autoregressive recurrent policy. Input is the one-hot parent and sibling of
// the next position (each vocab+1 wide, with an "empty" slot); a single gated
// (or plain tanh) recurrent layer feeds a linear projection to vocab logits.
// The output projection is zero-initialized, so an untrained policy emits a
// uniform distribution at every step. All arithmetic is double precision.
class RecurrentPolicy {
 public:
  enum class Cell { Gru, Tanh };

  struct State {
    std::vector<double> h;
  };

  struct StepCache {
    std::size_t parent_slot = 0, sibling_slot = 0;
    std::vector<double> h_prev, z, r, rh, n, h;
  };

  RecurrentPolicy(const Library& lib, int hidden_width, std::uint64_t seed,
                  Cell cell = Cell::Gru)
      : vocab_(lib.size()), hidden_(hidden_width), cell_(cell) {
    if (hidden_width < 1) throw ConfigError("policy: hidden width must be >= 1");
    input_ = 2 * (vocab_ + 1);
    const std::size_t h = static_cast<std::size_t>(hidden_);
    const std::size_t gates = cell_ == Cell::Gru ? 3 : 1;
    w_off_ = 0;
    u_off_ = w_off_ + gates * h * input_;
    b_off_ = u_off_ + gates * h * h;
    wout_off_ = b_off_ + gates * h;
    bout_off_ = wout_off_ + vocab_ * h;
    params_.assign(bout_off_ + vocab_, 0.0);

    // Small random recurrent/input weights; output projection stays zero so
    // the initial distribution is uniform.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    for (std::size_t i = 0; i < b_off_; ++i) params_[i] = dist(rng);
  }

  std::size_t vocab() const { return vocab_; }
  int hidden() const { return hidden_; }
  Cell cell() const { return cell_; }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  State initial_state() const { return State{std::vector<double>(hidden_, 0.0)}; }

  // Emits logits for the next token and advances the recurrent state.
  // Deterministic given parameters, observation, and state.
  std::vector<double> step(State& state, TokenId parent, TokenId sibling,
                           StepCache* cache = nullptr) const {
    const std::size_t h = static_cast<std::size_t>(hidden_);
    const std::size_t pi = parent == kNoToken ? vocab_ : parent;
    const std::size_t si = (vocab_ + 1) + (sibling == kNoToken ? vocab_ : sibling);
    const std::vector<double>& hp = state.h;
    std::vector<double> hn(h);

    if (cell_ == Cell::Gru) {
      std::vector<double> z(h), r(h), rh(h), n(h);
      for (std::size_t k = 0; k < h; ++k) {
        z[k] = sigmoid(gate_pre(0, k, pi, si, hp));
        r[k] = sigmoid(gate_pre(1, k, pi, si, hp));
      }
      for (std::size_t k = 0; k < h; ++k) rh[k] = r[k] * hp[k];
      for (std::size_t k = 0; k < h; ++k) n[k] = std::tanh(gate_pre(2, k, pi, si, rh));
      for (std::size_t k = 0; k < h; ++k) hn[k] = (1.0 - z[k]) * n[k] + z[k] * hp[k];
      if (cache) *cache = StepCache{pi, si, hp, z, r, rh, n, hn};
    } else {
      for (std::size_t k = 0; k < h; ++k) hn[k] = std::tanh(gate_pre(0, k, pi, si, hp));
      if (cache) *cache = StepCache{pi, si, hp, {}, {}, {}, {}, hn};
    }

    std::vector<double> logits(vocab_);
    const double* wout = params_.data() + wout_off_;
    for (std::size_t v = 0; v < vocab_; ++v) {
      double acc = params_[bout_off_ + v];
      const double* row = wout + v * h;
      for (std::size_t k = 0; k < h; ++k) acc += row[k] * hn[k];
      logits[v] = acc;
    }
    state.h = std::move(hn);
    return logits;
  }

  // Accumulates parameter gradients for one trajectory via backpropagation
  // through time. `dlogits[t]` is dLoss/dlogits at step t.
  void accumulate_grad(std::span<const StepCache> caches,
                       std::span<const std::vector<double>> dlogits,
                       std::vector<double>& grad) const {
    const std::size_t h = static_cast<std::size_t>(hidden_);
    std::vector<double> dh_next(h, 0.0);
    std::vector<double> dh(h), da(h), db(h), dc(h), drh(h);
    for (std::size_t t = caches.size(); t-- > 0;) {
      const StepCache& cc = caches[t];
      dh = dh_next;
      // Output projection.
      for (std::size_t v = 0; v < vocab_; ++v) {
        const double g = dlogits[t][v];
        if (g == 0.0) continue;
        grad[bout_off_ + v] += g;
        double* wrow = grad.data() + wout_off_ + v * h;
        const double* prow = params_.data() + wout_off_ + v * h;
        for (std::size_t k = 0; k < h; ++k) {
          wrow[k] += g * cc.h[k];
          dh[k] += g * prow[k];
        }
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      if (cell_ == Cell::Gru) {
        // h = (1-z) n + z h_prev
        for (std::size_t k = 0; k < h; ++k) {
          const double dz = dh[k] * (cc.h_prev[k] - cc.n[k]);
          const double dn = dh[k] * (1.0 - cc.z[k]);
          dh_next[k] += dh[k] * cc.z[k];
          da[k] = dz * cc.z[k] * (1.0 - cc.z[k]);          // pre-activation of z
          dc[k] = dn * (1.0 - cc.n[k] * cc.n[k]);          // pre-activation of n
        }
        backprop_gate(2, dc, cc.parent_slot, cc.sibling_slot, cc.rh, drh, grad);
        for (std::size_t k = 0; k < h; ++k) {
          const double dr = drh[k] * cc.h_prev[k];
          dh_next[k] += drh[k] * cc.r[k];
          db[k] = dr * cc.r[k] * (1.0 - cc.r[k]);          // pre-activation of r
        }
        backprop_gate(0, da, cc.parent_slot, cc.sibling_slot, cc.h_prev, dh_next, grad);
        backprop_gate(1, db, cc.parent_slot, cc.sibling_slot, cc.h_prev, dh_next, grad);
      } else {
        for (std::size_t k = 0; k < h; ++k) da[k] = dh[k] * (1.0 - cc.h[k] * cc.h[k]);
        backprop_gate(0, da, cc.parent_slot, cc.sibling_slot, cc.h_prev, dh_next, grad);
      }
    }
  }

  void save(const std::string& path, const Library& lib) const {
    nlohmann::json j;
    j["format"] = "symopt-policy";
    j["version"] = 1;
    j["cell"] = cell_ == Cell::Gru ? "gru" : "tanh";
    j["hidden"] = hidden_;
    std::vector<std::string> symbols;
    for (const auto& t : lib.tokens()) symbols.push_back(t.symbol);
    j["library"] = symbols;
    j["params"] = params_;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
  }

  static RecurrentPolicy load(const std::string& path, const Library& lib) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "symopt-policy" || j.value("version", 0) != 1) {
      throw ConfigError("unrecognized checkpoint format: " + path);
    }
    std::vector<std::string> symbols = j.at("library").get<std::vector<std::string>>();
    if (symbols.size() != lib.size()) throw ConfigError("checkpoint library mismatch");
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (symbols[i] != lib.symbol(i)) throw ConfigError("checkpoint library mismatch");
    }
    RecurrentPolicy p(lib, j.at("hidden").get<int>(), 0,
                      j.value("cell", "gru") == "tanh" ? Cell::Tanh : Cell::Gru);
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    if (params.size() != p.params_.size()) throw ConfigError("checkpoint parameter size mismatch");
    p.params_ = std::move(params);
    return p;
  }

 private:
  static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  // Pre-activation of gate g at unit k: W[g] one-hot columns + U[g] . vec + b[g].
  double gate_pre(std::size_t g, std::size_t k, std::size_t pi, std::size_t si,
                  const std::vector<double>& vec) const {
    const std::size_t h = static_cast<std::size_t>(hidden_);
    const double* w = params_.data() + w_off_ + g * h * input_ + k * input_;
    const double* u = params_.data() + u_off_ + g * h * h + k * h;
    double acc = params_[b_off_ + g * h + k] + w[pi] + w[si];
    for (std::size_t j = 0; j < h; ++j) acc += u[j] * vec[j];
    return acc;
  }

  // Distributes gate pre-activation gradients onto W (one-hot columns), U, b,
  // and the vector the gate read (h_prev or r*h_prev).
  void backprop_gate(std::size_t g, const std::vector<double>& dpre, std::size_t pi,
                     std::size_t si, const std::vector<double>& vec, std::vector<double>& dvec,
                     std::vector<double>& grad) const {
    const std::size_t h = static_cast<std::size_t>(hidden_);
    for (std::size_t k = 0; k < h; ++k) {
      const double d = dpre[k];
      if (d == 0.0) continue;
      double* wrow = grad.data() + w_off_ + g * h * input_ + k * input_;
      wrow[pi] += d;
      wrow[si] += d;
      grad[b_off_ + g * h + k] += d;
      double* urow = grad.data() + u_off_ + g * h * h + k * h;
      const double* uprow = params_.data() + u_off_ + g * h * h + k * h;
      for (std::size_t j = 0; j < h; ++j) {
        urow[j] += d * vec[j];
        dvec[j] += d * uprow[j];
      }
    }
  }

  std::size_t vocab_;
  int hidden_;
  Cell cell_;
  std::size_t input_ = 0;
  std::size_t w_off_ = 0, u_off_ = 0, b_off_ = 0, wout_off_ = 0, bout_off_ = 0;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Risk-seeking policy-gradient training
// ---------------------------------------------------------------------------

struct TrainerConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 500;
  double risk_quantile = 0.1;  // epsilon: fraction of top samples trained on
  double entropy_weight = 5e-3;
  double entropy_gamma = 1.0;  // per-position decay of the entropy bonus
  std::size_t max_iterations = 2000;
};

struct StepStats {
  double loss = 0.0;
  double baseline = 0.0;
  double mean_reward = 0.0;
  double max_reward = 0.0;
  std::size_t kept = 0;
};

// Empirical (1-epsilon) reward quantile R_eps; samples at or above it are the
// top-quantile batch and R_eps is the baseline. epsilon = 1 keeps the whole
// batch with the minimum reward as baseline.
inline double risk_baseline(std::vector<double> rewards, double epsilon) {
  if (rewards.empty()) throw ContractViolation("risk_baseline: empty batch");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("risk quantile must be in (0, 1]");
  std::sort(rewards.begin(), rewards.end());
  const double pos = (1.0 - epsilon) * static_cast<double>(rewards.size() - 1);
  const std::size_t idx =
      std::min(rewards.size() - 1, static_cast<std::size_t>(std::ceil(pos)));
  return rewards[idx];
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
  StepStats stats;
};

// Surrogate loss whose gradient is the risk-seeking policy gradient:
//   L = -(1/N_kept) sum_kept (R - baseline) log p(tau)
//       - entropy_weight * (1/N_kept) sum_kept sum_steps gamma^step H(p_step)
// computed by replaying each kept sequence under the current parameters with
// the configured priors and constraints. The prior/constraint adjustments are
// constants with respect to the parameters, so the gradient flows only through
// the policy's own logits; masked tokens have probability exactly zero and
// contribute no gradient.
inline LossAndGrad policy_loss_and_grad(const RecurrentPolicy& policy,
                                        std::span<const Sequence> sequences,
                                        std::span<const double> rewards, const PriorSet& priors,
                                        const ConstraintSet& constraints, const Library& lib,
                                        const TrainerConfig& cfg) {
  if (sequences.empty() || sequences.size() != rewards.size()) {
    throw ContractViolation("policy_loss_and_grad: empty or mismatched batch");
  }
  LossAndGrad out;
  out.grad.assign(policy.parameters().size(), 0.0);

  const double baseline =
      risk_baseline(std::vector<double>(rewards.begin(), rewards.end()), cfg.risk_quantile);
  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < rewards.size(); ++b) {
    if (rewards[b] >= baseline) kept.push_back(b);
  }
  out.stats.baseline = baseline;
  out.stats.kept = kept.size();
  out.stats.max_reward = *std::max_element(rewards.begin(), rewards.end());
  for (double r : rewards) out.stats.mean_reward += r;
  out.stats.mean_reward /= static_cast<double>(rewards.size());

  const double inv_kept = 1.0 / static_cast<double>(kept.size());
  for (std::size_t b : kept) {
    const Sequence& seq = sequences[b];
    const double advantage = rewards[b] - baseline;
    TraversalState state(lib);
    RecurrentPolicy::State hidden = policy.initial_state();
    std::vector<RecurrentPolicy::StepCache> caches(seq.size());
    std::vector<std::vector<double>> dlogits(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto [parent, sibling] = observation(state);
      std::vector<double> logits = policy.step(hidden, parent, sibling, &caches[t]);
      const LogitAdjustment adj = priors.adjustment_for(state, lib);
      const Mask mask = constraints.mask_for(state, lib);
      for (std::size_t v = 0; v < lib.size(); ++v) {
        logits[v] += adj.values[v] + mask.values[v];
      }
      const std::vector<double> p = softmax(logits);
      const TokenId tok = seq[t];
      if (p[tok] <= 0.0) {
        throw ContractViolation("policy_loss_and_grad: sequence crosses a masked token");
      }
      const double h = entropy(p);
      const double ent_w =
          cfg.entropy_weight * std::pow(cfg.entropy_gamma, static_cast<double>(t));
      out.loss += -inv_kept * advantage * std::log(p[tok]) - ent_w * inv_kept * h;
      // d/dlogit_j of log p(tok) is (delta - p_j); of H is -p_j (log p_j + H).
      dlogits[t].assign(lib.size(), 0.0);
      for (std::size_t v = 0; v < lib.size(); ++v) {
        if (p[v] <= 0.0) continue;
        double g = -inv_kept * advantage * ((v == tok ? 1.0 : 0.0) - p[v]);
        g += ent_w * inv_kept * p[v] * (std::log(p[v]) + h);
        dlogits[t][v] = g;
      }
      state.append(tok);
    }
    policy.accumulate_grad(caches, dlogits, out.grad);
  }
  return out;
}

// Adaptive moment estimation with standard decay parameters.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::size_t size, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void apply(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
  double beta1_, beta2_, eps_;
};

// One policy-gradient update on a reward-scored batch. A zero learning rate
// reproduces random search: parameters are left untouched.
class Trainer {
 public:
  Trainer(const RecurrentPolicy& policy, TrainerConfig cfg)
      : cfg_(cfg), opt_(policy.parameters().size()) {}

  const TrainerConfig& config() const { return cfg_; }

  StepStats step(RecurrentPolicy& policy, std::span<const Sequence> sequences,
                 std::span<const double> rewards, const PriorSet& priors,
                 const ConstraintSet& constraints, const Library& lib) {
    if (cfg_.learning_rate == 0.0) {
      StepStats stats;
      stats.baseline = risk_baseline(std::vector<double>(rewards.begin(), rewards.end()),
                                     cfg_.risk_quantile);
      stats.max_reward = *std::max_element(rewards.begin(), rewards.end());
      for (double r : rewards) stats.mean_reward += r;
      stats.mean_reward /= static_cast<double>(rewards.size());
      return stats;
    }
    LossAndGrad lg =
        policy_loss_and_grad(policy, sequences, rewards, priors, constraints, lib, cfg_);
    opt_.apply(policy.parameters(), lg.grad, cfg_.learning_rate);
    lg.stats.loss = lg.loss;
    return lg.stats;
  }

 private:
  TrainerConfig cfg_;
  AdamOptimizer opt_;
};

}  // namespace symopt
