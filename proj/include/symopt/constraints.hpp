#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/logits.hpp"
#include "symopt/traversal.hpp"
#include "symopt/units.hpp"

namespace symopt {

// ---------------------------------------------------------------------------
// Blacklist storage
// ---------------------------------------------------------------------------

// Trie over token sequences. Stores complete blacklisted traversals; in
// systematic-exploration mode it accumulates every sequence sampled so far.
class SequenceTrie {
 public:
  void insert(std::span<const TokenId> seq) {
    std::size_t node = 0;
    for (TokenId t : seq) {
      auto it = nodes_[node].next.find(t);
      if (it == nodes_[node].next.end()) {
        nodes_.push_back(Node{});
        it = nodes_[node].next.emplace(t, nodes_.size() - 1).first;
      }
      node = it->second;
    }
    if (!nodes_[node].terminal) {
      nodes_[node].terminal = true;
      ++count_;
    }
  }

  bool contains(std::span<const TokenId> seq) const {
    auto node = walk(seq);
    return node && nodes_[*node].terminal;
  }

  // Index of the node reached by following `seq`, if the path exists.
  std::optional<std::size_t> walk(std::span<const TokenId> seq) const {
    std::size_t node = 0;
    for (TokenId t : seq) {
      auto it = nodes_[node].next.find(t);
      if (it == nodes_[node].next.end()) return std::nullopt;
      node = it->second;
    }
    return node;
  }

  bool child_is_terminal(std::size_t node, TokenId t) const {
    auto it = nodes_[node].next.find(t);
    return it != nodes_[node].next.end() && nodes_[it->second].terminal;
  }

  std::size_t size() const { return count_; }

 private:
  struct Node {
    std::map<TokenId, std::size_t> next;
    bool terminal = false;
  };
  std::vector<Node> nodes_{Node{}};
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Constraint configurations
// ---------------------------------------------------------------------------

struct LengthConstraint {
  std::size_t min = 1;
  std::optional<std::size_t> max;
};

struct RepeatConstraint {
  std::set<TokenId> targets;
  std::size_t min = 0;
  std::size_t max = std::numeric_limits<std::size_t>::max();
};

enum class Relationship { Descendant, Child, Sibling };

struct RelationalConstraint {
  std::set<TokenId> targets;
  std::set<TokenId> effectors;
  Relationship relationship = Relationship::Descendant;
};

struct BlacklistConstraint {
  std::shared_ptr<SequenceTrie> trie = std::make_shared<SequenceTrie>();
  bool systematic = false;  // grow the trie with every evaluated sample
};

struct ValencyConstraint {
  std::map<TokenId, std::size_t> valency;  // tokens absent from the map have valency 0
};

struct LexicographicConstraint {
  std::set<TokenId> commutative_ops;
};

struct SubtreeLengthConstraint {
  std::set<TokenId> commutative_ops;
};

struct TypeUnitConstraint {
  // Positional mode: allowed token sets per absolute position (missing
  // positions allow everything). Unit mode: required unit of the root.
  std::map<std::size_t, std::set<TokenId>> allowed_by_position;
  std::optional<UnitSignature> required_output;
};

using Constraint =
    std::variant<LengthConstraint, RepeatConstraint, RelationalConstraint, BlacklistConstraint,
                 ValencyConstraint, LexicographicConstraint, SubtreeLengthConstraint,
                 TypeUnitConstraint>;

inline std::string constraint_kind(const Constraint& c) {
  struct V {
    std::string operator()(const LengthConstraint&) const { return "length"; }
    std::string operator()(const RepeatConstraint&) const { return "repeat"; }
    std::string operator()(const RelationalConstraint&) const { return "relational"; }
    std::string operator()(const BlacklistConstraint&) const { return "blacklist"; }
    std::string operator()(const ValencyConstraint&) const { return "valency"; }
    std::string operator()(const LexicographicConstraint&) const { return "lexicographical"; }
    std::string operator()(const SubtreeLengthConstraint&) const { return "subtree_length"; }
    std::string operator()(const TypeUnitConstraint&) const { return "type_unit"; }
  };
  return std::visit(V{}, c);
}

// ---------------------------------------------------------------------------
// Per-class masks
// ---------------------------------------------------------------------------

// Min/max length. A token is constrained when its arity makes completion
// within [max] impossible: with n tokens placed and d dangling nodes, picking
// arity a leaves a minimum final length of n + d + a. Terminals are
// constrained when they would complete the sequence before [min].
inline Mask length_mask(const TraversalState& state, std::size_t min,
                        std::optional<std::size_t> max, const Library& lib) {
  Mask m = Mask::none(lib.size());
  const std::size_t n = state.length();
  const std::size_t d = state.dangling();
  if (max) {
    for (TokenId v = 0; v < lib.size(); ++v) {
      if (n + d + static_cast<std::size_t>(lib.arity(v)) > *max) m.block(v);
    }
  }
  if (d == 1 && n + 1 < min) {
    for (TokenId v : lib.arity_class(0)) m.block(v);
  }
  return m;
}

// Each target token v must appear between [min] and [max] times. The final
// mask is the union of the per-target sets: v is constrained once N_v = [max];
// when one dangling node remains and some target still needs occurrences,
// terminals that cannot supply them are constrained.
inline Mask repeat_mask(const TraversalState& state, const RepeatConstraint& cfg,
                        const Library& lib) {
  Mask m = Mask::none(lib.size());
  const std::size_t d = state.dangling();
  for (TokenId v : cfg.targets) {
    const std::size_t count = state.count(v);
    if (count >= cfg.max) m.block(v);
    if (d == 1 && cfg.min > count) {
      const std::size_t need = cfg.min - count;
      for (TokenId u : lib.arity_class(0)) {
        if (u != v) m.block(u);
      }
      if (need > 1) m.block(v);
    }
  }
  return m;
}

// [Targets] cannot be the [relationship] of [effectors]. Descendant checks the
// open ancestor chain, child the parent, sibling the preceding sibling root.
inline Mask relational_mask(const TraversalState& state, const RelationalConstraint& cfg,
                            const Library& lib) {
  Mask m = Mask::none(lib.size());
  const PositionContext ctx = state.context();
  bool related = false;
  switch (cfg.relationship) {
    case Relationship::Descendant:
      for (TokenId a : ctx.ancestors) related |= cfg.effectors.count(a) > 0;
      break;
    case Relationship::Child:
      related = ctx.parent && cfg.effectors.count(*ctx.parent) > 0;
      break;
    case Relationship::Sibling:
      related = ctx.left_sibling_root && cfg.effectors.count(*ctx.left_sibling_root) > 0;
      break;
  }
  if (related) {
    for (TokenId t : cfg.targets) m.block(t);
  }
  return m;
}

// v is constrained iff prefix || v is a complete blacklisted sequence.
inline Mask blacklist_mask(const TraversalState& state, const SequenceTrie& trie,
                           const Library& lib) {
  Mask m = Mask::none(lib.size());
  auto node = trie.walk(state.sequence());
  if (!node) return m;
  for (TokenId v = 0; v < lib.size(); ++v) {
    if (trie.child_is_terminal(*node, v)) m.block(v);
  }
  return m;
}

// Valency reduces to the length constraint: with d dangling nodes and the last
// token demanding valency n, apply [min] = d + n.
inline Mask valency_mask(const TraversalState& state, std::size_t valency_of_last,
                         const Library& lib) {
  return length_mask(state, state.dangling() + valency_of_last, std::nullopt, lib);
}

inline Mask valency_mask(const TraversalState& state, const ValencyConstraint& cfg,
                         const Library& lib) {
  std::size_t n = 0;
  if (auto last = state.last_token()) {
    auto it = cfg.valency.find(*last);
    if (it != cfg.valency.end()) n = it->second;
  }
  return valency_mask(state, n, lib);
}

// Children of commutative operators must be lexicographically sorted: at the
// k>=2-th child slot, tokens ranked below the preceding sibling's root are
// constrained.
inline Mask lexicographical_mask(const TraversalState& state, const LexicographicConstraint& cfg,
                                 const Library& lib) {
  Mask m = Mask::none(lib.size());
  const PositionContext ctx = state.context();
  if (!ctx.parent || !cfg.commutative_ops.count(*ctx.parent)) return m;
  if (!ctx.left_sibling_root) return m;
  const int bound = lib.lex_rank(*ctx.left_sibling_root);
  for (TokenId v = 0; v < lib.size(); ++v) {
    if (lib.lex_rank(v) < bound) m.block(v);
  }
  return m;
}

// Subtrees of commutative operators must be sorted by length: while sampling
// the k>=2-th child subtree, its final length may not exceed the preceding
// sibling subtree's length. Enforced as a scoped max-length reduction for
// every enclosing commutative node with at least one completed child.
inline Mask subtree_length_mask(const TraversalState& state, const SubtreeLengthConstraint& cfg,
                                const Library& lib) {
  Mask m = Mask::none(lib.size());
  const auto& frames = state.open_stack();
  if (frames.empty()) return m;
  const std::size_t top = frames.size() - 1;

  // Unfilled child slots per open frame; for non-top frames one slot is
  // occupied by the chain to the frame above.
  std::vector<std::size_t> unfilled(frames.size());
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const auto& f = frames[p];
    unfilled[p] = static_cast<std::size_t>(lib.arity(f.token)) - f.children_filled -
                  (p < top ? 1 : 0);
  }
  std::vector<std::size_t> suffix(frames.size() + 1, 0);
  for (std::size_t p = frames.size(); p-- > 0;) suffix[p] = suffix[p + 1] + unfilled[p];

  for (std::size_t q = 0; q < frames.size(); ++q) {
    const auto& f = frames[q];
    if (!cfg.commutative_ops.count(f.token) || f.children_filled == 0) continue;
    const std::size_t budget = f.completed_child_subtree_lengths.back();
    std::size_t n_sub = 0, d_sub = 1;
    if (q != top) {
      n_sub = state.length() - frames[q + 1].start_position;
      d_sub = suffix[q + 1];
    }
    for (TokenId v = 0; v < lib.size(); ++v) {
      if (n_sub + d_sub + static_cast<std::size_t>(lib.arity(v)) > budget) m.block(v);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Type & unit propagation
// ---------------------------------------------------------------------------

enum class UnitKind { Known, Unknown, Contradiction };

struct UnitEval {
  UnitKind kind = UnitKind::Unknown;
  UnitSignature sig;

  static UnitEval known(UnitSignature s) { return {UnitKind::Known, std::move(s)}; }
  static UnitEval unknown() { return {UnitKind::Unknown, {}}; }
  static UnitEval contradiction() { return {UnitKind::Contradiction, {}}; }
  bool is_known() const { return kind == UnitKind::Known; }
};

// Bottom-up unit of the subtree rooted at `pos`.
inline UnitEval subtree_unit(const Sequence& seq, std::size_t pos, const Library& lib) {
  const Token& tok = lib.token(seq[pos]);
  std::vector<UnitEval> kids;
  for (std::size_t c : child_positions(seq, pos, lib)) kids.push_back(subtree_unit(seq, c, lib));
  for (const auto& k : kids) {
    if (k.kind == UnitKind::Contradiction) return UnitEval::contradiction();
  }
  switch (tok.unit_rule) {
    case UnitRule::FixedOutput:
      return UnitEval::known(tok.output_unit);
    case UnitRule::DimensionlessInOut:
      for (const auto& k : kids) {
        if (k.is_known() && !k.sig.is_dimensionless()) return UnitEval::contradiction();
      }
      return UnitEval::known(UnitSignature::dimensionless());
    case UnitRule::UnitPreserving: {
      const UnitEval* known = nullptr;
      for (const auto& k : kids) {
        if (!k.is_known()) continue;
        if (known && !(known->sig == k.sig)) return UnitEval::contradiction();
        known = &k;
      }
      return known ? *known : UnitEval::unknown();
    }
    case UnitRule::Multiplicative:
      if (kids.size() == 2 && kids[0].is_known() && kids[1].is_known()) {
        return UnitEval::known(kids[0].sig * kids[1].sig);
      }
      return UnitEval::unknown();
    case UnitRule::Divisive:
      if (kids.size() == 2 && kids[0].is_known() && kids[1].is_known()) {
        return UnitEval::known(kids[0].sig / kids[1].sig);
      }
      return UnitEval::unknown();
    case UnitRule::Power:
      if (kids.size() >= 2 && kids[1].is_known() && !kids[1].sig.is_dimensionless()) {
        return UnitEval::contradiction();
      }
      if (!kids.empty() && kids[0].is_known() && kids[0].sig.is_dimensionless()) {
        return UnitEval::known(UnitSignature::dimensionless());
      }
      return UnitEval::unknown();
  }
  return UnitEval::unknown();
}

// Required unit of the child at `child_index` under a parent with requirement
// `parent_req`, given the units of the already-completed preceding siblings.
// Three-valued: an Unknown requirement constrains nothing.
inline UnitEval child_unit_requirement(const Token& parent, const UnitEval& parent_req,
                                       std::size_t child_index,
                                       std::span<const UnitEval> prev_siblings) {
  switch (parent.unit_rule) {
    case UnitRule::UnitPreserving: {
      if (parent_req.is_known()) return parent_req;
      for (const auto& s : prev_siblings) {
        if (s.is_known()) return s;  // siblings must share one unit
      }
      return UnitEval::unknown();
    }
    case UnitRule::DimensionlessInOut:
      return UnitEval::known(UnitSignature::dimensionless());
    case UnitRule::Multiplicative:
      if (child_index == 1 && parent_req.is_known() && !prev_siblings.empty() &&
          prev_siblings[0].is_known()) {
        return UnitEval::known(parent_req.sig / prev_siblings[0].sig);
      }
      return UnitEval::unknown();
    case UnitRule::Divisive:
      if (child_index == 1 && parent_req.is_known() && !prev_siblings.empty() &&
          prev_siblings[0].is_known()) {
        return UnitEval::known(prev_siblings[0].sig / parent_req.sig);
      }
      return UnitEval::unknown();
    case UnitRule::Power:
      if (child_index >= 1) return UnitEval::known(UnitSignature::dimensionless());
      return UnitEval::unknown();
    case UnitRule::FixedOutput:
      return UnitEval::unknown();
  }
  return UnitEval::unknown();
}

// True when the token's output unit definitively cannot equal `required`.
inline bool unit_definitely_incompatible(const Token& tok, const UnitSignature& required) {
  switch (tok.unit_rule) {
    case UnitRule::FixedOutput:
      return !(tok.output_unit == required);
    case UnitRule::DimensionlessInOut:
      return !required.is_dimensionless();
    default:
      return false;  // output depends on children; cannot rule out yet
  }
}

// Required unit of the next sampling position, walking the open ancestor chain
// from the root requirement.
inline UnitEval required_unit_next(const TraversalState& state, const UnitSignature& root_required,
                                   const Library& lib) {
  UnitEval req = root_required.is_unknown() ? UnitEval::unknown() : UnitEval::known(root_required);
  const auto& frames = state.open_stack();
  for (std::size_t p = 0; p < frames.size(); ++p) {
    const auto& f = frames[p];
    std::vector<UnitEval> siblings;
    std::size_t start = f.start_position + 1;
    for (std::size_t k = 0; k < f.children_filled; ++k) {
      siblings.push_back(subtree_unit(state.sequence(), start, lib));
      start += f.completed_child_subtree_lengths[k];
    }
    req = child_unit_requirement(lib.token(f.token), req, f.children_filled, siblings);
  }
  return req;
}

inline Mask type_unit_mask(const TraversalState& state, const TypeUnitConstraint& cfg,
                           const Library& lib) {
  Mask m = Mask::none(lib.size());
  const std::size_t i = state.length();
  auto it = cfg.allowed_by_position.find(i);
  if (it != cfg.allowed_by_position.end()) {
    for (TokenId v = 0; v < lib.size(); ++v) {
      if (!it->second.count(v)) m.block(v);
    }
  }
  if (cfg.required_output) {
    const UnitEval req = required_unit_next(state, *cfg.required_output, lib);
    if (req.is_known()) {
      for (TokenId v = 0; v < lib.size(); ++v) {
        if (unit_definitely_incompatible(lib.token(v), req.sig)) m.block(v);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Post-hoc validation (finished trees)
// ---------------------------------------------------------------------------

namespace detail {

inline bool relational_ok(const Sequence& seq, std::size_t pos,
                          const RelationalConstraint& cfg, const Library& lib,
                          std::vector<TokenId>& ancestors) {
  const TokenId tok = seq[pos];
  if (cfg.targets.count(tok)) {
    switch (cfg.relationship) {
      case Relationship::Descendant:
        for (TokenId a : ancestors) {
          if (cfg.effectors.count(a)) return false;
        }
        break;
      case Relationship::Child:
        if (!ancestors.empty() && cfg.effectors.count(ancestors.back())) return false;
        break;
      case Relationship::Sibling:
        break;  // handled at the parent below
    }
  }
  const auto kids = child_positions(seq, pos, lib);
  if (cfg.relationship == Relationship::Sibling) {
    for (std::size_t k = 1; k < kids.size(); ++k) {
      if (cfg.targets.count(seq[kids[k]]) && cfg.effectors.count(seq[kids[k - 1]])) return false;
    }
  }
  ancestors.push_back(tok);
  for (std::size_t c : kids) {
    if (!relational_ok(seq, c, cfg, lib, ancestors)) return false;
  }
  ancestors.pop_back();
  return true;
}

inline bool units_ok(const Sequence& seq, std::size_t pos, const UnitEval& req,
                     const Library& lib) {
  const Token& tok = lib.token(seq[pos]);
  if (req.is_known() && unit_definitely_incompatible(tok, req.sig)) return false;
  const auto kids = child_positions(seq, pos, lib);
  std::vector<UnitEval> sibling_units;
  for (std::size_t k = 0; k < kids.size(); ++k) {
    const UnitEval child_req = child_unit_requirement(tok, req, k, sibling_units);
    if (!units_ok(seq, kids[k], child_req, lib)) return false;
    sibling_units.push_back(subtree_unit(seq, kids[k], lib));
  }
  return true;
}

}  // namespace detail

// True iff the complete sequence satisfies the constraint, evaluated on the
// finished tree. Valency is inherently positional and is checked by replaying
// its mask along the sequence.
inline bool satisfies(const Sequence& seq, const Constraint& constraint, const Library& lib) {
  if (!is_complete_sequence(seq, lib)) {
    throw ContractViolation("satisfies requires a complete traversal");
  }
  struct V {
    const Sequence& seq;
    const Library& lib;

    bool operator()(const LengthConstraint& c) const {
      if (seq.size() < c.min) return false;
      return !c.max || seq.size() <= *c.max;
    }
    bool operator()(const RepeatConstraint& c) const {
      for (TokenId v : c.targets) {
        std::size_t n = 0;
        for (TokenId t : seq) n += (t == v);
        if (n < c.min || n > c.max) return false;
      }
      return true;
    }
    bool operator()(const RelationalConstraint& c) const {
      std::vector<TokenId> ancestors;
      return detail::relational_ok(seq, 0, c, lib, ancestors);
    }
    bool operator()(const BlacklistConstraint& c) const { return !c.trie->contains(seq); }
    bool operator()(const ValencyConstraint& c) const {
      TraversalState state(lib);
      for (TokenId t : seq) {
        if (valency_mask(state, c, lib).blocked(t)) return false;
        state.append(t);
      }
      return true;
    }
    bool operator()(const LexicographicConstraint& c) const {
      for (std::size_t pos = 0; pos < seq.size(); ++pos) {
        if (!c.commutative_ops.count(seq[pos])) continue;
        const auto kids = child_positions(seq, pos, lib);
        for (std::size_t k = 1; k < kids.size(); ++k) {
          if (lib.lex_rank(seq[kids[k]]) < lib.lex_rank(seq[kids[k - 1]])) return false;
        }
      }
      return true;
    }
    bool operator()(const SubtreeLengthConstraint& c) const {
      for (std::size_t pos = 0; pos < seq.size(); ++pos) {
        if (!c.commutative_ops.count(seq[pos])) continue;
        const auto kids = child_positions(seq, pos, lib);
        for (std::size_t k = 1; k < kids.size(); ++k) {
          if (subtree_length(seq, kids[k], lib) > subtree_length(seq, kids[k - 1], lib)) {
            return false;
          }
        }
      }
      return true;
    }
    bool operator()(const TypeUnitConstraint& c) const {
      for (const auto& [i, allowed] : c.allowed_by_position) {
        if (i < seq.size() && !allowed.count(seq[i])) return false;
      }
      if (c.required_output) {
        const UnitEval root = c.required_output->is_unknown()
                                  ? UnitEval::unknown()
                                  : UnitEval::known(*c.required_output);
        if (!detail::units_ok(seq, 0, root, lib)) return false;
      }
      return true;
    }
  };
  return std::visit(V{seq, lib}, constraint);
}

inline Mask constraint_mask(const Constraint& constraint, const TraversalState& state,
                            const Library& lib) {
  struct V {
    const TraversalState& state;
    const Library& lib;
    Mask operator()(const LengthConstraint& c) const {
      return length_mask(state, c.min, c.max, lib);
    }
    Mask operator()(const RepeatConstraint& c) const { return repeat_mask(state, c, lib); }
    Mask operator()(const RelationalConstraint& c) const {
      return relational_mask(state, c, lib);
    }
    Mask operator()(const BlacklistConstraint& c) const {
      return blacklist_mask(state, *c.trie, lib);
    }
    Mask operator()(const ValencyConstraint& c) const { return valency_mask(state, c, lib); }
    Mask operator()(const LexicographicConstraint& c) const {
      return lexicographical_mask(state, c, lib);
    }
    Mask operator()(const SubtreeLengthConstraint& c) const {
      return subtree_length_mask(state, c, lib);
    }
    Mask operator()(const TypeUnitConstraint& c) const { return type_unit_mask(state, c, lib); }
  };
  return std::visit(V{state, lib}, constraint);
}

// ---------------------------------------------------------------------------
// Constraint sets
// ---------------------------------------------------------------------------

class ConstraintSet {
 public:
  ConstraintSet() = default;

  ConstraintSet& add(Constraint c, std::string name = {}) {
    if (name.empty()) name = constraint_kind(c);
    items_.push_back({std::move(name), std::move(c)});
    return *this;
  }

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

  // Rejects parameter errors and incompatible combinations (lexicographical
  // and subtree-length masks are never active together in a valid
  // configuration).
  void validate(const Library& lib) const {
    bool has_lex = false, has_subtree = false;
    for (const auto& item : items_) {
      if (std::holds_alternative<LexicographicConstraint>(item.constraint)) has_lex = true;
      if (std::holds_alternative<SubtreeLengthConstraint>(item.constraint)) has_subtree = true;
      if (const auto* c = std::get_if<LengthConstraint>(&item.constraint)) {
        if (c->min < 1) throw ConfigError("length: min must be >= 1");
        if (c->max && *c->max < c->min) throw ConfigError("length: min > max");
      }
      if (const auto* c = std::get_if<RepeatConstraint>(&item.constraint)) {
        if (c->targets.empty()) throw ConfigError("repeat: empty target set");
        if (c->min > c->max) throw ConfigError("repeat: min > max");
        for (TokenId v : c->targets) {
          if (v >= lib.size()) throw ConfigError("repeat: target outside library");
        }
      }
      if (const auto* c = std::get_if<RelationalConstraint>(&item.constraint)) {
        for (TokenId v : c->targets) {
          if (v >= lib.size()) throw ConfigError("relational: target outside library");
        }
        for (TokenId v : c->effectors) {
          if (v >= lib.size()) throw ConfigError("relational: effector outside library");
        }
      }
    }
    if (has_lex && has_subtree) {
      throw ConfigError(
          "lexicographical and subtree-length constraints are mutually incompatible");
    }
  }

  // Composed {0, -inf} mask for the next step. Throws InfeasibleStepError
  // naming the contributing constraints when the union covers the library.
  Mask mask_for(const TraversalState& state, const Library& lib) const {
    Mask out = Mask::none(lib.size());
    std::vector<std::string> contributing;
    for (const auto& item : items_) {
      Mask m = constraint_mask(item.constraint, state, lib);
      if (m.any_blocked()) contributing.push_back(item.name);
      for (std::size_t v = 0; v < lib.size(); ++v) out.values[v] += m.values[v];
    }
    bool any_allowed = false;
    for (double x : out.values) any_allowed |= (x == 0.0);
    if (!any_allowed && lib.size() > 0) {
      throw InfeasibleStepError(state.length(), contributing);
    }
    return out;
  }

  // Post-hoc check of a complete sequence against every constraint.
  bool validate_sequence(const Sequence& seq, const Library& lib) const {
    for (const auto& item : items_) {
      if (!satisfies(seq, item.constraint, lib)) return false;
    }
    return true;
  }

  // Trie of the systematic-exploration blacklist, if one is configured.
  SequenceTrie* systematic_trie() const {
    for (const auto& item : items_) {
      if (const auto* c = std::get_if<BlacklistConstraint>(&item.constraint)) {
        if (c->systematic) return c->trie.get();
      }
    }
    return nullptr;
  }

  // Largest max bound among length constraints, used to size safety caps.
  std::optional<std::size_t> length_cap() const {
    std::optional<std::size_t> cap;
    for (const auto& item : items_) {
      if (const auto* c = std::get_if<LengthConstraint>(&item.constraint)) {
        if (c->max && (!cap || *c->max > *cap)) cap = *c->max;
      }
    }
    return cap;
  }

  struct Item {
    std::string name;
    Constraint constraint;
  };
  const std::vector<Item>& items() const { return items_; }

 private:
  std::vector<Item> items_;
};

}  // namespace symopt
