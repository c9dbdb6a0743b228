#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/library.hpp"

namespace symopt {

// Everything known about the next position of a partial traversal: its parent,
// which child slot it fills, the root and length of the preceding sibling
// subtree, and the open ancestor chain.
struct PositionContext {
  std::optional<TokenId> parent;
  std::optional<std::size_t> child_index;  // 0-based among the parent's children
  std::optional<TokenId> left_sibling_root;
  std::optional<std::size_t> left_sibling_subtree_length;
  std::vector<TokenId> ancestors;  // root first
  std::size_t depth = 0;
};

// State of a partial pre-order traversal of an expression tree. A value type:
// copy freely; distinct batch elements evolve independently.
class TraversalState {
 public:
  struct Frame {
    TokenId token;
    std::size_t children_filled = 0;
    std::size_t start_position = 0;
    std::vector<std::size_t> completed_child_subtree_lengths;
  };

  explicit TraversalState(const Library& lib)
      : lib_(&lib), counts_(lib.size(), 0), dangling_(1) {}

  const Sequence& sequence() const { return seq_; }
  std::size_t length() const { return seq_.size(); }
  std::size_t dangling() const { return dangling_; }
  bool complete() const { return !seq_.empty() && dangling_ == 0; }
  std::size_t count(TokenId v) const { return counts_[v]; }
  const std::vector<Frame>& open_stack() const { return frames_; }
  const Library& library() const { return *lib_; }

  std::optional<TokenId> last_token() const {
    if (seq_.empty()) return std::nullopt;
    return seq_.back();
  }

  // Appends the next token of the pre-order traversal. Throws on a complete
  // state. Dangling-node count follows d = 1 + sum(arity - 1) over the prefix.
  void append(TokenId token) {
    if (complete()) throw ContractViolation("append on a complete traversal");
    const int arity = lib_->arity(token);
    const std::size_t pos = seq_.size();
    seq_.push_back(token);
    ++counts_[token];
    dangling_ += static_cast<std::size_t>(arity);
    --dangling_;
    if (arity > 0) {
      frames_.push_back(Frame{token, 0, pos, {}});
      return;
    }
    // A terminal closes a subtree of length 1; propagate completions upward.
    std::size_t closed_len = 1;
    while (!frames_.empty()) {
      Frame& top = frames_.back();
      top.completed_child_subtree_lengths.push_back(closed_len);
      ++top.children_filled;
      if (top.children_filled < static_cast<std::size_t>(lib_->arity(top.token))) break;
      closed_len = seq_.size() - top.start_position;
      frames_.pop_back();
    }
  }

  // Facts about the next position. Throws on a complete state.
  PositionContext context() const {
    if (complete()) throw ContractViolation("context on a complete traversal");
    PositionContext ctx;
    ctx.depth = frames_.size();
    ctx.ancestors.reserve(frames_.size());
    for (const Frame& f : frames_) ctx.ancestors.push_back(f.token);
    if (frames_.empty()) return ctx;  // root position
    const Frame& top = frames_.back();
    ctx.parent = top.token;
    ctx.child_index = top.children_filled;
    if (top.children_filled >= 1) {
      // Child k starts right after child k-1's subtree; walk the lengths.
      std::size_t start = top.start_position + 1;
      for (std::size_t k = 0; k + 1 < top.children_filled; ++k) {
        start += top.completed_child_subtree_lengths[k];
      }
      ctx.left_sibling_root = seq_[start];
      ctx.left_sibling_subtree_length = top.completed_child_subtree_lengths.back();
    }
    return ctx;
  }

 private:
  const Library* lib_;
  Sequence seq_;
  std::vector<Frame> frames_;
  std::vector<std::size_t> counts_;
  std::size_t dangling_;
};

// Replays a complete (or partial) sequence into a traversal state.
inline TraversalState replay(const Sequence& seq, const Library& lib) {
  TraversalState state(lib);
  for (TokenId t : seq) state.append(t);
  return state;
}

inline bool is_complete_sequence(const Sequence& seq, const Library& lib) {
  if (seq.empty()) return false;
  long long dangling = 1;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (dangling == 0) return false;  // tokens after completion
    dangling += lib.arity(seq[i]) - 1;
  }
  return dangling == 0;
}

// Length of the subtree rooted at `pos` within a pre-order sequence.
inline std::size_t subtree_length(const Sequence& seq, std::size_t pos, const Library& lib) {
  std::size_t end = pos;
  long long need = 1;
  while (need > 0) {
    if (end >= seq.size()) throw ContractViolation("subtree extends past end of sequence");
    need += lib.arity(seq[end]) - 1;
    ++end;
  }
  return end - pos;
}

// Start positions of the children of the node at `pos`.
inline std::vector<std::size_t> child_positions(const Sequence& seq, std::size_t pos,
                                                const Library& lib) {
  std::vector<std::size_t> out;
  std::size_t cursor = pos + 1;
  for (int c = 0; c < lib.arity(seq[pos]); ++c) {
    out.push_back(cursor);
    cursor += subtree_length(seq, cursor, lib);
  }
  return out;
}

// Canonical representative of a complete traversal: children of commutative
// operators are sorted by (lex rank of root, then whole-subtree rank order).
// Two sequences denote the same object up to commutativity iff their canonical
// forms are equal.
inline Sequence canonicalize(const Sequence& seq, const Library& lib,
                             const std::set<TokenId>& commutative_ops) {
  struct Impl {
    const Sequence& seq;
    const Library& lib;
    const std::set<TokenId>& ops;
    Sequence run(std::size_t pos) const {
      const TokenId tok = seq[pos];
      std::vector<Sequence> children;
      for (std::size_t c : child_positions(seq, pos, lib)) children.push_back(run(c));
      if (ops.count(tok)) {
        std::stable_sort(children.begin(), children.end(),
                         [&](const Sequence& a, const Sequence& b) {
                           const std::size_t n = std::min(a.size(), b.size());
                           for (std::size_t i = 0; i < n; ++i) {
                             const int ra = lib.lex_rank(a[i]);
                             const int rb = lib.lex_rank(b[i]);
                             if (ra != rb) return ra < rb;
                           }
                           return a.size() < b.size();
                         });
      }
      Sequence out{tok};
      for (const auto& c : children) out.insert(out.end(), c.begin(), c.end());
      return out;
    }
  };
  if (!is_complete_sequence(seq, lib)) {
    throw ContractViolation("canonicalize requires a complete traversal");
  }
  return Impl{seq, lib, commutative_ops}.run(0);
}

}  // namespace symopt
