#include "symopt/sampler.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracle.hpp"

using namespace symopt;

namespace {

Sequence seq_of(const Library& lib, const std::vector<std::string>& symbols) {
  Sequence s;
  for (const auto& sym : symbols) s.push_back(lib.id_of(sym));
  return s;
}

ConstraintSet with_length(std::size_t min, std::size_t max) {
  ConstraintSet cs;
  cs.add(LengthConstraint{min, max});
  return cs;
}

}  // namespace

TEST_CASE("a single-completion library samples with probability one", "[sampler]") {
  const Library lib = standard_library({"x1"});
  oracle::UniformPolicy policy{lib.size()};
  ConstraintSet cs = with_length(1, 3);
  std::mt19937_64 rng(1);
  const SampleRecord rec = sample_sequence(policy, PriorSet{}, cs, lib, rng);
  REQUIRE(rec.sequence == seq_of(lib, {"x1"}));
  REQUIRE(rec.log_prob == 0.0);
  REQUIRE(rec.entropies == std::vector<double>{0.0});
  REQUIRE(sequence_log_prob(policy, PriorSet{}, cs, rec.sequence, lib) == 0.0);
}

TEST_CASE("uniform policy with max length 3 splits mass evenly", "[sampler]") {
  const Library lib = standard_library({"+", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  ConstraintSet cs = with_length(1, 3);
  const auto dist = enumerate_distribution(policy, PriorSet{}, cs, lib, 3);
  REQUIRE(dist.size() == 2);
  REQUIRE(dist.at(seq_of(lib, {"x1"})) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(dist.at(seq_of(lib, {"+", "x1", "x1"})) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("blacklisting a completion shifts its mass to the rest", "[sampler]") {
  const Library lib = standard_library({"+", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  ConstraintSet cs = with_length(1, 3);
  BlacklistConstraint bl;
  bl.trie->insert(seq_of(lib, {"x1"}));
  cs.add(bl);
  const auto dist = enumerate_distribution(policy, PriorSet{}, cs, lib, 3);
  REQUIRE(dist.size() == 1);
  REQUIRE(dist.at(seq_of(lib, {"+", "x1", "x1"})) == Catch::Approx(1.0).margin(1e-15));

  // The blacklisted sequence is unreachable: distinguished -inf.
  REQUIRE(sequence_log_prob(policy, PriorSet{}, cs, seq_of(lib, {"x1"}), lib) == kNegInf);
}

TEST_CASE("recorded log-likelihoods replay bit-for-bit", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  PriorSet priors;
  priors.add(SoftLengthPrior{5.0, 3.0});
  ConstraintSet cs = with_length(1, 9);
  for (int i = 0; i < 100; ++i) {
    std::mt19937_64 rng(substream(42, i));
    const SampleRecord rec = sample_sequence(policy, priors, cs, lib, rng);
    REQUIRE(sequence_log_prob(policy, priors, cs, rec.sequence, lib) == rec.log_prob);
    REQUIRE(rec.log_prob <= 0.0);
    // Per-step probabilities multiply back to exp(log_prob).
    double prod = 1.0;
    TraversalState st(lib);
    typename oracle::UniformPolicy::State h{};
    for (TokenId t : rec.sequence) {
      const auto p = symopt::detail::adjusted_distribution(policy, h, st, priors, cs, lib);
      prod *= p[t];
      st.append(t);
    }
    REQUIRE(prod == Catch::Approx(std::exp(rec.log_prob)).margin(1e-10));
  }
}

TEST_CASE("enumeration mass is conserved under length constraints", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  const auto dist = enumerate_distribution(policy, PriorSet{}, with_length(1, 7), lib, 7);
  double total = 0.0;
  for (const auto& [seq, p] : dist) total += p;
  REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("uniform policy gives equal probability within a shape class", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "cos", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  const auto dist = enumerate_distribution(policy, PriorSet{}, with_length(1, 7), lib, 7);
  // Shape class: the arity pattern of the traversal. Sequences sharing it see
  // identical masks at every step, so their probabilities match exactly.
  std::map<std::vector<int>, double> prob_by_shape;
  std::size_t classes_with_two = 0;
  for (const auto& [seq, p] : dist) {
    std::vector<int> shape;
    for (TokenId t : seq) shape.push_back(lib.arity(t));
    auto [it, fresh] = prob_by_shape.emplace(std::move(shape), p);
    if (!fresh) {
      REQUIRE(p == Catch::Approx(it->second).margin(1e-15));
      ++classes_with_two;
    }
  }
  REQUIRE(classes_with_two > 0);
}

TEST_CASE("token-specific prior reweights stepwise, per closed form", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  const std::vector<double> lambda{2.0, 0.5, 1.5};
  oracle::UniformPolicy policy{lib.size()};
  PriorSet priors;
  priors.add(TokenSpecificPrior{lambda});
  const std::size_t kMax = 4;
  const auto dist = enumerate_distribution(policy, priors, with_length(1, kMax), lib, kMax);

  // Independent stepwise recomputation: at each step the allowed tokens (by
  // the length rule) carry probability lambda_v / sum(allowed lambdas).
  std::map<Sequence, double> expected;
  Sequence cur;
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t n, std::size_t d,
                                                                  double prob) {
    if (n > 0 && d == 0) {
      expected[cur] += prob;
      return;
    }
    std::vector<TokenId> allowed;
    double z = 0.0;
    for (TokenId v = 0; v < lib.size(); ++v) {
      const std::size_t arity = static_cast<std::size_t>(lib.arity(v));
      if (n + d + arity > kMax) continue;
      allowed.push_back(v);
      z += lambda[v];
    }
    for (TokenId v : allowed) {
      cur.push_back(v);
      rec(n + 1, d - 1 + static_cast<std::size_t>(lib.arity(v)), prob * lambda[v] / z);
      cur.pop_back();
    }
  };
  rec(0, 1, 1.0);

  REQUIRE(dist.size() == expected.size());
  for (const auto& [seq, p] : dist) {
    REQUIRE(p == Catch::Approx(expected.at(seq)).margin(1e-12));
  }
}

TEST_CASE("empirical frequencies match enumerated probabilities", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  ConstraintSet cs = with_length(1, 5);
  const auto dist = enumerate_distribution(policy, PriorSet{}, cs, lib, 5);

  std::map<Sequence, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(substream(7, i));
    counts[sample_sequence(policy, PriorSet{}, cs, lib, rng).sequence] += 1;
  }
  for (const auto& [seq, p] : dist) {
    if (p < 0.01) continue;
    const double freq = static_cast<double>(counts[seq]) / n;
    const double se = std::sqrt(p * (1 - p) / n);
    REQUIRE(std::abs(freq - p) < 3 * se);
  }
}

TEST_CASE("sampled sequences always satisfy the active constraints", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "cos", "x1"});
  ConstraintSet cs = with_length(2, 8);
  cs.add(RelationalConstraint{{lib.id_of("sin"), lib.id_of("cos")},
                              {lib.id_of("sin"), lib.id_of("cos")},
                              Relationship::Descendant});
  cs.add(LexicographicConstraint{{lib.id_of("+")}});
  oracle::UniformPolicy policy{lib.size()};
  for (int i = 0; i < 2000; ++i) {
    std::mt19937_64 rng(substream(9, i));
    const SampleRecord rec = sample_sequence(policy, PriorSet{}, cs, lib, rng);
    REQUIRE(cs.validate_sequence(rec.sequence, lib));
  }
}

TEST_CASE("safety cap fails loudly or truncates on request", "[sampler]") {
  const Library lib = standard_library({"+", "x1"});
  // Force growth: terminals blocked until far beyond the cap.
  ConstraintSet cs;
  cs.add(LengthConstraint{64, std::nullopt});
  oracle::UniformPolicy policy{lib.size()};

  std::mt19937_64 rng(3);
  SampleOptions opts;
  opts.max_steps = 8;
  REQUIRE_THROWS_AS(sample_sequence(policy, PriorSet{}, cs, lib, rng, opts), Error);

  opts.truncate_on_overrun = true;
  const SampleRecord rec = sample_sequence(policy, PriorSet{}, cs, lib, rng, opts);
  REQUIRE(rec.truncated);
  REQUIRE(rec.sequence.size() == 8);
}

TEST_CASE("infeasible steps propagate from composition", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  ConstraintSet cs;
  TypeUnitConstraint nothing;
  nothing.allowed_by_position[0] = {};
  cs.add(nothing);
  oracle::UniformPolicy policy{lib.size()};
  std::mt19937_64 rng(3);
  REQUIRE_THROWS_AS(sample_sequence(policy, PriorSet{}, cs, lib, rng), InfeasibleStepError);
}

TEST_CASE("systematic exploration enumerates the space exactly once", "[sampler]") {
  const Library lib = standard_library({"+", "x1"});
  ConstraintSet cs = with_length(1, 3);
  BlacklistConstraint bl;
  bl.systematic = true;
  cs.add(bl);
  oracle::UniformPolicy policy{lib.size()};

  // Two sequences exist at max length 3; each sample is inserted after its
  // evaluation, so the third attempt dead-ends on the feasibility guard.
  std::set<Sequence> seen;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2; ++i) {
    const SampleRecord rec = sample_sequence(policy, PriorSet{}, cs, lib, rng);
    REQUIRE(seen.insert(rec.sequence).second);
    cs.systematic_trie()->insert(rec.sequence);
  }
  REQUIRE(seen.size() == 2);
  REQUIRE_THROWS_AS(sample_sequence(policy, PriorSet{}, cs, lib, rng), InfeasibleStepError);
}

TEST_CASE("batch sampling is reproducible from the master seed", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  ConstraintSet cs = with_length(1, 9);
  const auto a = sample_batch(policy, PriorSet{}, cs, lib, 64, 1234, 7);
  const auto b = sample_batch(policy, PriorSet{}, cs, lib, 64, 1234, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].sequence == b[i].sequence);
    REQUIRE(a[i].log_prob == b[i].log_prob);
  }
  const auto c = sample_batch(policy, PriorSet{}, cs, lib, 64, 1234, 8);
  bool all_same = true;
  for (std::size_t i = 0; i < a.size(); ++i) all_same &= (a[i].sequence == c[i].sequence);
  REQUIRE_FALSE(all_same);
}

TEST_CASE("enumeration refuses oversized spaces", "[sampler]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  oracle::UniformPolicy policy{lib.size()};
  REQUIRE_THROWS_AS(
      enumerate_distribution(policy, PriorSet{}, with_length(1, 12), lib, 12, 100), Error);
}
