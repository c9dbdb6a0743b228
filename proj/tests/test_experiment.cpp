#include "symopt/experiment.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>

#include "oracle.hpp"

using namespace symopt;

namespace {

json minimal_config() {
  return json{
      {"name", "unit"},
      {"benchmarks", {"Nguyen-1"}},
      {"method", "dsr"},
      {"constraints", json::array({{{"constraint", "length"}, {"min", 2}, {"max", 12}}})},
      {"trainer",
       {{"learning_rate", 5e-4}, {"batch_size", 16}, {"risk_quantile", 0.5},
        {"entropy_weight", 1e-3}}},
      {"policy", {{"hidden_width", 8}}},
      {"max_iterations", 3},
      {"seeds", {1}},
      {"output", ""},
  };
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("configs parse, validate, and reject bad values", "[experiment]") {
  const ExperimentConfig cfg = ExperimentConfig::from_json(minimal_config());
  REQUIRE(cfg.name == "unit");
  REQUIRE(cfg.method == Method::Dsr);
  REQUIRE(cfg.trainer.batch_size == 16);
  REQUIRE(cfg.trainer.max_iterations == 3);
  validate_config(cfg, BenchmarkRegistry::nguyen());

  // Unknown method.
  json bad = minimal_config();
  bad["method"] = "annealing";
  REQUIRE_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);

  // Risk quantile outside (0, 1].
  json bad2 = minimal_config();
  bad2["trainer"]["risk_quantile"] = 0.0;
  REQUIRE_THROWS_AS(validate_config(ExperimentConfig::from_json(bad2),
                                    BenchmarkRegistry::nguyen()),
                    ConfigError);

  // Lexicographical + subtree-length are mutually incompatible.
  json bad3 = minimal_config();
  bad3["constraints"].push_back({{"constraint", "lexicographical"}});
  bad3["constraints"].push_back({{"constraint", "subtree_length"}});
  REQUIRE_THROWS_AS(validate_config(ExperimentConfig::from_json(bad3),
                                    BenchmarkRegistry::nguyen()),
                    ConfigError);

  // Unknown benchmark.
  json bad4 = minimal_config();
  bad4["benchmarks"] = {"Nguyen-99"};
  REQUIRE_THROWS_AS(validate_config(ExperimentConfig::from_json(bad4),
                                    BenchmarkRegistry::nguyen()),
                    ConfigError);

  // Over-constrained at the empty prefix: infeasible, not merely invalid.
  json bad5 = minimal_config();
  bad5["constraints"].push_back(
      {{"constraint", "type_unit"}, {"positions", {{"0", json::array()}}}});
  REQUIRE_THROWS_AS(validate_config(ExperimentConfig::from_json(bad5),
                                    BenchmarkRegistry::nguyen()),
                    InfeasibleStepError);
}

TEST_CASE("random search forces a zero learning rate", "[experiment]") {
  json j = minimal_config();
  j["method"] = "random_search";
  j["trainer"]["learning_rate"] = 0.123;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.method == Method::RandomSearch);
  REQUIRE(cfg.trainer.learning_rate == 0.0);
}

TEST_CASE("overrides rewrite dotted config paths", "[experiment]") {
  json j = minimal_config();
  apply_override(j, "trainer.learning_rate=0.25");
  apply_override(j, "name=tuned");
  apply_override(j, "seeds=[3,4]");
  REQUIRE(j["trainer"]["learning_rate"] == 0.25);
  REQUIRE(j["name"] == "tuned");
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  REQUIRE_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("config hashes track semantic changes only", "[experiment]") {
  const ExperimentConfig a = ExperimentConfig::from_json(minimal_config());
  json j = minimal_config();
  j["output"] = "elsewhere.jsonl";
  const ExperimentConfig b = ExperimentConfig::from_json(j);
  REQUIRE(a.hash() == b.hash());
  json j2 = minimal_config();
  j2["trainer"]["learning_rate"] = 1e-3;
  REQUIRE(a.hash() != ExperimentConfig::from_json(j2).hash());
}

TEST_CASE("a one-sequence search space is solved at step one", "[experiment]") {
  BenchmarkRegistry reg;
  Benchmark identity;
  identity.name = "identity";
  identity.expression = "x1";
  identity.variables = 1;
  identity.lo = {-1};
  identity.hi = {1};
  identity.points = 10;
  identity.library_form = "x1";
  reg.add(identity);

  json j = minimal_config();
  j["benchmarks"] = {"identity"};
  j["library"] = {"x1"};
  j["method"] = "random_search";
  j["constraints"] = json::array({{{"constraint", "length"}, {"min", 1}, {"max", 3}}});
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);

  const std::vector<RunRecord> records = run_experiment(cfg, reg);
  REQUIRE(records.size() == 1);
  REQUIRE(records[0].solved);
  REQUIRE(records[0].steps_to_solve == 1);
  REQUIRE(records[0].best_reward == 1.0);
  REQUIRE(records[0].best_expression == "x1");
  REQUIRE(records[0].structural_match == std::optional<bool>{true});
}

TEST_CASE("identical configs and seeds reproduce identical records", "[experiment]") {
  json j = minimal_config();
  j["max_iterations"] = 4;
  j["seeds"] = {11};
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const BenchmarkRegistry reg = BenchmarkRegistry::nguyen();

  const RunRecord a = run_experiment(cfg, reg)[0];
  const RunRecord b = run_experiment(cfg, reg)[0];
  REQUIRE(a.solved == b.solved);
  REQUIRE(a.steps_to_solve == b.steps_to_solve);
  REQUIRE(a.best_reward == b.best_reward);
  REQUIRE(a.best_reward_trace == b.best_reward_trace);
  REQUIRE(a.best_expression == b.best_expression);
}

TEST_CASE("persisted best expressions satisfy the active constraints", "[experiment]") {
  json j = minimal_config();
  j["constraints"] = json::array(
      {{{"constraint", "length"}, {"min", 2}, {"max", 10}},
       {{"constraint", "relational"}, {"targets_tag", "trig"}, {"effectors_tag", "trig"},
        {"relationship", "descendant"}}});
  j["max_iterations"] = 3;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const BenchmarkRegistry reg = BenchmarkRegistry::nguyen();
  const RunRecord rec = run_experiment(cfg, reg)[0];

  const Benchmark& bench = reg.get("Nguyen-1");
  const Library lib = library_for_benchmark(cfg.library, bench.variables);
  const ConstraintSet cs = constraints_from_json(cfg.constraints, lib);
  std::istringstream ss(rec.best_expression);
  Sequence best;
  std::string sym;
  while (ss >> sym) best.push_back(lib.id_of(sym));
  REQUIRE(cs.validate_sequence(best, lib));
}

TEST_CASE("records persist as json lines and aggregate per experiment", "[experiment]") {
  TempFile tmp("experiment_unit_results.jsonl");
  std::remove(tmp.path.c_str());
  json j = minimal_config();
  j["output"] = tmp.path;
  j["seeds"] = {1, 2};
  j["max_iterations"] = 2;
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const std::vector<RunRecord> records = run_experiment(cfg, BenchmarkRegistry::nguyen());
  REQUIRE(records.size() == 2);

  const std::vector<RunRecord> loaded = read_records(tmp.path);
  REQUIRE(loaded.size() == 2);
  double wall_total = 0.0;
  for (const auto& r : loaded) {
    REQUIRE(r.config_hash == cfg.hash());
    REQUIRE(r.benchmark == "Nguyen-1");
    wall_total += r.wall_time_s;
  }
  REQUIRE(wall_total >= 0.0);

  const auto summary = aggregate(loaded);
  REQUIRE(summary.size() == 1);
  REQUIRE(summary[0].runs == 2);
}

TEST_CASE("aggregation arithmetic matches hand-computed tables", "[experiment]") {
  auto rec = [](std::string name, bool solved, std::size_t steps) {
    RunRecord r;
    r.config_hash = "h-" + name;
    r.name = name;
    r.benchmark = "b";
    r.solved = solved;
    r.steps_to_solve = steps;
    return r;
  };

  // All solved at step 1: recovery 100%, mean steps 1.
  const auto all = aggregate({rec("a", true, 1), rec("a", true, 1)});
  REQUIRE(all[0].recovery_rate == 1.0);
  REQUIRE(all[0].mean_steps == 1.0);

  // Half solved at 10, half unsolved at the cap 100: 50%, 55.0.
  const auto half = aggregate({rec("b", true, 10), rec("b", false, 100)});
  REQUIRE(half[0].recovery_rate == 0.5);
  REQUIRE(half[0].mean_steps == 55.0);

  // Mixed-grid aggregation matches an independent recomputation.
  std::vector<RunRecord> mixed;
  std::mt19937_64 rng(77);
  for (int i = 0; i < 40; ++i) {
    const bool solved = rng() % 3 == 0;
    mixed.push_back(rec(i % 2 ? "odd" : "even", solved,
                        solved ? 1 + rng() % 50 : 200));
  }
  const auto rows = aggregate(mixed);
  for (const auto& row : rows) {
    double solved_count = 0, steps = 0, runs = 0;
    for (const auto& r : mixed) {
      if (r.name != row.name) continue;
      runs += 1;
      solved_count += r.solved;
      steps += static_cast<double>(r.steps_to_solve);
    }
    REQUIRE(row.runs == static_cast<std::size_t>(runs));
    REQUIRE(row.recovery_rate == Catch::Approx(solved_count / runs).margin(1e-15));
    REQUIRE(row.mean_steps == Catch::Approx(steps / runs).margin(1e-12));
  }
  REQUIRE_FALSE(format_summary(rows).empty());
}

TEST_CASE("pure priors never change the reachable set", "[experiment]") {
  const Library lib = standard_library({"+", "sin", "x1"});
  ConstraintSet cs;
  cs.add(LengthConstraint{1, 6});
  PriorSet priors;
  priors.add(SoftLengthPrior{4.0, 2.0});
  priors.add(TokenSpecificPrior{{3.0, 0.2, 1.0}});

  oracle::UniformPolicy policy{lib.size()};
  const auto without = enumerate_distribution(policy, PriorSet{}, cs, lib, 6);
  const auto with = enumerate_distribution(policy, priors, cs, lib, 6);
  REQUIRE(without.size() == with.size());
  for (const auto& [seq, p] : without) {
    REQUIRE(with.count(seq) == 1);
    REQUIRE(with.at(seq) > 0.0);
  }
}

TEST_CASE("libraries align their variables with the benchmark", "[experiment]") {
  const json spec = json::array({"+", "sin", "x1", "x2"});
  const Library one = library_for_benchmark(spec, 1);
  REQUIRE(one.has("x1"));
  REQUIRE_FALSE(one.has("x2"));
  const Library two = library_for_benchmark(json::array({"+", "sin", "x1"}), 2);
  REQUIRE(two.has("x2"));
}
