#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "symopt/constraints.hpp"
#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/policy.hpp"
#include "symopt/priors.hpp"
#include "symopt/rng.hpp"
#include "symopt/sampler.hpp"
#include "symopt/sr_task.hpp"
#include "symopt/traversal.hpp"

#include "json.hpp"

namespace symopt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config-driven construction of libraries, priors, and constraints
// ---------------------------------------------------------------------------

inline UnitSignature unit_from_json(const json& j) {
  std::map<std::string, Rational> exps;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    if (v.is_array()) {
      exps[it.key()] = Rational(v.at(0).get<std::int64_t>(), v.at(1).get<std::int64_t>());
    } else {
      exps[it.key()] = Rational(v.get<std::int64_t>());
    }
  }
  return UnitSignature::of(std::move(exps));
}

inline UnitRule unit_rule_from_string(const std::string& s) {
  if (s == "fixed") return UnitRule::FixedOutput;
  if (s == "dimensionless_io") return UnitRule::DimensionlessInOut;
  if (s == "preserving") return UnitRule::UnitPreserving;
  if (s == "multiplicative") return UnitRule::Multiplicative;
  if (s == "divisive") return UnitRule::Divisive;
  if (s == "power") return UnitRule::Power;
  throw ConfigError("unknown unit rule: " + s);
}

// Library spec: an array of plain symbols (resolved against the standard
// descriptors) and/or full token objects.
inline std::vector<TokenSpec> token_specs_from_json(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw ConfigError("library: expected a non-empty array");
  std::vector<TokenSpec> specs;
  for (const json& item : arr) {
    if (item.is_string()) {
      auto spec = standard_token(item.get<std::string>());
      if (!spec) throw ConfigError("library: no standard descriptor for " + item.get<std::string>());
      specs.push_back(std::move(*spec));
      continue;
    }
    TokenSpec spec;
    spec.symbol = item.at("symbol").get<std::string>();
    spec.arity = item.at("arity").get<int>();
    if (item.contains("lex_rank")) spec.lex_rank = item.at("lex_rank").get<int>();
    if (item.contains("tags")) {
      for (const auto& t : item.at("tags")) spec.tags.insert(t.get<std::string>());
    }
    if (item.contains("unit_rule")) {
      spec.unit_rule = unit_rule_from_string(item.at("unit_rule").get<std::string>());
    }
    if (item.contains("unit")) spec.output_unit = unit_from_json(item.at("unit"));
    specs.push_back(std::move(spec));
  }
  return specs;
}

// Instantiates the configured library, then aligns its variable tokens with
// the benchmark: x<k> tokens beyond the benchmark's inputs are dropped and
// missing ones appended.
inline Library library_for_benchmark(const json& library_spec, std::size_t variables) {
  std::vector<TokenSpec> specs = token_specs_from_json(library_spec);
  std::vector<TokenSpec> kept;
  std::vector<bool> have(variables, false);
  for (auto& spec : specs) {
    if (spec.tags.count("variable") || (spec.symbol.size() >= 2 && spec.symbol[0] == 'x' &&
                                        std::isdigit(static_cast<unsigned char>(spec.symbol[1])))) {
      const int k = std::atoi(spec.symbol.c_str() + 1);
      if (k < 1 || static_cast<std::size_t>(k) > variables) continue;
      have[k - 1] = true;
    }
    kept.push_back(std::move(spec));
  }
  for (std::size_t k = 0; k < variables; ++k) {
    if (!have[k]) {
      auto spec = standard_token("x" + std::to_string(k + 1));
      kept.push_back(std::move(*spec));
    }
  }
  return Library::build(kept);
}

inline std::set<TokenId> resolve_tokens(const json& item, const std::string& list_key,
                                        const std::string& tag_key, const Library& lib) {
  std::set<TokenId> out;
  if (item.contains(list_key)) {
    for (const auto& s : item.at(list_key)) out.insert(lib.id_of(s.get<std::string>()));
  }
  if (item.contains(tag_key)) {
    for (TokenId v : lib.with_tag(item.at(tag_key).get<std::string>())) out.insert(v);
  }
  return out;
}

inline std::set<TokenId> commutative_ops_from_json(const json& item, const Library& lib) {
  std::set<TokenId> ops;
  if (item.contains("operators")) {
    for (const auto& s : item.at("operators")) ops.insert(lib.id_of(s.get<std::string>()));
  } else {
    for (TokenId v : lib.with_tag("commutative")) ops.insert(v);
  }
  return ops;
}

inline ConstraintSet constraints_from_json(const json& arr, const Library& lib) {
  ConstraintSet set;
  for (const json& item : arr) {
    const std::string kind = item.at("constraint").get<std::string>();
    const std::string name = item.value("name", kind);
    if (kind == "length") {
      LengthConstraint c;
      c.min = item.value("min", std::size_t{1});
      if (item.contains("max")) c.max = item.at("max").get<std::size_t>();
      set.add(c, name);
    } else if (kind == "repeat") {
      RepeatConstraint c;
      c.targets = resolve_tokens(item, "targets", "targets_tag", lib);
      c.min = item.value("min", std::size_t{0});
      if (item.contains("max")) c.max = item.at("max").get<std::size_t>();
      set.add(c, name);
    } else if (kind == "relational") {
      RelationalConstraint c;
      c.targets = resolve_tokens(item, "targets", "targets_tag", lib);
      c.effectors = resolve_tokens(item, "effectors", "effectors_tag", lib);
      const std::string rel = item.at("relationship").get<std::string>();
      if (rel == "descendant") c.relationship = Relationship::Descendant;
      else if (rel == "child") c.relationship = Relationship::Child;
      else if (rel == "sibling") c.relationship = Relationship::Sibling;
      else throw ConfigError("relational: unknown relationship " + rel);
      set.add(c, name);
    } else if (kind == "blacklist") {
      BlacklistConstraint c;
      if (item.contains("sequences")) {
        for (const auto& seq : item.at("sequences")) {
          Sequence s;
          for (const auto& sym : seq) s.push_back(lib.id_of(sym.get<std::string>()));
          c.trie->insert(s);
        }
      }
      c.systematic = item.value("systematic", false);
      set.add(c, name);
    } else if (kind == "valency") {
      ValencyConstraint c;
      for (auto it = item.at("valency").begin(); it != item.at("valency").end(); ++it) {
        c.valency[lib.id_of(it.key())] = it.value().get<std::size_t>();
      }
      set.add(c, name);
    } else if (kind == "lexicographical") {
      set.add(LexicographicConstraint{commutative_ops_from_json(item, lib)}, name);
    } else if (kind == "subtree_length") {
      set.add(SubtreeLengthConstraint{commutative_ops_from_json(item, lib)}, name);
    } else if (kind == "type_unit") {
      TypeUnitConstraint c;
      if (item.contains("output_unit")) c.required_output = unit_from_json(item.at("output_unit"));
      if (item.contains("positions")) {
        for (auto it = item.at("positions").begin(); it != item.at("positions").end(); ++it) {
          std::set<TokenId> allowed;
          for (const auto& s : it.value()) allowed.insert(lib.id_of(s.get<std::string>()));
          c.allowed_by_position[std::stoul(it.key())] = std::move(allowed);
        }
      }
      set.add(c, name);
    } else {
      throw ConfigError("unknown constraint kind: " + kind);
    }
  }
  set.validate(lib);
  return set;
}

inline std::vector<double> lambda_from_json(const json& table, const Library& lib) {
  std::vector<double> lambda(lib.size(), 1.0);
  for (auto it = table.begin(); it != table.end(); ++it) {
    lambda[lib.id_of(it.key())] = it.value().get<double>();
  }
  return lambda;
}

inline PriorSet priors_from_json(const json& arr, const Library& lib) {
  PriorSet set;
  for (const json& item : arr) {
    const std::string kind = item.at("prior").get<std::string>();
    if (kind == "token_specific") {
      set.add(TokenSpecificPrior{lambda_from_json(item.at("lambda"), lib)});
    } else if (kind == "positional") {
      PositionalPrior p;
      for (auto it = item.at("table").begin(); it != item.at("table").end(); ++it) {
        p.table[std::stoul(it.key())] = lambda_from_json(it.value(), lib);
      }
      set.add(std::move(p));
    } else if (kind == "soft_length") {
      SoftLengthPrior p;
      p.target_length = item.value("target_length", 10.0);
      p.sigma = item.value("sigma", 5.0);
      set.add(p);
    } else if (kind == "uniform_arity") {
      set.add(UniformArityPrior{});
    } else if (kind == "language_model") {
      LanguageModelPrior p;
      p.strength = item.value("strength", 1.0);
      auto model = std::make_shared<BigramModel>(
          BigramModel::fit_file(item.at("corpus").get<std::string>(), lib));
      p.source = [model](const TraversalState& s) { return model->logits_for(s); };
      set.add(std::move(p));
    } else {
      throw ConfigError("unknown prior kind: " + kind);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class Method { Dsr, RandomSearch };

struct PolicyConfig {
  int hidden_width = 32;
  RecurrentPolicy::Cell cell = RecurrentPolicy::Cell::Gru;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::string> benchmarks;
  Method method = Method::Dsr;
  json library = json::array({"+", "-", "*", "/", "sin", "cos", "exp", "log", "x1"});
  json priors = json::array();
  json constraints = json::array();
  TrainerConfig trainer;
  PolicyConfig policy;
  std::vector<std::uint64_t> seeds = {0};
  std::string output = "results.jsonl";
  std::string registry_path;  // empty: built-in Nguyen registry
  int workers = 0;            // 0: hardware concurrency

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.name = j.value("name", cfg.name);
    if (j.contains("benchmarks")) {
      cfg.benchmarks = j.at("benchmarks").get<std::vector<std::string>>();
    }
    if (j.contains("method")) {
      const std::string m = j.at("method").get<std::string>();
      if (m == "dsr") cfg.method = Method::Dsr;
      else if (m == "random_search") cfg.method = Method::RandomSearch;
      else throw ConfigError("unknown method: " + m);
    }
    if (j.contains("library")) cfg.library = j.at("library");
    if (j.contains("priors")) cfg.priors = j.at("priors");
    if (j.contains("constraints")) cfg.constraints = j.at("constraints");
    if (j.contains("trainer")) {
      const json& t = j.at("trainer");
      cfg.trainer.learning_rate = t.value("learning_rate", cfg.trainer.learning_rate);
      cfg.trainer.batch_size = t.value("batch_size", cfg.trainer.batch_size);
      cfg.trainer.risk_quantile = t.value("risk_quantile", cfg.trainer.risk_quantile);
      cfg.trainer.entropy_weight = t.value("entropy_weight", cfg.trainer.entropy_weight);
      cfg.trainer.entropy_gamma = t.value("entropy_gamma", cfg.trainer.entropy_gamma);
    }
    cfg.trainer.max_iterations = j.value("max_iterations", cfg.trainer.max_iterations);
    if (j.contains("policy")) {
      const json& p = j.at("policy");
      cfg.policy.hidden_width = p.value("hidden_width", cfg.policy.hidden_width);
      if (p.value("cell", "gru") == "tanh") cfg.policy.cell = RecurrentPolicy::Cell::Tanh;
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.output = j.value("output", cfg.output);
    cfg.registry_path = j.value("registry", cfg.registry_path);
    cfg.workers = j.value("workers", cfg.workers);
    // random search is defined as a zero learning rate
    if (cfg.method == Method::RandomSearch) cfg.trainer.learning_rate = 0.0;
    return cfg;
  }

  json to_json() const {
    json j;
    j["name"] = name;
    j["benchmarks"] = benchmarks;
    j["method"] = method == Method::Dsr ? "dsr" : "random_search";
    j["library"] = library;
    j["priors"] = priors;
    j["constraints"] = constraints;
    j["trainer"] = {{"learning_rate", trainer.learning_rate},
                    {"batch_size", trainer.batch_size},
                    {"risk_quantile", trainer.risk_quantile},
                    {"entropy_weight", trainer.entropy_weight},
                    {"entropy_gamma", trainer.entropy_gamma}};
    j["max_iterations"] = trainer.max_iterations;
    j["policy"] = {{"hidden_width", policy.hidden_width},
                   {"cell", policy.cell == RecurrentPolicy::Cell::Gru ? "gru" : "tanh"}};
    j["seeds"] = seeds;
    j["output"] = output;
    if (!registry_path.empty()) j["registry"] = registry_path;
    return j;
  }

  // Stable fingerprint of everything that affects results (output path and
  // worker count excluded).
  std::string hash() const {
    json j = to_json();
    j.erase("output");
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
    return out.str();
  }
};

// Sets `path.to.key=value` in a JSON config; values parse as JSON when
// possible and fall back to strings.
inline void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override has an empty key segment: " + path);
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline BenchmarkRegistry registry_for(const ExperimentConfig& cfg) {
  return cfg.registry_path.empty() ? BenchmarkRegistry::nguyen()
                                   : BenchmarkRegistry::load(cfg.registry_path);
}

// Full validation pass: trainer/policy parameters, benchmarks, and for every
// benchmark the instantiated library, priors, constraints, and empty-prefix
// feasibility. ConfigError means the file is invalid; InfeasibleStepError
// means the constraint combination admits no first token.
inline void validate_config(const ExperimentConfig& cfg, const BenchmarkRegistry& registry) {
  if (cfg.benchmarks.empty()) throw ConfigError("no benchmarks configured");
  if (cfg.seeds.empty()) throw ConfigError("no seeds configured");
  if (cfg.trainer.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.trainer.risk_quantile > 0.0 && cfg.trainer.risk_quantile <= 1.0)) {
    throw ConfigError("risk_quantile must be in (0, 1]");
  }
  if (!(cfg.trainer.entropy_gamma > 0.0 && cfg.trainer.entropy_gamma <= 1.0)) {
    throw ConfigError("entropy_gamma must be in (0, 1]");
  }
  if (cfg.trainer.learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (cfg.trainer.entropy_weight < 0.0) throw ConfigError("entropy_weight must be >= 0");
  if (cfg.trainer.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (cfg.policy.hidden_width < 1) throw ConfigError("hidden_width must be >= 1");
  for (const std::string& name : cfg.benchmarks) {
    const Benchmark& bench = registry.get(name);
    const Library lib = library_for_benchmark(cfg.library, bench.variables);
    priors_from_json(cfg.priors, lib);
    const ConstraintSet constraints = constraints_from_json(cfg.constraints, lib);
    constraints.mask_for(TraversalState(lib), lib);  // empty-prefix feasibility
  }
}

// ---------------------------------------------------------------------------
// Runs and persistence
// ---------------------------------------------------------------------------

struct RunRecord {
  std::string config_hash;
  std::string name;
  std::string benchmark;
  std::uint64_t seed = 0;
  bool solved = false;
  std::size_t steps_to_solve = 0;  // iteration of first recovery; cap if unsolved
  double best_reward = 0.0;
  std::vector<double> best_reward_trace;
  std::string best_expression;
  std::optional<bool> structural_match;
  double wall_time_s = 0.0;

  json to_json() const {
    json j;
    j["config"] = config_hash;
    j["name"] = name;
    j["benchmark"] = benchmark;
    j["seed"] = seed;
    j["solved"] = solved;
    j["steps_to_solve"] = steps_to_solve;
    j["best_reward"] = best_reward;
    j["best_reward_trace"] = best_reward_trace;
    j["best_expression"] = best_expression;
    if (structural_match) j["structural_match"] = *structural_match;
    j["wall_time_s"] = wall_time_s;
    return j;
  }

  static RunRecord from_json(const json& j) {
    RunRecord r;
    r.config_hash = j.value("config", "");
    r.name = j.value("name", "");
    r.benchmark = j.at("benchmark").get<std::string>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.solved = j.at("solved").get<bool>();
    r.steps_to_solve = j.at("steps_to_solve").get<std::size_t>();
    r.best_reward = j.value("best_reward", 0.0);
    if (j.contains("best_reward_trace")) {
      r.best_reward_trace = j.at("best_reward_trace").get<std::vector<double>>();
    }
    r.best_expression = j.value("best_expression", "");
    if (j.contains("structural_match")) r.structural_match = j.at("structural_match").get<bool>();
    r.wall_time_s = j.value("wall_time_s", 0.0);
    return r;
  }
};

// Sink for optional JSONL debug dumps of sampled batches.
class SampleDumper {
 public:
  explicit SampleDumper(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw ConfigError("cannot open sample dump: " + path);
  }

  void dump(const std::string& benchmark, std::uint64_t seed, std::size_t iteration,
            const std::vector<SampleRecord>& batch, const std::vector<double>& rewards,
            const Library& lib) {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      json j;
      j["benchmark"] = benchmark;
      j["seed"] = seed;
      j["iteration"] = iteration;
      j["sequence"] = lib.render(batch[i].sequence);
      j["log_prob"] = batch[i].log_prob;
      j["reward"] = rewards[i];
      out_ << j.dump() << "\n";
    }
  }

 private:
  std::ofstream out_;
  std::mutex mu_;
};

// One (benchmark, seed) run: loop {sample batch -> reward -> recovery check ->
// train step} until recovery or the iteration cap.
inline RunRecord run_single(const ExperimentConfig& cfg, const Benchmark& bench,
                            std::uint64_t seed, SampleDumper* dumper = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const Library lib = library_for_benchmark(cfg.library, bench.variables);
  const PriorSet priors = priors_from_json(cfg.priors, lib);
  const ConstraintSet constraints = constraints_from_json(cfg.constraints, lib);
  constraints.validate(lib);

  const std::uint64_t master = substream(seed, fnv1a64(bench.name));
  const Dataset train = make_dataset(bench, substream(master, fnv1a64("train-data")));
  RecurrentPolicy policy(lib, cfg.policy.hidden_width, substream(master, fnv1a64("policy-init")),
                         cfg.policy.cell);
  Trainer trainer(policy, cfg.trainer);

  SampleOptions opts;
  opts.max_steps = 2 * constraints.length_cap().value_or(32);

  RunRecord rec;
  rec.config_hash = cfg.hash();
  rec.name = cfg.name;
  rec.benchmark = bench.name;
  rec.seed = seed;
  rec.steps_to_solve = cfg.trainer.max_iterations;

  Sequence best_sequence;
  SequenceTrie* systematic = constraints.systematic_trie();

  for (std::size_t iter = 1; iter <= cfg.trainer.max_iterations; ++iter) {
    const std::vector<SampleRecord> batch = sample_batch(
        policy, priors, constraints, lib, cfg.trainer.batch_size, master, iter, opts);
    std::vector<Sequence> sequences(batch.size());
    std::vector<double> rewards(batch.size());
    std::size_t best_in_batch = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      sequences[i] = batch[i].sequence;
      rewards[i] = reward(sequences[i], lib, train);
      if (rewards[i] > rewards[best_in_batch]) best_in_batch = i;
    }
    if (dumper) dumper->dump(bench.name, seed, iter, batch, rewards, lib);
    if (rewards[best_in_batch] > rec.best_reward || best_sequence.empty()) {
      rec.best_reward = rewards[best_in_batch];
      best_sequence = sequences[best_in_batch];
    }
    rec.best_reward_trace.push_back(rec.best_reward);
    if (systematic) {
      for (const auto& s : sequences) systematic->insert(s);
    }
    if (recovered(sequences[best_in_batch], lib, bench)) {
      rec.solved = true;
      rec.steps_to_solve = iter;
      best_sequence = sequences[best_in_batch];
      rec.best_reward = rewards[best_in_batch];
      break;
    }
    if (cfg.method == Method::Dsr) {
      trainer.step(policy, sequences, rewards, priors, constraints, lib);
    }
  }

  rec.best_expression = lib.render(best_sequence);
  if (!best_sequence.empty()) {
    rec.structural_match = structurally_recovered(best_sequence, lib, bench);
  }
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// Runs the (benchmark x seed) grid, appending each finished record to the
// output JSONL immediately. Records are returned in grid order; independent
// runs execute in parallel worker slots.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg,
                                             const BenchmarkRegistry& registry,
                                             SampleDumper* dumper = nullptr) {
  validate_config(cfg, registry);

  struct Cell {
    const Benchmark* bench;
    std::uint64_t seed;
  };
  std::vector<Cell> grid;
  for (const std::string& name : cfg.benchmarks) {
    for (std::uint64_t seed : cfg.seeds) grid.push_back({&registry.get(name), seed});
  }

  std::vector<RunRecord> records(grid.size());
  std::unique_ptr<std::ofstream> out;
  std::mutex out_mu;
  if (!cfg.output.empty()) {
    out = std::make_unique<std::ofstream>(cfg.output, std::ios::app);
    if (!*out) throw ConfigError("cannot open results file: " + cfg.output);
  }

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(grid.size(), cfg.workers > 0 ? cfg.workers : hw);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      try {
        records[i] = run_single(cfg, *grid[i].bench, grid[i].seed, dumper);
        if (out) {
          std::lock_guard<std::mutex> lock(out_mu);
          (*out) << records[i].to_json().dump() << "\n";
          out->flush();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(grid.size());
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string name;
  std::string config_hash;
  std::size_t runs = 0;
  double recovery_rate = 0.0;  // fraction of runs solved
  double mean_steps = 0.0;     // unsolved runs contribute the iteration cap
};

inline std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ContractViolation("aggregate: no records");
  std::map<std::string, SummaryRow> rows;
  std::vector<std::string> order;
  for (const RunRecord& r : records) {
    const std::string key = r.config_hash + "/" + r.name;
    auto it = rows.find(key);
    if (it == rows.end()) {
      it = rows.emplace(key, SummaryRow{r.name, r.config_hash, 0, 0.0, 0.0}).first;
      order.push_back(key);
    }
    it->second.runs += 1;
    it->second.recovery_rate += r.solved ? 1.0 : 0.0;
    it->second.mean_steps += static_cast<double>(r.steps_to_solve);
  }
  std::vector<SummaryRow> out;
  for (const std::string& key : order) {
    SummaryRow row = rows[key];
    row.recovery_rate /= static_cast<double>(row.runs);
    row.mean_steps /= static_cast<double>(row.runs);
    out.push_back(std::move(row));
  }
  return out;
}

inline std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::size_t name_w = 10;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w) + 2) << "experiment" << std::right
      << std::setw(6) << "runs" << std::setw(12) << "recovery" << std::setw(12) << "steps"
      << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name << std::right
        << std::setw(6) << r.runs << std::setw(11) << std::fixed << std::setprecision(1)
        << (100.0 * r.recovery_rate) << "%" << std::setw(12) << std::setprecision(1)
        << r.mean_steps << "\n";
  }
  return out.str();
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write summary: " + path);
  out << "experiment,config,runs,recovery_rate,mean_steps\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.name << "," << r.config_hash << "," << r.runs << "," << r.recovery_rate << ","
        << r.mean_steps << "\n";
  }
}

inline std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read results: " + path);
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(RunRecord::from_json(json::parse(line)));
  }
  return out;
}

}  // namespace symopt
