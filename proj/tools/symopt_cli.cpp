#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "symopt/symopt.hpp"

using namespace symopt;

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  json j;
  in >> j;
  return j;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::vector<std::uint64_t>& seeds, const std::string& out_path,
            const std::string& dump_path, int workers) {
  json raw = load_json(config_path);
  for (const std::string& kv : overrides) apply_override(raw, kv);
  ExperimentConfig cfg = ExperimentConfig::from_json(raw);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out_path.empty()) cfg.output = out_path;
  if (workers > 0) cfg.workers = workers;

  const BenchmarkRegistry registry = registry_for(cfg);
  validate_config(cfg, registry);

  std::unique_ptr<SampleDumper> dumper;
  if (!dump_path.empty()) dumper = std::make_unique<SampleDumper>(dump_path);

  const std::vector<RunRecord> records = run_experiment(cfg, registry, dumper.get());
  std::cout << format_summary(aggregate(records));
  if (!cfg.output.empty()) {
    std::cout << "wrote " << records.size() << " records to " << cfg.output << "\n";
  }
  return 0;
}

int cmd_summarize(const std::string& results_path, const std::string& csv_path) {
  const std::vector<RunRecord> records = read_records(results_path);
  const auto rows = aggregate(records);
  std::cout << format_summary(rows);
  if (!csv_path.empty()) {
    write_summary_csv(rows, csv_path);
    std::cout << "wrote " << csv_path << "\n";
  }
  return 0;
}

int cmd_enumerate(const std::string& config_path, const std::string& benchmark,
                  std::size_t max_len, std::size_t limit, const std::string& checkpoint) {
  const json raw = load_json(config_path);
  const ExperimentConfig cfg = ExperimentConfig::from_json(raw);

  std::size_t variables = 1;
  if (!benchmark.empty()) variables = registry_for(cfg).get(benchmark).variables;
  const Library lib = library_for_benchmark(cfg.library, variables);
  const PriorSet priors = priors_from_json(cfg.priors, lib);
  const ConstraintSet constraints = constraints_from_json(cfg.constraints, lib);

  if (max_len == 0) max_len = constraints.length_cap().value_or(8);
  RecurrentPolicy policy = checkpoint.empty()
                               ? RecurrentPolicy(lib, cfg.policy.hidden_width, 0, cfg.policy.cell)
                               : RecurrentPolicy::load(checkpoint, lib);

  const auto dist = enumerate_distribution(policy, priors, constraints, lib, max_len);
  std::vector<std::pair<Sequence, double>> rows(dist.begin(), dist.end());
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.second > b.second; });

  double total = 0.0;
  for (const auto& [seq, p] : rows) total += p;
  std::cout.precision(12);
  std::size_t shown = 0;
  for (const auto& [seq, p] : rows) {
    if (limit > 0 && shown++ >= limit) break;
    std::cout << p << "  " << lib.render(seq) << "\n";
  }
  std::cout << "# sequences: " << rows.size() << "  total mass: " << total << "\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const json raw = load_json(config_path);
  const ExperimentConfig cfg = ExperimentConfig::from_json(raw);
  validate_config(cfg, registry_for(cfg));
  std::cout << "config ok: " << cfg.name << " (hash " << cfg.hash() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symopt: constrained autoregressive search over expression sequences"};
  app.require_subcommand(1);

  std::string config_path, out_path, dump_path, csv_path, results_path, benchmark, checkpoint;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  int workers = 0;
  std::size_t max_len = 0, limit = 50;

  CLI::App* run = app.add_subcommand("run", "Run the (benchmark x seed) grid of a config");
  run->add_option("config", config_path, "Experiment config (json)")->required();
  run->add_option("--seed", seeds, "Replace the config's seed list");
  run->add_option("--override", overrides, "Set a config key, e.g. trainer.learning_rate=1e-3");
  run->add_option("--out", out_path, "Results JSONL path (overrides config)");
  run->add_option("--dump-samples", dump_path, "Append every sampled batch to this JSONL");
  run->add_option("--workers", workers, "Parallel run slots (default: hardware)");

  CLI::App* summarize = app.add_subcommand("summarize", "Aggregate a results JSONL");
  summarize->add_option("results", results_path)->required();
  summarize->add_option("--out", csv_path, "Also write the summary as CSV");

  CLI::App* enumerate = app.add_subcommand(
      "enumerate", "Exact distribution over complete sequences (oracle tool)");
  enumerate->add_option("--config", config_path)->required();
  enumerate->add_option("--benchmark", benchmark, "Align variables with this benchmark");
  enumerate->add_option("--max-len", max_len, "Maximum sequence length (default: length cap)");
  enumerate->add_option("--limit", limit, "Print at most this many sequences (0: all)");
  enumerate->add_option("--checkpoint", checkpoint, "Policy checkpoint (default: untrained)");

  CLI::App* validate = app.add_subcommand("validate-config", "Check a config and exit");
  validate->add_option("config", config_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, seeds, out_path, dump_path, workers);
    if (summarize->parsed()) return cmd_summarize(results_path, csv_path);
    if (enumerate->parsed()) return cmd_enumerate(config_path, benchmark, max_len, limit,
                                                  checkpoint);
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const InfeasibleStepError& e) {
    std::cerr << "infeasible constraints: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
