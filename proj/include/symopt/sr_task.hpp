#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "symopt/errors.hpp"
#include "symopt/library.hpp"
#include "symopt/rng.hpp"
#include "symopt/traversal.hpp"

#include "json.hpp"

namespace symopt {

// ---------------------------------------------------------------------------
// Expression evaluation
// ---------------------------------------------------------------------------

enum class EvalOp { Add, Sub, Mul, Div, Sin, Cos, Tan, Exp, Log, Sqrt, Pow, Var, Const };

struct EvalNode {
  EvalOp op = EvalOp::Const;
  int var = 0;        // for Var
  double value = 0;   // for Const
};

using EvalExpr = std::vector<EvalNode>;

inline int eval_arity(EvalOp op) {
  switch (op) {
    case EvalOp::Add:
    case EvalOp::Sub:
    case EvalOp::Mul:
    case EvalOp::Div:
    case EvalOp::Pow:
      return 2;
    case EvalOp::Sin:
    case EvalOp::Cos:
    case EvalOp::Tan:
    case EvalOp::Exp:
    case EvalOp::Log:
    case EvalOp::Sqrt:
      return 1;
    case EvalOp::Var:
    case EvalOp::Const:
      return 0;
  }
  return 0;
}

// Numeric meaning of a token symbol: an operator, a variable x<k>, or a
// numeric literal. Throws for symbols with no numeric semantics.
inline EvalNode eval_node_for(const std::string& symbol) {
  static const std::map<std::string, EvalOp> ops = {
      {"+", EvalOp::Add}, {"-", EvalOp::Sub},   {"*", EvalOp::Mul},  {"/", EvalOp::Div},
      {"sin", EvalOp::Sin}, {"cos", EvalOp::Cos}, {"tan", EvalOp::Tan}, {"exp", EvalOp::Exp},
      {"log", EvalOp::Log}, {"sqrt", EvalOp::Sqrt}, {"pow", EvalOp::Pow}};
  if (auto it = ops.find(symbol); it != ops.end()) return EvalNode{it->second, 0, 0};
  if (symbol.size() >= 2 && symbol[0] == 'x') {
    bool digits = true;
    for (std::size_t i = 1; i < symbol.size(); ++i) digits &= (std::isdigit(symbol[i]) != 0);
    if (digits) return EvalNode{EvalOp::Var, std::stoi(symbol.substr(1)) - 1, 0};
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(symbol, &used);
    if (used == symbol.size()) return EvalNode{EvalOp::Const, 0, v};
  } catch (const std::exception&) {
  }
  throw ConfigError("token has no numeric semantics: " + symbol);
}

// Parses a prefix-notation expression string ("+ * x1 x1 1") into eval form.
inline EvalExpr parse_prefix(const std::string& text) {
  std::istringstream ss(text);
  EvalExpr expr;
  std::string sym;
  long long dangling = 1;
  while (ss >> sym) {
    if (dangling == 0) throw ConfigError("prefix expression has trailing tokens: " + text);
    const EvalNode node = eval_node_for(sym);
    dangling += eval_arity(node.op) - 1;
    expr.push_back(node);
  }
  if (dangling != 0 || expr.empty()) {
    throw ConfigError("prefix expression is incomplete: " + text);
  }
  return expr;
}

inline EvalExpr to_eval_expr(const Sequence& seq, const Library& lib) {
  EvalExpr expr;
  expr.reserve(seq.size());
  for (TokenId t : seq) expr.push_back(eval_node_for(lib.symbol(t)));
  return expr;
}

struct DataMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  DataMatrix() = default;
  DataMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

// Vectorized recursive evaluation of the pre-order expression over every row
// of X. Non-finite outcomes (log of a negative, division by zero) propagate as
// per-row non-finite values; the reward maps those to zero.
inline std::vector<double> evaluate_expression(const EvalExpr& expr, const DataMatrix& X) {
  std::size_t cursor = 0;
  auto eval = [&](auto&& self) -> std::vector<double> {
    if (cursor >= expr.size()) throw ContractViolation("expression ends mid-subtree");
    const EvalNode node = expr[cursor++];
    switch (node.op) {
      case EvalOp::Const:
        return std::vector<double>(X.rows, node.value);
      case EvalOp::Var: {
        if (node.var < 0 || static_cast<std::size_t>(node.var) >= X.cols) {
          throw ContractViolation("variable index outside dataset");
        }
        std::vector<double> out(X.rows);
        for (std::size_t r = 0; r < X.rows; ++r) out[r] = X.at(r, node.var);
        return out;
      }
      default:
        break;
    }
    std::vector<double> a = self(self);
    if (eval_arity(node.op) == 1) {
      for (double& x : a) {
        switch (node.op) {
          case EvalOp::Sin: x = std::sin(x); break;
          case EvalOp::Cos: x = std::cos(x); break;
          case EvalOp::Tan: x = std::tan(x); break;
          case EvalOp::Exp: x = std::exp(x); break;
          case EvalOp::Log: x = std::log(x); break;
          case EvalOp::Sqrt: x = std::sqrt(x); break;
          default: break;
        }
      }
      return a;
    }
    std::vector<double> b = self(self);
    for (std::size_t r = 0; r < a.size(); ++r) {
      switch (node.op) {
        case EvalOp::Add: a[r] += b[r]; break;
        case EvalOp::Sub: a[r] -= b[r]; break;
        case EvalOp::Mul: a[r] *= b[r]; break;
        case EvalOp::Div: a[r] /= b[r]; break;
        case EvalOp::Pow: a[r] = std::pow(a[r], b[r]); break;
        default: break;
      }
    }
    return a;
  };
  std::vector<double> out = eval(eval);
  if (cursor != expr.size()) throw ContractViolation("expression has trailing tokens");
  return out;
}

inline std::vector<double> evaluate_expression(const Sequence& seq, const Library& lib,
                                               const DataMatrix& X) {
  if (!is_complete_sequence(seq, lib)) {
    throw ContractViolation("evaluate_expression requires a complete traversal");
  }
  return evaluate_expression(to_eval_expr(seq, lib), X);
}

// ---------------------------------------------------------------------------
// Datasets and reward
// ---------------------------------------------------------------------------

struct Dataset {
  DataMatrix X;
  std::vector<double> y;
  std::string name;
  std::size_t variable_count = 0;
};

inline double population_std(const std::vector<double>& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(y.size()));
}

// Root-mean-square error normalized by std(y).
inline double nrmse(const std::vector<double>& yhat, const std::vector<double>& y) {
  if (yhat.size() != y.size() || y.empty()) throw ContractViolation("nrmse: size mismatch");
  double mse = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double e = yhat[r] - y[r];
    mse += e * e;
  }
  const double rmse = std::sqrt(mse / static_cast<double>(y.size()));
  const double sd = population_std(y);
  if (sd == 0.0) return rmse == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return rmse / sd;
}

// Squashed error reward in [0, 1]: 1 / (1 + NRMSE). Any non-finite prediction
// row zeroes the reward.
inline double reward_from_predictions(const std::vector<double>& yhat,
                                      const std::vector<double>& y) {
  for (double v : yhat) {
    if (!std::isfinite(v)) return 0.0;
  }
  return 1.0 / (1.0 + nrmse(yhat, y));
}

inline double reward(const Sequence& seq, const Library& lib, const Dataset& data) {
  return reward_from_predictions(evaluate_expression(seq, lib, data.X), data.y);
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

struct Benchmark {
  std::string name;
  std::string expression;  // ground truth, prefix notation (may use pow/constants)
  std::size_t variables = 1;
  std::vector<double> lo, hi;
  std::size_t points = 20;
  enum class Sampling { Uniform, Grid } sampling = Sampling::Uniform;
  std::string library_form;  // optional equivalent over the search tokens, "" if none
  std::string source;

  EvalExpr ground_truth() const { return parse_prefix(expression); }
};

// Samples X from the benchmark's domain and computes y from the ground truth.
// Uniform rows whose ground truth is non-finite are resampled (with a retry
// bound); grid sampling fails loudly instead.
inline Dataset make_dataset(const Benchmark& bench, std::uint64_t seed) {
  Dataset data;
  data.name = bench.name;
  data.variable_count = bench.variables;
  data.X = DataMatrix(bench.points, bench.variables);
  std::mt19937_64 rng(seed);
  const EvalExpr gt = bench.ground_truth();

  auto fill_row = [&](std::size_t r) {
    for (std::size_t c = 0; c < bench.variables; ++c) {
      std::uniform_real_distribution<double> dist(bench.lo[c], bench.hi[c]);
      data.X.at(r, c) = dist(rng);
    }
  };
  if (bench.sampling == Benchmark::Sampling::Grid) {
    for (std::size_t r = 0; r < bench.points; ++r) {
      for (std::size_t c = 0; c < bench.variables; ++c) {
        const double t = bench.points > 1
                             ? static_cast<double>(r) / static_cast<double>(bench.points - 1)
                             : 0.0;
        data.X.at(r, c) = bench.lo[c] + t * (bench.hi[c] - bench.lo[c]);
      }
    }
  } else {
    for (std::size_t r = 0; r < bench.points; ++r) fill_row(r);
  }

  data.y = evaluate_expression(gt, data.X);
  for (std::size_t r = 0; r < bench.points; ++r) {
    int attempts = 0;
    while (!std::isfinite(data.y[r])) {
      if (bench.sampling == Benchmark::Sampling::Grid || ++attempts > 100) {
        throw ConfigError("benchmark " + bench.name + ": ground truth non-finite at row " +
                          std::to_string(r));
      }
      fill_row(r);
      DataMatrix row(1, bench.variables);
      for (std::size_t c = 0; c < bench.variables; ++c) row.at(0, c) = data.X.at(r, c);
      data.y[r] = evaluate_expression(gt, row)[0];
    }
  }
  return data;
}

// Exact-recovery decision: NRMSE below 1e-12 on a fresh resample of the
// benchmark domain (noiseless exact-fit test). The resample seed is a fixed
// function of the benchmark name, distinct from training seeds.
inline constexpr double kRecoveryNrmse = 1e-12;

inline std::uint64_t recovery_seed(const Benchmark& bench) {
  return substream(fnv1a64(bench.name), 0x7E57ull);
}

inline bool recovered(const Sequence& seq, const Library& lib, const Benchmark& bench) {
  if (!is_complete_sequence(seq, lib)) {
    throw ContractViolation("recovered requires a complete traversal");
  }
  const Dataset holdout = make_dataset(bench, recovery_seed(bench));
  const std::vector<double> yhat = evaluate_expression(seq, lib, holdout.X);
  for (double v : yhat) {
    if (!std::isfinite(v)) return false;
  }
  return nrmse(yhat, holdout.y) < kRecoveryNrmse;
}

// Structural comparison against the benchmark's library form (canonical order
// of commutative children). Unavailable when the ground truth needs tokens
// outside the library. Informational only; recovery is the numeric test.
inline std::optional<bool> structurally_recovered(const Sequence& seq, const Library& lib,
                                                  const Benchmark& bench) {
  if (bench.library_form.empty()) return std::nullopt;
  std::istringstream ss(bench.library_form);
  Sequence truth;
  std::string sym;
  while (ss >> sym) {
    if (!lib.has(sym)) return std::nullopt;
    truth.push_back(lib.id_of(sym));
  }
  std::set<TokenId> comm;
  for (TokenId v : lib.with_tag("commutative")) comm.insert(v);
  return canonicalize(seq, lib, comm) == canonicalize(truth, lib, comm);
}

// ---------------------------------------------------------------------------
// Registry and CSV interchange
// ---------------------------------------------------------------------------

class BenchmarkRegistry {
 public:
  void add(Benchmark b) {
    const std::string name = b.name;
    if (!by_name_.emplace(name, std::move(b)).second) {
      throw ConfigError("duplicate benchmark: " + name);
    }
  }

  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  const Benchmark& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown benchmark: " + name);
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : by_name_) out.push_back(k);
    return out;
  }

  // The Nguyen suite (Uy et al. 2011), in the domain convention used by
  // neural symbolic-regression work: 20 uniform points per benchmark.
  static BenchmarkRegistry nguyen() {
    BenchmarkRegistry reg;
    const std::string src = "Nguyen benchmark suite (Uy et al., 2011)";
    auto add1 = [&](std::string name, std::string expr, double lo, double hi,
                    std::string library_form) {
      Benchmark b;
      b.name = std::move(name);
      b.expression = std::move(expr);
      b.variables = 1;
      b.lo = {lo};
      b.hi = {hi};
      b.points = 20;
      b.library_form = std::move(library_form);
      b.source = src;
      reg.add(std::move(b));
    };
    auto add2 = [&](std::string name, std::string expr, double lo, double hi,
                    std::string library_form) {
      Benchmark b;
      b.name = std::move(name);
      b.expression = std::move(expr);
      b.variables = 2;
      b.lo = {lo, lo};
      b.hi = {hi, hi};
      b.points = 20;
      b.library_form = std::move(library_form);
      b.source = src;
      reg.add(std::move(b));
    };
    add1("Nguyen-1", "+ + pow x1 3 pow x1 2 x1", -1, 1,
         "+ + * * x1 x1 x1 * x1 x1 x1");
    add1("Nguyen-2", "+ + + pow x1 4 pow x1 3 pow x1 2 x1", -1, 1,
         "+ + + * * * x1 x1 x1 x1 * * x1 x1 x1 * x1 x1 x1");
    add1("Nguyen-3", "+ + + + pow x1 5 pow x1 4 pow x1 3 pow x1 2 x1", -1, 1,
         "+ + + + * * * * x1 x1 x1 x1 x1 * * * x1 x1 x1 x1 * * x1 x1 x1 * x1 x1 x1");
    add1("Nguyen-4", "+ + + + + pow x1 6 pow x1 5 pow x1 4 pow x1 3 pow x1 2 x1", -1, 1,
         "+ + + + + * * * * * x1 x1 x1 x1 x1 x1 * * * * x1 x1 x1 x1 x1 * * * x1 x1 x1 x1 "
         "* * x1 x1 x1 * x1 x1 x1");
    add1("Nguyen-5", "- * sin pow x1 2 cos x1 1", -1, 1, "");
    add1("Nguyen-6", "+ sin x1 sin + x1 pow x1 2", -1, 1,
         "+ sin x1 sin + x1 * x1 x1");
    add1("Nguyen-7", "+ log + x1 1 log + pow x1 2 1", 0, 2, "");
    add1("Nguyen-8", "sqrt x1", 0, 4, "");
    add2("Nguyen-9", "+ sin x1 sin pow x2 2", 0, 1, "+ sin x1 sin * x2 x2");
    add2("Nguyen-10", "* 2 * sin x1 cos x2", 0, 1, "");
    add2("Nguyen-11", "pow x1 x2", 0, 1, "");
    add2("Nguyen-12", "+ - pow x1 4 pow x1 3 - / pow x2 2 2 x2", 0, 1, "");
    return reg;
  }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [name, b] : by_name_) {
      nlohmann::json j;
      j["name"] = b.name;
      j["expression"] = b.expression;
      j["variables"] = b.variables;
      j["lo"] = b.lo;
      j["hi"] = b.hi;
      j["points"] = b.points;
      j["sampling"] = b.sampling == Benchmark::Sampling::Grid ? "grid" : "uniform";
      if (!b.library_form.empty()) j["library_form"] = b.library_form;
      if (!b.source.empty()) j["source"] = b.source;
      out.push_back(std::move(j));
    }
    return out;
  }

  static BenchmarkRegistry from_json(const nlohmann::json& arr) {
    BenchmarkRegistry reg;
    for (const auto& j : arr) {
      Benchmark b;
      b.name = j.at("name").get<std::string>();
      b.expression = j.at("expression").get<std::string>();
      b.variables = j.at("variables").get<std::size_t>();
      b.lo = j.at("lo").get<std::vector<double>>();
      b.hi = j.at("hi").get<std::vector<double>>();
      b.points = j.at("points").get<std::size_t>();
      b.sampling = j.value("sampling", "uniform") == "grid" ? Benchmark::Sampling::Grid
                                                            : Benchmark::Sampling::Uniform;
      b.library_form = j.value("library_form", "");
      b.source = j.value("source", "");
      if (b.lo.size() != b.variables || b.hi.size() != b.variables) {
        throw ConfigError("benchmark " + b.name + ": lo/hi length != variables");
      }
      b.ground_truth();  // parse check
      reg.add(std::move(b));
    }
    return reg;
  }

  static BenchmarkRegistry load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read benchmark registry: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write benchmark registry: " + path);
    out << to_json().dump(2) << "\n";
  }

 private:
  std::map<std::string, Benchmark> by_name_;
};

// CSV interchange, header x1..xn,y.
inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset: " + path);
  for (std::size_t c = 0; c < data.X.cols; ++c) out << "x" << (c + 1) << ",";
  out << "y\n";
  out.precision(17);
  for (std::size_t r = 0; r < data.X.rows; ++r) {
    for (std::size_t c = 0; c < data.X.cols; ++c) out << data.X.at(r, c) << ",";
    out << data.y[r] << "\n";
  }
}

inline Dataset load_csv(const std::string& path, const std::string& name = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset: " + path);
  std::size_t cols = 0;
  {
    std::istringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) ++cols;
  }
  if (cols < 2) throw ConfigError("dataset needs at least one x column and y: " + path);
  const std::size_t vars = cols - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::size_t got = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++got;
    }
    if (got != cols) throw ConfigError("ragged csv row in " + path);
    ++rows;
  }
  Dataset data;
  data.name = name.empty() ? path : name;
  data.variable_count = vars;
  data.X = DataMatrix(rows, vars);
  data.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < vars; ++c) data.X.at(r, c) = values[r * cols + c];
    data.y[r] = values[r * cols + vars];
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("non-finite entry in dataset " + path);
  }
  return data;
}

}  // namespace symopt
