#pragma once

// JSON experiment configuration. One file describes a problem instance (from
// data files or a seeded synthetic generator), a list of named optimizer
// setups, and the seeds to sweep. Every field is checked by name and unknown
// keys are rejected, so a typo fails loudly instead of silently running the
// defaults. The parsed document is kept verbatim for echoing into summaries.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rspg/errors.hpp"
#include "rspg/estimators.hpp"
#include "rspg/manifold.hpp"
#include "rspg/optimizers.hpp"
#include "rspg/problems/sparse_pca.hpp"
#include "rspg/problems/synth.hpp"

namespace rspg::io {

using Json = nlohmann::ordered_json;

enum class ProblemKind { SparsePca, RobustMc };

struct OptimizerSpec {
  std::string name;
  OptimizerConfig config;       // batch left defaulted when batch_given is false
  bool batch_given = false;     // false: fill algorithm defaults once n is known
  bool eta_given = false;
};

struct ExperimentConfig {
  Json echo;  // the parsed document, for reproducible summaries

  ProblemKind kind = ProblemKind::SparsePca;
  int rank = 1;

  // sparse PCA
  double mu = 0.0;
  SpcaMode mode = SpcaMode::FiniteSum;
  SpcaGradient gradient = SpcaGradient::Surrogate;
  std::optional<std::string> spca_file;
  std::optional<SpcaSynthConfig> spca_synth;

  // robust matrix completion
  double lambda = 0.5;
  double l1_weight = 0.0;
  std::optional<std::string> rmc_values_file;
  std::optional<std::string> rmc_mask_file;
  std::optional<RmcSynthConfig> rmc_synth;

  std::uint64_t synth_seed = 0;  // data generator seed (synthetic problems)

  std::vector<OptimizerSpec> optimizers;
  std::vector<std::uint64_t> seeds;
  int metric_every = 1;
  bool record_wall_time = false;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw config_error(where + ": " + what);
}

inline const Json& member(const Json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing required key '") + key + "'");
  return *it;
}

inline void expect_object(const Json& value, const std::string& where) {
  if (!value.is_object()) fail(where, "expected an object");
}

inline void reject_unknown(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return it.key() == k; });
    if (!known) fail(where, "unknown key '" + it.key() + "'");
  }
}

inline double get_double(const Json& obj, const std::string& where, const char* key) {
  const Json& v = member(obj, where, key);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

inline double get_double_or(const Json& obj, const std::string& where, const char* key, double fallback) {
  return obj.contains(key) ? get_double(obj, where, key) : fallback;
}

inline long long get_int(const Json& obj, const std::string& where, const char* key) {
  const Json& v = member(obj, where, key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<long long>();
}

inline long long get_int_or(const Json& obj, const std::string& where, const char* key, long long fallback) {
  return obj.contains(key) ? get_int(obj, where, key) : fallback;
}

inline bool get_bool_or(const Json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) fail(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

inline std::string get_string(const Json& obj, const std::string& where, const char* key) {
  const Json& v = member(obj, where, key);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

inline Algorithm parse_algorithm(const std::string& s, const std::string& where) {
  if (s == "r_prox_sgd") return Algorithm::RProxSGD;
  if (s == "r_prox_spb") return Algorithm::RProxSPB;
  if (s == "manpg") return Algorithm::ManPG;
  if (s == "r_subgrad") return Algorithm::RSubgrad;
  fail(where, "unknown algorithm '" + s + "' (expected r_prox_sgd, r_prox_spb, manpg, or r_subgrad)");
}

inline RetractionKind parse_retraction(const std::string& s, const std::string& where) {
  if (s == "polar") return RetractionKind::Polar;
  if (s == "qr") return RetractionKind::QR;
  if (s == "cayley") return RetractionKind::Cayley;
  if (s == "exponential") return RetractionKind::Exponential;
  fail(where, "unknown retraction '" + s + "' (expected polar, qr, cayley, or exponential)");
}

inline TransportKind parse_transport(const std::string& s, const std::string& where) {
  if (s == "projection") return TransportKind::Projection;
  if (s == "isometric_projection") return TransportKind::IsometricProjection;
  fail(where, "unknown transport '" + s + "' (expected projection or isometric_projection)");
}

inline std::string algorithm_label(Algorithm a) {
  switch (a) {
    case Algorithm::RProxSGD: return "r_prox_sgd";
    case Algorithm::RProxSPB: return "r_prox_spb";
    case Algorithm::ManPG: return "manpg";
    case Algorithm::RSubgrad: return "r_subgrad";
  }
  return "unknown";
}

inline OptimizerSpec parse_optimizer(const Json& obj, const std::string& where) {
  expect_object(obj, where);
  reject_unknown(obj, where,
                 {"name", "algorithm", "eta", "schedule", "gamma", "batch", "max_iters", "ifo_budget", "retraction",
                  "transport", "reorthonormalize_every", "scaled_g_variant", "estimates"});
  OptimizerSpec spec;
  spec.config.algorithm = parse_algorithm(get_string(obj, where, "algorithm"), where + ".algorithm");
  spec.name = obj.contains("name") ? get_string(obj, where, "name") : algorithm_label(spec.config.algorithm);
  if (spec.name.empty()) fail(where + ".name", "must not be empty");
  for (char c : spec.name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      fail(where + ".name", "'" + spec.name + "' may only use letters, digits, '_' and '-' (it names output files)");

  if (obj.contains("eta")) {
    spec.config.eta = get_double(obj, where, "eta");
    spec.eta_given = true;
  }
  if (obj.contains("schedule")) {
    std::string s = get_string(obj, where, "schedule");
    if (s == "constant") spec.config.schedule = StepSchedule::Constant;
    else if (s == "inverse_sqrt") spec.config.schedule = StepSchedule::InverseSqrt;
    else fail(where + ".schedule", "unknown schedule '" + s + "' (expected constant or inverse_sqrt)");
  }
  if (obj.contains("gamma")) {
    const Json& g = obj.at("gamma");
    if (g.is_string()) {
      if (g.get<std::string>() != "auto") fail(where + ".gamma", "expected a number or \"auto\"");
      spec.config.gamma = kAutoGamma;
    } else if (g.is_number()) {
      spec.config.gamma = g.get<double>();
    } else {
      fail(where + ".gamma", "expected a number or \"auto\"");
    }
  }
  if (obj.contains("batch")) {
    const std::string bw = where + ".batch";
    const Json& b = obj.at("batch");
    expect_object(b, bw);
    reject_unknown(b, bw, {"anchor", "inner", "q"});
    auto batch_size = [&](const char* key, int fallback) {
      if (!b.contains(key)) return fallback;
      const Json& a = b.at(key);
      if (a.is_string()) {
        if (a.get<std::string>() != "all") fail(bw + "." + key, "expected an integer or \"all\"");
        return kBatchAll;
      }
      if (a.is_number_integer()) return static_cast<int>(a.get<long long>());
      fail(bw + "." + key, "expected an integer or \"all\"");
      return fallback;  // unreachable
    };
    spec.config.batch.anchor = batch_size("anchor", spec.config.batch.anchor);
    spec.config.batch.inner = batch_size("inner", spec.config.batch.inner);
    spec.config.batch.q = static_cast<int>(get_int_or(b, bw, "q", spec.config.batch.q));
    spec.batch_given = true;
  }
  spec.config.max_iters = get_int_or(obj, where, "max_iters", spec.config.max_iters);
  spec.config.ifo_budget = get_int_or(obj, where, "ifo_budget", spec.config.ifo_budget);
  if (obj.contains("retraction"))
    spec.config.retraction = parse_retraction(get_string(obj, where, "retraction"), where + ".retraction");
  if (obj.contains("transport"))
    spec.config.transport = parse_transport(get_string(obj, where, "transport"), where + ".transport");
  spec.config.reorthonormalize_every =
      static_cast<int>(get_int_or(obj, where, "reorthonormalize_every", spec.config.reorthonormalize_every));
  spec.config.scaled_g_variant = get_bool_or(obj, where, "scaled_g_variant", false);
  if (obj.contains("estimates")) {
    const std::string ew = where + ".estimates";
    const Json& e = obj.at("estimates");
    expect_object(e, ew);
    reject_unknown(e, ew, {"L_tilde", "c_E", "Theta_sq"});
    spec.config.estimates.L_tilde = get_double_or(e, ew, "L_tilde", 1.0);
    spec.config.estimates.c_E = get_double_or(e, ew, "c_E", 1.0);
    spec.config.estimates.Theta_sq = get_double_or(e, ew, "Theta_sq", 1.0);
  }
  // When eta is omitted for the variance-reduced driver, use its theoretical
  // constant step derived from the supplied smoothness estimates.
  if (!spec.eta_given && spec.config.algorithm == Algorithm::RProxSPB)
    spec.config.eta = eta_spb(spec.config.estimates);
  return spec;
}

inline void parse_spca_problem(const Json& obj, ExperimentConfig& out) {
  const std::string where = "problem";
  reject_unknown(obj, where, {"kind", "r", "mu", "mode", "gradient", "data"});
  out.kind = ProblemKind::SparsePca;
  out.rank = static_cast<int>(get_int(obj, where, "r"));
  out.mu = get_double(obj, where, "mu");
  if (obj.contains("mode")) {
    std::string m = get_string(obj, where, "mode");
    if (m == "finite_sum") out.mode = SpcaMode::FiniteSum;
    else if (m == "online") out.mode = SpcaMode::Online;
    else fail(where + ".mode", "unknown mode '" + m + "' (expected finite_sum or online)");
  }
  if (obj.contains("gradient")) {
    std::string g = get_string(obj, where, "gradient");
    if (g == "surrogate") out.gradient = SpcaGradient::Surrogate;
    else if (g == "full_ambient") out.gradient = SpcaGradient::FullAmbient;
    else fail(where + ".gradient", "unknown gradient '" + g + "' (expected surrogate or full_ambient)");
  }
  const Json& data = member(obj, where, "data");
  expect_object(data, where + ".data");
  if (data.contains("file")) {
    reject_unknown(data, where + ".data", {"file"});
    out.spca_file = get_string(data, where + ".data", "file");
  } else if (data.contains("synth")) {
    reject_unknown(data, where + ".data", {"synth", "seed"});
    const std::string sw = where + ".data.synth";
    const Json& s = data.at("synth");
    expect_object(s, sw);
    reject_unknown(s, sw, {"n", "d", "r", "support", "noise", "top_variance", "variance_decay"});
    SpcaSynthConfig cfg;
    cfg.n = static_cast<int>(get_int_or(s, sw, "n", cfg.n));
    cfg.d = static_cast<int>(get_int_or(s, sw, "d", cfg.d));
    cfg.r = static_cast<int>(get_int_or(s, sw, "r", cfg.r));
    cfg.support = static_cast<int>(get_int_or(s, sw, "support", cfg.support));
    cfg.noise = get_double_or(s, sw, "noise", cfg.noise);
    cfg.top_variance = get_double_or(s, sw, "top_variance", cfg.top_variance);
    cfg.variance_decay = get_double_or(s, sw, "variance_decay", cfg.variance_decay);
    out.spca_synth = cfg;
    out.synth_seed = static_cast<std::uint64_t>(get_int_or(data, where + ".data", "seed", 0));
  } else {
    fail(where + ".data", "expected either 'file' or 'synth'");
  }
}

inline void parse_rmc_problem(const Json& obj, ExperimentConfig& out) {
  const std::string where = "problem";
  reject_unknown(obj, where, {"kind", "r", "lambda", "l1_weight", "data"});
  out.kind = ProblemKind::RobustMc;
  out.rank = static_cast<int>(get_int(obj, where, "r"));
  out.lambda = get_double(obj, where, "lambda");
  out.l1_weight = get_double(obj, where, "l1_weight");
  const Json& data = member(obj, where, "data");
  expect_object(data, where + ".data");
  if (data.contains("values") || data.contains("mask")) {
    reject_unknown(data, where + ".data", {"values", "mask"});
    out.rmc_values_file = get_string(data, where + ".data", "values");
    out.rmc_mask_file = get_string(data, where + ".data", "mask");
  } else if (data.contains("synth")) {
    reject_unknown(data, where + ".data", {"synth", "seed"});
    const std::string sw = where + ".data.synth";
    const Json& s = data.at("synth");
    expect_object(s, sw);
    reject_unknown(s, sw, {"m", "n", "r", "observe_fraction", "corrupt_fraction", "corrupt_scale"});
    RmcSynthConfig cfg;
    cfg.m = static_cast<int>(get_int_or(s, sw, "m", cfg.m));
    cfg.n = static_cast<int>(get_int_or(s, sw, "n", cfg.n));
    cfg.r = static_cast<int>(get_int_or(s, sw, "r", cfg.r));
    cfg.observe_fraction = get_double_or(s, sw, "observe_fraction", cfg.observe_fraction);
    cfg.corrupt_fraction = get_double_or(s, sw, "corrupt_fraction", cfg.corrupt_fraction);
    cfg.corrupt_scale = get_double_or(s, sw, "corrupt_scale", cfg.corrupt_scale);
    out.rmc_synth = cfg;
    out.synth_seed = static_cast<std::uint64_t>(get_int_or(data, where + ".data", "seed", 0));
  } else {
    fail(where + ".data", "expected either 'values' + 'mask' or 'synth'");
  }
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const Json& doc) {
  using namespace detail;
  expect_object(doc, "config");
  reject_unknown(doc, "config", {"problem", "optimizers", "seeds", "metric_every", "record_wall_time"});
  ExperimentConfig out;
  out.echo = doc;

  const Json& problem = member(doc, "config", "problem");
  expect_object(problem, "problem");
  std::string kind = get_string(problem, "problem", "kind");
  if (kind == "sparse_pca") parse_spca_problem(problem, out);
  else if (kind == "robust_mc") parse_rmc_problem(problem, out);
  else fail("problem.kind", "unknown kind '" + kind + "' (expected sparse_pca or robust_mc)");

  const Json& opts = member(doc, "config", "optimizers");
  if (!opts.is_array() || opts.empty()) fail("optimizers", "expected a nonempty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < opts.size(); ++i) {
    OptimizerSpec spec = parse_optimizer(opts[i], "optimizers[" + std::to_string(i) + "]");
    if (!names.insert(spec.name).second)
      fail("optimizers[" + std::to_string(i) + "].name", "duplicate optimizer name '" + spec.name + "'");
    out.optimizers.push_back(std::move(spec));
  }

  const Json& seeds = member(doc, "config", "seeds");
  if (!seeds.is_array() || seeds.empty()) fail("seeds", "expected a nonempty array of integers");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!seeds[i].is_number_integer() || seeds[i].get<long long>() < 0)
      fail("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
    out.seeds.push_back(seeds[i].get<std::uint64_t>());
  }

  out.metric_every = static_cast<int>(get_int_or(doc, "config", "metric_every", 1));
  if (out.metric_every < 0) fail("metric_every", "must be >= 0 (0 disables the expensive metrics)");
  out.record_wall_time = get_bool_or(doc, "config", "record_wall_time", false);

  // Cross checks that do not need the data: drivers that take exact full
  // gradients cannot run in the online regime, and the variance-reduced
  // recursion is undefined across the completion problem's block updates.
  for (const auto& spec : out.optimizers) {
    bool online = out.kind == ProblemKind::SparsePca && out.mode == SpcaMode::Online;
    if (online && spec.config.algorithm == Algorithm::ManPG)
      fail("optimizers", "'" + spec.name + "': manpg needs full gradients and cannot run in online mode");
    if (online && spec.config.algorithm == Algorithm::RProxSPB && spec.batch_given &&
        (spec.config.batch.anchor == kBatchAll || spec.config.batch.inner == kBatchAll))
      fail("optimizers", "'" + spec.name + "': batch \"all\" needs full gradients and cannot run in online mode");
    if (out.kind == ProblemKind::RobustMc && spec.config.algorithm == Algorithm::RProxSPB)
      fail("optimizers", "'" + spec.name + "': r_prox_spb is undefined across robust MC block updates");
  }
  return out;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw config_error("config file '" + path + "' is not valid JSON: " + err.what());
  }
  return parse_experiment_config(doc);
}

}  // namespace rspg::io
