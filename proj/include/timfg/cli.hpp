// Copyright 2026 The timfg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch front-end shared by the timfg executable and the acceptance
// driver. Every subcommand reads an optional JSON config, applies flag
// overrides, writes its artifacts into the output directory and prints a
// short summary. States are 1-based in all files and flags.

#ifndef TIMFG_CLI_HPP_
#define TIMFG_CLI_HPP_

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "timfg/classic.hpp"
#include "timfg/consistent.hpp"
#include "timfg/io.hpp"
#include "timfg/nagent.hpp"
#include "timfg/tabulated_model.hpp"

namespace timfg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "TIMFG_OUT_DIR";
inline constexpr int kCsvVersion = 1;

struct ExperimentConfig {
  std::string model = "example43";               // builtin name or tabulated-model path
  std::vector<std::pair<double, double>> atoms;  // builtin discount override
  int action_m = 0;                              // 0: model default (101, or 1001 for example43)
  int nu_k = 200;
  double tail_eps = 1e-10;
  double fixed_point_tol = 1e-8;
  double tie_tol = kDefaultTieTol;
  int horizon = 0;  // 0: smallest T with tail_bound(T) <= tail_eps
  std::vector<int> N;
  std::int64_t samples = 100000;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::vector<double> nu0;  // empty: uniform
  double init_action = 0.5;
  double lambda = 1.0;
  int max_iter = 500;
  std::string policy;       // FeedbackPolicy JSON file
  std::string time_policy;  // TimePolicy JSON file
  std::optional<double> constant_action;
  int state = 1;
  std::string init = "lattice";  // or "iid"
  std::string method = "exact";  // "exact", "mc" or "both"
  int sweep_points = 20;
};

namespace detail {

template <class T>
T take(const json& j, const std::string& name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + name + "' is malformed");
  }
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown config field '" + where + it.key() + "'");
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return io::hex64(io::fnv1a64(os.str()));
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::check_keys(j,
                     {"model", "atoms", "grids", "tolerances", "horizon", "N", "samples", "seed", "output_dir", "nu0",
                      "init_action", "lambda", "max_iter", "policy", "time_policy", "constant_action", "state", "init",
                      "method", "sweep_points"},
                     "");
  ExperimentConfig c;
  using detail::take;
  if (j.contains("model")) c.model = take<std::string>(j, "model");
  if (j.contains("atoms")) c.atoms = take<std::vector<std::pair<double, double>>>(j, "atoms");
  if (j.contains("grids")) {
    const auto& g = j.at("grids");
    if (!g.is_object()) throw ConfigError("config field 'grids' is malformed");
    detail::check_keys(g, {"action_m", "nu_k"}, "grids.");
    if (g.contains("action_m")) c.action_m = take<int>(g, "action_m");
    if (g.contains("nu_k")) c.nu_k = take<int>(g, "nu_k");
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (!t.is_object()) throw ConfigError("config field 'tolerances' is malformed");
    detail::check_keys(t, {"tail_eps", "fixed_point_tol", "tie_tol"}, "tolerances.");
    if (t.contains("tail_eps")) c.tail_eps = take<double>(t, "tail_eps");
    if (t.contains("fixed_point_tol")) c.fixed_point_tol = take<double>(t, "fixed_point_tol");
    if (t.contains("tie_tol")) c.tie_tol = take<double>(t, "tie_tol");
  }
  if (j.contains("horizon")) c.horizon = take<int>(j, "horizon");
  if (j.contains("N")) c.N = take<std::vector<int>>(j, "N");
  if (j.contains("samples")) c.samples = take<std::int64_t>(j, "samples");
  if (j.contains("seed")) c.seed = take<std::uint64_t>(j, "seed");
  if (j.contains("output_dir")) c.output_dir = take<std::string>(j, "output_dir");
  if (j.contains("nu0")) c.nu0 = take<std::vector<double>>(j, "nu0");
  if (j.contains("init_action")) c.init_action = take<double>(j, "init_action");
  if (j.contains("lambda")) c.lambda = take<double>(j, "lambda");
  if (j.contains("max_iter")) c.max_iter = take<int>(j, "max_iter");
  if (j.contains("policy")) c.policy = take<std::string>(j, "policy");
  if (j.contains("time_policy")) c.time_policy = take<std::string>(j, "time_policy");
  if (j.contains("constant_action")) c.constant_action = take<double>(j, "constant_action");
  if (j.contains("state")) c.state = take<int>(j, "state");
  if (j.contains("init")) c.init = take<std::string>(j, "init");
  if (j.contains("method")) c.method = take<std::string>(j, "method");
  if (j.contains("sweep_points")) c.sweep_points = take<int>(j, "sweep_points");
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j = {{"model", c.model},
            {"atoms", c.atoms},
            {"grids", {{"action_m", c.action_m}, {"nu_k", c.nu_k}}},
            {"tolerances", {{"tail_eps", c.tail_eps}, {"fixed_point_tol", c.fixed_point_tol}, {"tie_tol", c.tie_tol}}},
            {"horizon", c.horizon},
            {"N", c.N},
            {"samples", c.samples},
            {"output_dir", c.output_dir},
            {"nu0", c.nu0},
            {"init_action", c.init_action},
            {"lambda", c.lambda},
            {"max_iter", c.max_iter},
            {"policy", c.policy},
            {"time_policy", c.time_policy},
            {"state", c.state},
            {"init", c.init},
            {"method", c.method},
            {"sweep_points", c.sweep_points}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["constant_action"] = c.constant_action ? json(*c.constant_action) : json(nullptr);
  return j;
}

inline void validate(const ExperimentConfig& c) {
  if (!(c.tail_eps > 0.0)) throw ConfigError("config field 'tolerances.tail_eps' must be positive");
  if (!(c.fixed_point_tol > 0.0)) throw ConfigError("config field 'tolerances.fixed_point_tol' must be positive");
  if (!(c.tie_tol > 0.0)) throw ConfigError("config field 'tolerances.tie_tol' must be positive");
  if (c.action_m < 0 || c.action_m == 1) throw ConfigError("config field 'grids.action_m' must be 0 or >= 2");
  if (c.nu_k < 1) throw ConfigError("config field 'grids.nu_k' must be >= 1");
  if (c.horizon < 0) throw ConfigError("config field 'horizon' must be >= 0");
  if (c.samples < 1) throw ConfigError("config field 'samples' must be >= 1");
  if (c.max_iter < 1) throw ConfigError("config field 'max_iter' must be >= 1");
  if (!(c.lambda > 0.0 && c.lambda <= 1.0)) throw ConfigError("config field 'lambda' must lie in (0, 1]");
  if (c.init != "lattice" && c.init != "iid") throw ConfigError("config field 'init' must be 'lattice' or 'iid'");
  if (c.method != "exact" && c.method != "mc" && c.method != "both")
    throw ConfigError("config field 'method' must be 'exact', 'mc' or 'both'");
  if (c.sweep_points < 1) throw ConfigError("config field 'sweep_points' must be >= 1");
  for (int n : c.N)
    if (n < 1) throw ConfigError("config field 'N' must hold positive integers");
}

inline ModelSpec build_model(const ExperimentConfig& c) {
  if (c.model == "example31") {
    const int m = c.action_m ? c.action_m : 101;
    return c.atoms.empty() ? example31(m) : example31(m, DiscountSpec::atoms(c.atoms));
  }
  if (c.model == "example43") {
    const int m = c.action_m ? c.action_m : 1001;
    return c.atoms.empty() ? example43({{1.0 / 7.0, 1.0}}, m) : example43(c.atoms, m);
  }
  if (!fs::exists(c.model)) throw ConfigError("config field 'model': no builtin or file named '" + c.model + "'");
  return load_tabulated_model_file(c.model);
}

inline int horizon_of(const ExperimentConfig& c, const ModelSpec& m) {
  return c.horizon > 0 ? c.horizon : horizon_for(m, c.tail_eps);
}

inline SimplexPoint nu0_of(const ExperimentConfig& c, const ModelSpec& m) {
  if (c.nu0.empty()) return SimplexPoint(std::vector<double>(static_cast<std::size_t>(m.d), 1.0 / m.d));
  if (static_cast<int>(c.nu0.size()) != m.d) throw ConfigError("config field 'nu0' needs one entry per state");
  try {
    return SimplexPoint(c.nu0);
  } catch (const InputError& e) {
    throw ConfigError(std::string("config field 'nu0': ") + e.what());
  }
}

inline ConsistentOptions consistent_options(const ExperimentConfig& c) {
  ConsistentOptions o;
  o.horizon = c.horizon;
  o.eps_tail = c.tail_eps;
  o.tie_tol = c.tie_tol;
  return o;
}

inline fs::path output_dir(const ExperimentConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "timfg_out";
}

/// Fields that change the results of a subcommand; the config hash covers
/// exactly these (file inputs by content).
inline json semantic_view(const std::string& sub, const ExperimentConfig& c) {
  json v = {{"subcommand", sub}, {"csv_version", kCsvVersion}};
  auto model = [&] {
    if (c.model == "example31" || c.model == "example43") {
      v["model"] = c.model;
      v["atoms"] = c.atoms;
    } else {
      v["model_digest"] = detail::file_digest(c.model);
    }
    v["action_m"] = c.action_m;
    v["tail_eps"] = c.tail_eps;
    v["horizon"] = c.horizon;
    v["tie_tol"] = c.tie_tol;
  };
  auto solver = [&] {
    v["init_action"] = c.init_action;
    v["fixed_point_tol"] = c.fixed_point_tol;
    v["max_iter"] = c.max_iter;
  };
  auto feedback_source = [&] {
    if (!c.policy.empty()) {
      v["policy_digest"] = detail::file_digest(c.policy);
    } else if (c.constant_action) {
      v["constant_action"] = *c.constant_action;
      v["nu_k"] = c.nu_k;
    } else {
      solver();
      v["nu_k"] = c.nu_k;
      v["lambda"] = c.lambda;
    }
  };
  auto mc = [&] {
    v["samples"] = c.samples;
    v["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  };
  if (sub == "example-3-1") {
    v["action_m"] = c.action_m;
    v["tail_eps"] = c.tail_eps;
    v["horizon"] = c.horizon;
    v["N"] = c.N;
    return v;
  }
  model();
  if (sub == "solve-classic") {
    solver();
    v["nu0"] = c.nu0;
  } else if (sub == "solve-consistent") {
    solver();
    v["nu_k"] = c.nu_k;
    v["lambda"] = c.lambda;
  } else if (sub == "verify-mfg") {
    feedback_source();
  } else if (sub == "nagent-gap") {
    feedback_source();
    v["N"] = c.N;
  } else if (sub == "nagent-mc") {
    feedback_source();
    mc();
    v["N"] = c.N;
    v["nu0"] = c.nu0;
    v["state"] = c.state;
    v["init"] = c.init;
  } else if (sub == "precommit-gap") {
    if (!c.time_policy.empty()) {
      v["time_policy_digest"] = detail::file_digest(c.time_policy);
    } else {
      solver();
    }
    v["nu0"] = c.nu0;
    v["N"] = c.N;
    v["method"] = c.method;
    if (c.method != "exact") mc();
  } else if (sub == "convergence-sweep") {
    feedback_source();
    v["N"] = c.N;
    v["method"] = c.method;
    v["sweep_points"] = c.sweep_points;
    if (c.method != "exact") mc();
  }
  return v;
}

struct Context {
  std::string sub;
  ExperimentConfig cfg;
  ModelSpec model;
  int T = 0;
  fs::path out;
  std::ostream* log = nullptr;

  json meta(std::optional<std::uint64_t> seed = std::nullopt) const {
    json p = io::provenance(semantic_view(sub, cfg), model, seed);
    p["subcommand"] = sub;
    p["horizon"] = T;
    p["csv_version"] = kCsvVersion;
    p["full_config"] = config_to_json(cfg);
    return p;
  }

  std::uint64_t require_seed() const {
    if (!cfg.seed) throw ConfigError("config field 'seed' is required for Monte Carlo runs");
    return *cfg.seed;
  }

  std::vector<int> N_or(std::vector<int> fallback) const { return cfg.N.empty() ? fallback : cfg.N; }
};

inline std::vector<std::string> nu_columns(const std::string& prefix, int d) {
  std::vector<std::string> cols;
  for (int y = 1; y <= d; ++y) cols.push_back(prefix + std::to_string(y));
  return cols;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline FeedbackPolicy constant_feedback(const Context& c, double u) {
  return FeedbackPolicy::constant(NuGrid::simplex(c.model.d, c.cfg.nu_k), dirac(c.model.grid, u));
}

inline ConsistentEquilibriumResult run_consistent_solver(const Context& c) {
  return solve_consistent(c.model, constant_feedback(c, c.cfg.init_action), c.cfg.lambda, c.cfg.fixed_point_tol,
                          c.cfg.max_iter, 1e-5, consistent_options(c.cfg));
}

/// Policy from --policy, else the constant policy, else a fresh solve.
inline FeedbackPolicy resolve_feedback(const Context& c, std::string& source) {
  if (!c.cfg.policy.empty()) {
    source = "file:" + c.cfg.policy;
    return io::feedback_policy_from_json(io::read_json_file(c.cfg.policy), c.model);
  }
  if (c.cfg.constant_action) {
    source = "constant:" + io::format_double(*c.cfg.constant_action);
    return constant_feedback(c, *c.cfg.constant_action);
  }
  source = "solved";
  auto r = run_consistent_solver(c);
  if (!r.converged) *c.log << "warning: consistent solver did not converge (residual " << r.residual << ")\n";
  return std::move(r.policy);
}

inline void add_action_cells(io::CsvTable::Row& row, const ModelSpec& m, const RelaxedAction& a) {
  const auto idx = a.dirac_index();
  row << a.mean(m.grid) << m.grid[a.mode_index()] << (idx ? 1 : 0);
}

inline void write_policy_csv(const fs::path& path, const ModelSpec& m, const FeedbackPolicy& pi) {
  io::CsvTable t(concat(concat({"x", "i"}, nu_columns("nu_", m.d)), {"mean_action", "mode_action", "dirac"}));
  for (int x = 0; x < m.d; ++x)
    for (int i = 0; i < pi.grid().size(); ++i) {
      auto& row = t.row() << (x + 1) << i;
      for (int y = 0; y < m.d; ++y) row << pi.grid().point(i)[y];
      add_action_cells(row, m, pi.at(x, i));
    }
  t.write(path);
}

inline void write_residual_csv(const fs::path& path, const ModelSpec& m, const NuGrid& grid,
                               const std::vector<std::vector<double>>& map) {
  io::CsvTable t(concat(concat({"x", "i"}, nu_columns("nu_", m.d)), {"residual"}));
  for (int x = 0; x < m.d; ++x)
    for (int i = 0; i < grid.size(); ++i) {
      auto& row = t.row() << (x + 1) << i;
      for (int y = 0; y < m.d; ++y) row << grid.point(i)[y];
      row << map[x][i];
    }
  t.write(path);
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_solve_classic(const Context& c) {
  const auto nu0 = nu0_of(c.cfg, c.model);
  const auto init = TimePolicy::constant(constant_row(c.model.d, dirac(c.model.grid, c.cfg.init_action)));
  const auto r = solve_classic(c.model, nu0, init, c.T, c.cfg.fixed_point_tol, c.cfg.max_iter, c.cfg.tie_tol);
  json flow = json::array();
  io::CsvTable ft(concat({"t"}, nu_columns("mu_", c.model.d)));
  for (int t = 0; t < r.flow.size(); ++t) {
    flow.push_back(io::to_json(r.flow[t]));
    auto& row = ft.row() << t;
    for (int y = 0; y < c.model.d; ++y) row << r.flow[t][y];
  }
  io::CsvTable pt({"t", "x", "mean_action", "mode_action", "dirac"});
  const int L = r.policy.head_length();
  for (int t = 0; t <= L; ++t)
    for (int x = 0; x < c.model.d; ++x) {
      auto& row = pt.row() << t << (x + 1);
      add_action_cells(row, c.model, r.policy.at(t)[x]);
    }
  json j = {{"provenance", c.meta()},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"residual", r.residual},
            {"residual_trace", r.residual_trace},
            {"tail_bound", tail_bound(c.model, c.T)},
            {"policy", io::to_json(r.policy)},
            {"flow", flow}};
  io::write_json_file(c.out / "classic_result.json", j);
  io::write_json_file(c.out / "time_policy.json", io::to_json(r.policy));
  ft.write(c.out / "classic_flow.csv");
  pt.write(c.out / "classic_policy.csv");
  *c.log << "solve-classic: converged=" << r.converged << " iterations=" << r.iterations << " residual=" << r.residual
         << "\n";
}

inline void cmd_solve_consistent(const Context& c) {
  const auto r = run_consistent_solver(c);
  json j = {{"provenance", c.meta()},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"residual", r.residual},
            {"lipschitz_estimate", r.lipschitz_estimate},
            {"lipschitz_warning", r.lipschitz_warning},
            {"update_trace", r.update_trace},
            {"residual_map", r.residual_map},
            {"policy", io::to_json(r.policy)}};
  io::write_json_file(c.out / "consistent_result.json", j);
  io::write_json_file(c.out / "policy.json", io::to_json(r.policy));
  write_policy_csv(c.out / "policy.csv", c.model, r.policy);
  write_residual_csv(c.out / "residual_map.csv", c.model, r.policy.grid(), r.residual_map);
  *c.log << "solve-consistent: converged=" << r.converged << " iterations=" << r.iterations
         << " residual=" << r.residual << " lipschitz=" << r.lipschitz_estimate << "\n";
}

inline void cmd_verify_mfg(const Context& c) {
  std::string source;
  const auto pi = resolve_feedback(c, source);
  const auto r = verify_consistent(c.model, pi, consistent_options(c.cfg));
  int wx = 0, wi = 0;
  for (int x = 0; x < c.model.d; ++x)
    for (int i = 0; i < pi.grid().size(); ++i)
      if (r.residual_map[x][i] > r.residual_map[wx][wi]) wx = x, wi = i;
  json j = {{"provenance", c.meta()},
            {"policy_source", source},
            {"residual", r.residual},
            {"worst", {{"x", wx + 1}, {"i", wi}, {"nu", io::to_json(pi.grid().point(wi))}}},
            {"residual_map", r.residual_map}};
  io::write_json_file(c.out / "verify.json", j);
  write_residual_csv(c.out / "verify_residual_map.csv", c.model, pi.grid(), r.residual_map);
  *c.log << "verify-mfg: residual=" << r.residual << " worst x=" << wx + 1 << " i=" << wi << "\n";
}

inline void cmd_nagent_gap(const Context& c) {
  std::string source;
  const auto pi = resolve_feedback(c, source);
  io::CsvTable summary({"N", "horizon", "epsilon_N"});
  io::CsvTable points({"N", "x", "k", "nu_1", "gap"});
  json reports = json::array();
  for (int N : c.N_or({4, 8, 16, 32, 64})) {
    const auto rep = consistent_gap(c.model, pi, N, c.T);
    summary.row() << N << c.T << rep.epsilon_N;
    for (const auto& e : rep.entries) points.row() << N << (e.x + 1) << e.k << static_cast<double>(e.k) / N << e.gap;
    reports.push_back({{"N", N}, {"epsilon_N", rep.epsilon_N}, {"method", rep.method}});
    *c.log << "nagent-gap: N=" << N << " epsilon_N=" << rep.epsilon_N << "\n";
  }
  summary.write(c.out / "nagent_gap.csv");
  points.write(c.out / "nagent_gap_points.csv");
  io::write_json_file(c.out / "nagent_gap.json",
                      {{"provenance", c.meta()}, {"policy_source", source}, {"reports", reports}});
}

inline void cmd_nagent_mc(const Context& c) {
  const auto seed = c.require_seed();
  std::string source;
  const auto pi = resolve_feedback(c, source);
  const auto nu0 = nu0_of(c.cfg, c.model);
  const int x = c.cfg.state - 1;
  if (x < 0 || x >= c.model.d) throw ConfigError("config field 'state' is out of range");
  const auto mf = propagate_flow_feedback(c.model, pi, nu0, c.T);
  io::CsvTable st({"N", "x", "init", "samples", "seed", "payoff_mean", "payoff_sd", "payoff_ci99", "exact_J"});
  io::CsvTable ft(concat(concat({"N", "t"}, nu_columns("mu_", c.model.d)), nu_columns("mf_", c.model.d)));
  TupleSpec tuple;
  tuple.feedback = &pi;
  for (int N : c.N_or({16})) {
    const bool iid = c.cfg.init == "iid";
    McInit init = iid ? McInit::iid_from(nu0) : McInit::lattice(x, lattice_counts(nu0, N, x));
    const auto s = mc_simulate(c.model, tuple, N, init, c.T, c.cfg.samples, seed);
    auto& row = st.row() << N << (iid ? 0 : x + 1) << c.cfg.init << s.samples << s.seed << s.payoff_mean << s.payoff_sd
                         << s.payoff_ci99;
    if (!iid && c.model.d == 2 && N >= 2) {
      row << ReplicatingGame(c.model, pi, N, c.T).J(x, init.counts[0]);
    } else {
      row << "";
    }
    for (int t = 0; t <= c.T; ++t) {
      auto& fr = ft.row() << N << t;
      for (double v : s.mean_flow[t]) fr << v;
      for (int y = 0; y < c.model.d; ++y) fr << mf[t][y];
    }
    *c.log << "nagent-mc: N=" << N << " payoff=" << s.payoff_mean << " +- " << s.payoff_ci99 << "\n";
  }
  st.write(c.out / "nagent_mc.csv");
  ft.write(c.out / "nagent_mc_flow.csv");
  io::write_json_file(c.out / "nagent_mc.json", {{"provenance", c.meta(seed)}, {"policy_source", source}});
}

inline void cmd_precommit_gap(const Context& c) {
  const auto nu = nu0_of(c.cfg, c.model);
  TimePolicy pi;
  std::string source;
  if (!c.cfg.time_policy.empty()) {
    source = "file:" + c.cfg.time_policy;
    pi = io::time_policy_from_json(io::read_json_file(c.cfg.time_policy), c.model);
  } else {
    source = "solved";
    const auto init = TimePolicy::constant(constant_row(c.model.d, dirac(c.model.grid, c.cfg.init_action)));
    const auto r = solve_classic(c.model, nu, init, c.T, c.cfg.fixed_point_tol, c.cfg.max_iter, c.cfg.tie_tol);
    if (!r.converged) *c.log << "warning: classic solver did not converge (residual " << r.residual << ")\n";
    pi = r.policy;
  }
  const bool mc = c.cfg.method != "exact", exact = c.cfg.method != "mc";
  const std::uint64_t seed = mc ? c.require_seed() : 0;
  io::CsvTable t({"N", "method", "samples", "seed", "gap", "ci99", "upper"});
  for (int N : c.N_or({8, 32, 128})) {
    if (exact) {
      const auto r = precommit_gap_exact(c.model, pi, nu, N, c.T);
      t.row() << N << "exact" << std::int64_t{0} << std::uint64_t{0} << r.gap << 0.0 << r.gap;
      *c.log << "precommit-gap: N=" << N << " exact=" << r.gap << "\n";
    }
    if (mc) {
      const auto r = precommit_gap(c.model, pi, nu, N, c.T, c.cfg.samples, seed);
      t.row() << N << "mc" << r.samples << r.seed << r.gap << r.ci99 << r.upper();
      *c.log << "precommit-gap: N=" << N << " mc=" << r.gap << " +- " << r.ci99 << "\n";
    }
  }
  t.write(c.out / "precommit_gap.csv");
  io::write_json_file(c.out / "precommit_gap.json",
                      {{"provenance", mc ? c.meta(seed) : c.meta()}, {"policy_source", source}, {"policy", io::to_json(pi)}});
}

inline void cmd_example_3_1(const Context& c) {
  io::CsvTable t({"N", "horizon", "gap", "gap_x1", "gap_x2", "rare_event_prob"});
  const int m = c.cfg.action_m ? c.cfg.action_m : 101;
  for (int N : c.N_or({4, 16, 64, 256})) {
    const auto r = example31_conditional_gap(N, c.T, m);
    t.row() << N << c.T << r.gap << r.gap_by_state[0] << r.gap_by_state[1] << r.rare_event_prob;
    *c.log << "example-3-1: N=" << N << " gap=" << r.gap << " rare_event_prob=" << r.rare_event_prob << "\n";
  }
  t.write(c.out / "example_3_1.csv");
  io::write_json_file(c.out / "example_3_1.json", {{"provenance", c.meta()}});
}

inline void cmd_convergence_sweep(const Context& c) {
  if (c.model.d != 2) throw UnsupportedError("convergence-sweep needs a two-state model");
  std::string source;
  const auto pi = resolve_feedback(c, source);
  const bool mc = c.cfg.method != "exact", exact = c.cfg.method != "mc";
  const std::uint64_t seed = mc ? c.require_seed() : 0;
  const std::vector<int> ts = {1, 2, 4};
  io::CsvTable flow({"N", "x", "nu_1", "t", "method", "discrepancy", "ci99"});
  io::CsvTable val({"N", "x", "nu_1", "discrepancy"});
  io::CsvTable wt({"N", "x", "nu_1", "y", "discrepancy"});
  io::CsvTable sum({"N", "flow_t1", "flow_t2", "flow_t4", "value_sup", "w_sup"});
  const int P = c.cfg.sweep_points;
  for (int N : c.N_or({8, 16, 32, 64, 128, 256})) {
    const ReplicatingGame game(c.model, pi, N, c.T);
    std::vector<double> fmax(ts.size(), 0.0);
    double vmax = 0.0, wmax = 0.0;
    for (int p = 0; p < P; ++p) {
      const auto nu = SimplexPoint::two_state((p + 0.5) / P);
      for (int x = 0; x < 2; ++x) {
        if (exact) {
          const auto fd = flow_discrepancy(c.model, pi, game, x, nu, ts);
          for (std::size_t a = 0; a < ts.size(); ++a) {
            flow.row() << N << (x + 1) << nu[0] << ts[a] << "exact" << fd[a] << 0.0;
            fmax[a] = std::max(fmax[a], fd[a]);
          }
        }
        if (mc) {
          TupleSpec tuple;
          tuple.feedback = &pi;
          const auto ref = propagate_flow_feedback(c.model, pi, nu, ts.back());
          const auto s = mc_simulate(c.model, tuple, N, McInit::lattice(x, lattice_counts(nu, N, x)), ts.back(),
                                     c.cfg.samples, seed, &ref.mu);
          for (std::size_t a = 0; a < ts.size(); ++a) {
            flow.row() << N << (x + 1) << nu[0] << ts[a] << "mc" << s.flow_l1[ts[a]] << s.flow_l1_ci99[ts[a]];
            if (!exact) fmax[a] = std::max(fmax[a], s.flow_l1[ts[a]]);
          }
        }
        const double v = value_discrepancy(c.model, pi, game, x, nu);
        val.row() << N << (x + 1) << nu[0] << v;
        vmax = std::max(vmax, v);
        for (int y = 0; y < 2; ++y) {
          const double w = w_discrepancy(c.model, pi, game, x, nu, y);
          wt.row() << N << (x + 1) << nu[0] << (y + 1) << w;
          wmax = std::max(wmax, w);
        }
      }
    }
    sum.row() << N << fmax[0] << fmax[1] << fmax[2] << vmax << wmax;
    *c.log << "convergence-sweep: N=" << N << " flow(t=1)=" << fmax[0] << " value=" << vmax << " w=" << wmax << "\n";
  }
  flow.write(c.out / "flow_discrepancy.csv");
  val.write(c.out / "value_discrepancy.csv");
  wt.write(c.out / "w_discrepancy.csv");
  sum.write(c.out / "convergence_summary.csv");
  io::write_json_file(c.out / "convergence_sweep.json",
                      {{"provenance", mc ? c.meta(seed) : c.meta()}, {"policy_source", source}});
}

// ---------------------------------------------------------------------------
// Entry point

namespace detail {

inline std::vector<std::pair<double, double>> parse_atoms(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("flag --atoms expects rho:weight pairs separated by commas");
    try {
      out.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("flag --atoms has a malformed entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Runs one subcommand. Returns the process exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"timfg: time-inconsistent mean field games and their N-agent counterparts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TIMFG_VERSION);

  struct Flags {
    std::string config, model, atoms, out, policy, time_policy, init, method;
    int action_m = 0, nu_k = 0, horizon = 0, max_iter = 0, state = 0, sweep_points = 0;
    double tail_eps = 0, tol = 0, tie_tol = 0, init_action = 0, lambda = 0, constant_action = 0;
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
    std::vector<int> N;
    std::vector<double> nu0;
  } f;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"solve-classic", "Best-response iteration for a classic equilibrium from nu0"},
      {"solve-consistent", "Damped Gamma iteration for a consistent (feedback) equilibrium"},
      {"verify-mfg", "Consistent-equilibrium residual of a feedback policy"},
      {"nagent-gap", "Exact consistent epsilon_N of the replicating N-agent tuple (two states)"},
      {"nagent-mc", "Monte Carlo payoffs and flows of the replicating N-agent tuple"},
      {"precommit-gap", "Precommitment gap of a classic equilibrium with iid initial states"},
      {"example-3-1", "Conditional deviation gain at (3/4, 1/4) in the builtin example31 model"},
      {"convergence-sweep", "Finite-N flow, value and W discrepancies against the mean field"}};
  std::vector<CLI::App*> apps;
  for (const auto& sd : subs) {
    const std::string name = sd.first;
    auto* s = app.add_subcommand(name, sd.second);
    apps.push_back(s);
    auto add = [&](const std::string& key, auto& var, const std::string& flag, const std::string& help) {
      opts.emplace_back(key + "@" + name, s->add_option(flag, var, help));
      return opts.back().second;
    };
    add("config", f.config, "--config", "JSON config file; flags override its fields");
    add("model", f.model, "--model", "example31, example43 or a tabulated-model JSON path [example43]");
    add("atoms", f.atoms, "--atoms", "discount atoms rho:weight,... for builtin models");
    add("action_m", f.action_m, "--action-m", "action grid size; 0 keeps the model default [0]");
    add("nu_k", f.nu_k, "--nu-k", "nu-grid resolution K [200]");
    add("tail_eps", f.tail_eps, "--tail-eps", "truncation tolerance for the horizon [1e-10]");
    add("tol", f.tol, "--tol", "fixed-point tolerance [1e-8]");
    add("tie_tol", f.tie_tol, "--tie-tol", "argmax tie tolerance [1e-9]");
    add("horizon", f.horizon, "--horizon", "horizon T; 0 derives it from --tail-eps [0]");
    add("N", f.N, "--N", "population sizes, comma separated")->delimiter(',');
    add("samples", f.samples, "--samples", "Monte Carlo samples [100000]");
    add("seed", f.seed, "--seed", "Monte Carlo seed (required for Monte Carlo)");
    add("out", f.out, "--out", std::string("output directory [$") + kOutDirEnv + " or timfg_out]");
    add("nu0", f.nu0, "--nu0", "initial distribution, comma separated [uniform]")->delimiter(',');
    add("init_action", f.init_action, "--init-action", "initial constant action of the solvers [0.5]");
    add("lambda", f.lambda, "--lambda", "damping in (0, 1] [1]");
    add("max_iter", f.max_iter, "--max-iter", "solver iteration cap [500]");
    add("policy", f.policy, "--policy", "feedback policy JSON [solve-consistent output]");
    add("time_policy", f.time_policy, "--time-policy", "time policy JSON [solve-classic output]");
    add("constant_action", f.constant_action, "--constant-action", "use the constant Dirac feedback policy at u");
    add("state", f.state, "--state", "agent 1's initial state, 1-based [1]");
    add("init", f.init, "--init", "lattice or iid initial states [lattice]");
    add("method", f.method, "--method", "exact, mc or both [exact]");
    add("sweep_points", f.sweep_points, "--sweep-points", "nu sample size for convergence-sweep [20]");
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const std::string sub = chosen->get_name();
    auto given = [&](const std::string& key) {
      for (const auto& [k, o] : opts)
        if (k == key + "@" + sub) return o->count() > 0;
      return false;
    };
    ExperimentConfig cfg;
    if (given("config")) cfg = config_from_json(io::read_json_file(f.config));
    if (given("model")) cfg.model = f.model;
    if (given("atoms")) cfg.atoms = detail::parse_atoms(f.atoms);
    if (given("action_m")) cfg.action_m = f.action_m;
    if (given("nu_k")) cfg.nu_k = f.nu_k;
    if (given("tail_eps")) cfg.tail_eps = f.tail_eps;
    if (given("tol")) cfg.fixed_point_tol = f.tol;
    if (given("tie_tol")) cfg.tie_tol = f.tie_tol;
    if (given("horizon")) cfg.horizon = f.horizon;
    if (given("N")) cfg.N = f.N;
    if (given("samples")) cfg.samples = f.samples;
    if (given("seed")) cfg.seed = f.seed;
    if (given("out")) cfg.output_dir = f.out;
    if (given("nu0")) cfg.nu0 = f.nu0;
    if (given("init_action")) cfg.init_action = f.init_action;
    if (given("lambda")) cfg.lambda = f.lambda;
    if (given("max_iter")) cfg.max_iter = f.max_iter;
    if (given("policy")) cfg.policy = f.policy;
    if (given("time_policy")) cfg.time_policy = f.time_policy;
    if (given("constant_action")) cfg.constant_action = f.constant_action;
    if (given("state")) cfg.state = f.state;
    if (given("init")) cfg.init = f.init;
    if (given("method")) cfg.method = f.method;
    if (given("sweep_points")) cfg.sweep_points = f.sweep_points;
    if (sub == "example-3-1") cfg.model = "example31";
    validate(cfg);

    Context c;
    c.sub = sub;
    c.cfg = cfg;
    c.model = build_model(cfg);
    if (sub == "example-3-1") c.model = example31(cfg.action_m ? cfg.action_m : 101);
    c.T = horizon_of(cfg, c.model);
    c.out = output_dir(cfg);
    c.log = &out;
    fs::create_directories(c.out);

    if (sub == "solve-classic") cmd_solve_classic(c);
    else if (sub == "solve-consistent") cmd_solve_consistent(c);
    else if (sub == "verify-mfg") cmd_verify_mfg(c);
    else if (sub == "nagent-gap") cmd_nagent_gap(c);
    else if (sub == "nagent-mc") cmd_nagent_mc(c);
    else if (sub == "precommit-gap") cmd_precommit_gap(c);
    else if (sub == "example-3-1") cmd_example_3_1(c);
    else if (sub == "convergence-sweep") cmd_convergence_sweep(c);
    return 0;
  } catch (const std::exception& e) {
    err << "timfg: " << e.what() << "\n";
    return 2;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

}  // namespace timfg::cli

#endif  // TIMFG_CLI_HPP_
