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

// Models given as tables: transition[x][nu_idx][u_idx][y] and
// g[x][nu_idx][u_idx] on a uniform action grid and the simplex lattice
// NuGrid::simplex(d, K), with f = delta(t) g. Off-grid nu follows the
// FeedbackPolicy rule (linear in nu(1) for d = 2, nearest point otherwise);
// off-grid u is linear between the two neighbouring grid actions.

#ifndef TIMFG_TABULATED_MODEL_HPP_
#define TIMFG_TABULATED_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "timfg/errors.hpp"
#include "timfg/model.hpp"
#include "timfg/policy.hpp"

namespace timfg {

namespace detail {

struct TabulatedData {
  int d = 0;
  ActionGrid grid;
  NuGrid nu_grid;
  std::vector<double> P;  // [((x * n_nu + i) * m + j) * d + y]
  std::vector<double> g;  // [(x * n_nu + i) * m + j]

  int n_nu() const { return nu_grid.size(); }
  int m() const { return grid.size(); }

  // Grid neighbours of nu with weights.
  void nu_weights(const SimplexPoint& nu, int& i0, int& i1, double& th) const {
    if (nu_grid.is_uniform2()) {
      auto [i, theta] = nu_grid.bracket(nu);
      i0 = i;
      i1 = i + 1;
      th = theta;
    } else {
      i0 = i1 = nu_grid.nearest(nu);
      th = 0.0;
    }
  }

  void u_weights(double u, int& j0, int& j1, double& th) const {
    const double span = grid.hi() - grid.lo();
    const double s = span > 0.0 ? (u - grid.lo()) / span * (m() - 1) : 0.0;
    j0 = std::clamp(static_cast<int>(std::floor(s)), 0, std::max(0, m() - 2));
    j1 = std::min(j0 + 1, m() - 1);
    th = m() > 1 ? std::clamp(s - j0, 0.0, 1.0) : 0.0;
  }

  void kernel(int x, const SimplexPoint& nu, double u, std::span<double> out) const {
    int i0, i1, j0, j1;
    double a, b;
    nu_weights(nu, i0, i1, a);
    u_weights(u, j0, j1, b);
    for (int y = 0; y < d; ++y) {
      auto at = [&](int i, int j) { return P[((static_cast<std::size_t>(x) * n_nu() + i) * m() + j) * d + y]; };
      out[y] = (1 - a) * ((1 - b) * at(i0, j0) + b * at(i0, j1)) + a * ((1 - b) * at(i1, j0) + b * at(i1, j1));
    }
  }

  double stage(int x, const SimplexPoint& nu, double u) const {
    int i0, i1, j0, j1;
    double a, b;
    nu_weights(nu, i0, i1, a);
    u_weights(u, j0, j1, b);
    auto at = [&](int i, int j) { return g[(static_cast<std::size_t>(x) * n_nu() + i) * m() + j]; };
    return (1 - a) * ((1 - b) * at(i0, j0) + b * at(i0, j1)) + a * ((1 - b) * at(i1, j0) + b * at(i1, j1));
  }
};

inline const nlohmann::json& field(const nlohmann::json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ConfigError(std::string("tabulated model: missing field '") + name + "'");
  return j.at(name);
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("tabulated model: field '" + what + "' has the wrong type");
  }
}

}  // namespace detail

inline ModelSpec load_tabulated_model(const nlohmann::json& j, std::string name = "tabulated") {
  auto data = std::make_shared<detail::TabulatedData>();
  data->d = detail::get_as<int>(detail::field(j, "d"), "d");
  if (data->d < 2) throw ConfigError("tabulated model: field 'd' must be >= 2");
  const auto& ag = detail::field(j, "action_grid");
  const int m = detail::get_as<int>(detail::field(ag, "m"), "action_grid.m");
  data->grid = ActionGrid::uniform(detail::get_as<double>(detail::field(ag, "lo"), "action_grid.lo"),
                                   detail::get_as<double>(detail::field(ag, "hi"), "action_grid.hi"), m);
  const int K = detail::get_as<int>(detail::field(j, "nu_grid"), "nu_grid");
  if (K < 1) throw ConfigError("tabulated model: field 'nu_grid' must be >= 1");
  data->nu_grid = NuGrid::simplex(data->d, K);
  const int d = data->d, n = data->n_nu();

  const auto P = detail::get_as<std::vector<std::vector<std::vector<std::vector<double>>>>>(detail::field(j, "transition"), "transition");
  const auto g = detail::get_as<std::vector<std::vector<std::vector<double>>>>(detail::field(j, "g"), "g");
  if (static_cast<int>(P.size()) != d || static_cast<int>(g.size()) != d)
    throw ConfigError("tabulated model: fields 'transition' and 'g' need one entry per state");
  for (int x = 0; x < d; ++x) {
    if (static_cast<int>(P[x].size()) != n || static_cast<int>(g[x].size()) != n)
      throw ConfigError("tabulated model: 'transition' and 'g' need " + std::to_string(n) + " nu entries per state");
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(P[x][i].size()) != m || static_cast<int>(g[x][i].size()) != m)
        throw ConfigError("tabulated model: 'transition' and 'g' need " + std::to_string(m) + " action entries");
      for (int jj = 0; jj < m; ++jj) {
        const auto& row = P[x][i][jj];
        if (static_cast<int>(row.size()) != d) throw ConfigError("tabulated model: 'transition' rows need d entries");
        double s = 0.0;
        for (double v : row) {
          if (!std::isfinite(v) || v < 0.0) throw ConfigError("tabulated model: 'transition' has a negative entry");
          s += v;
          data->P.push_back(v);
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("tabulated model: 'transition' row does not sum to 1");
        if (!std::isfinite(g[x][i][jj])) throw ConfigError("tabulated model: 'g' has a non-finite entry");
        data->g.push_back(g[x][i][jj]);
      }
    }
  }
  const auto& disc = detail::field(j, "discount");
  auto atoms = detail::get_as<std::vector<std::pair<double, double>>>(detail::field(disc, "atoms"), "discount.atoms");

  ModelSpec model;
  model.name = std::move(name);
  model.d = d;
  model.grid = data->grid;
  model.kernel = [data](int x, const SimplexPoint& nu, double u, std::span<double> out) { data->kernel(x, nu, u, out); };
  model.reward = SeparableReward{[data](int x, const SimplexPoint& nu, double u) { return data->stage(x, nu, u); },
                                 DiscountSpec::atoms(std::move(atoms))};
  double sup = 0.0, lip = 0.0;
  for (double v : data->g) sup = std::max(sup, std::abs(v));
  const double h = m > 1 ? data->grid[1] - data->grid[0] : 1.0;
  for (int x = 0; x < d; ++x)
    for (int i = 0; i < n; ++i)
      for (int jj = 0; jj + 1 < m; ++jj) {
        const std::size_t a = (static_cast<std::size_t>(x) * n + i) * m + jj;
        double diff = std::abs(data->g[a + 1] - data->g[a]) * model.discount()->delta(0);
        for (int y = 0; y < d; ++y) diff += std::abs(data->P[(a + 1) * d + y] - data->P[a * d + y]);
        lip = std::max(lip, diff / h);
      }
  model.reward_sup = sup;
  model.lipschitz_u = lip;
  return model;
}

inline ModelSpec load_tabulated_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tabulated model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("tabulated model file '" + path + "' is not valid JSON: " + e.what());
  }
  return load_tabulated_model(j, "tabulated:" + path);
}

}  // namespace timfg

#endif  // TIMFG_TABULATED_MODEL_HPP_
