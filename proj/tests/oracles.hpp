#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bekrep/generator.hpp"
#include "bekrep/representation.hpp"
#include "bekrep/tree.hpp"
#include "bekrep/vplus.hpp"

namespace oracle {

inline double uniform(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }
inline double uniform(std::mt19937_64& rng, double a, double b) {
  return a + (b - a) * uniform(rng);
}

// E[payoff_tau + sum_{s<tau} running_s dt] by direct path summation.
inline double stopping_objective(const bekrep::ScenarioTree& tree,
                                 const bekrep::AdaptedProcess& payoff,
                                 const bekrep::AdaptedProcess& running,
                                 const bekrep::StoppingTime& tau) {
  const double dt = tree.grid().dt();
  double acc = 0.0;
  for (const auto& path : tree.paths()) {
    const int stop_t = bekrep::stop_time_index(tree, tau, path);
    double run = 0.0;
    for (int id : path.nodes) {
      if (tree.node(id).t >= stop_t) break;
      run += running[id] * dt;
    }
    acc += path.probability * (payoff[bekrep::stop_node(tree, tau, path)] + run);
  }
  return acc;
}

// Exhaustive maximum of the stopping objective.
inline double best_stopping_value(const bekrep::ScenarioTree& tree,
                                  const bekrep::AdaptedProcess& payoff,
                                  const bekrep::AdaptedProcess& running) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& tau : bekrep::enumerate_stopping_times(tree))
    best = std::max(best, stopping_objective(tree, payoff, running, tau));
  return best;
}

// Chord-min transcription of the deterministic envelope solver.
inline std::vector<double> chord_min_L(const std::vector<double>& Y, double dt) {
  const int N = static_cast<int>(Y.size()) - 1;
  std::vector<double> L(N);
  for (int t = 0; t < N; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (int s = t + 1; s <= N; ++s)
      best = std::min(best, (Y[t] - Y[s]) / ((s - t) * dt));
    L[t] = best;
  }
  return L;
}

// Dense feasibility scan for the Levy distance.
inline double levy_grid_search(const bekrep::VPlusPath& a,
                               const bekrep::VPlusPath& b, double hi,
                               int steps = 20000) {
  for (int i = 0; i <= steps; ++i) {
    const double eps = hi * i / steps;
    if (bekrep::levy_feasible(a, b, eps)) return eps;
  }
  return hi;
}

// CDF dominance check for d = 1 stochastic order.
inline bool cdf_dominates(std::vector<std::pair<double, double>> mu,
                          std::vector<std::pair<double, double>> nu) {
  // mu <= nu iff F_mu(x) >= F_nu(x) for all x.
  std::vector<double> xs;
  for (auto& [w, x] : mu) xs.push_back(x);
  for (auto& [w, x] : nu) xs.push_back(x);
  std::sort(xs.begin(), xs.end());
  auto cdf = [](const std::vector<std::pair<double, double>>& m, double x) {
    double acc = 0.0;
    for (const auto& [w, v] : m)
      if (v <= x + 1e-12) acc += w;
    return acc;
  };
  for (double x : xs)
    if (cdf(mu, x) < cdf(nu, x) - 1e-12) return false;
  return true;
}

// Random tree with <= `periods` periods and `branches` branches per node.
inline bekrep::ScenarioTree random_tree(std::mt19937_64& rng, int periods,
                                        int branches, int atoms = 1,
                                        double horizon = 1.0) {
  std::vector<bekrep::TreeNode> nodes;
  nodes.push_back(bekrep::TreeNode{0, 0, -1, {}, {}});
  std::vector<int> frontier = {0};
  for (int t = 1; t <= periods; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      std::vector<double> probs(branches);
      double s = 0.0;
      for (auto& p : probs) {
        p = 0.15 + uniform(rng);
        s += p;
      }
      for (auto& p : probs) p /= s;
      for (int b = 0; b < branches; ++b) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(bekrep::TreeNode{id, t, parent, {}, {}});
        nodes[parent].children.push_back(id);
        nodes[parent].prob.push_back(probs[b]);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  std::map<int, int> atom_map;
  if (atoms > 1) {
    int i = 0;
    for (int leaf : frontier) atom_map[leaf] = (i++) % atoms;
  }
  return bekrep::ScenarioTree(bekrep::TimeGrid{horizon, periods},
                              std::move(nodes), std::move(atom_map));
}

// Random terminal-zero payoff.
inline bekrep::AdaptedProcess random_Y(std::mt19937_64& rng,
                                       const bekrep::ScenarioTree& tree,
                                       double scale = 1.0) {
  bekrep::AdaptedProcess Y = bekrep::AdaptedProcess::constant(tree, 0.0);
  for (const auto& n : tree.nodes())
    if (!n.children.empty()) Y[n.id] = scale * (2.0 * uniform(rng) - 1.0);
  return Y;
}

// Random generator: affine or a strictly increasing table with slopes <= 1.
inline bekrep::GeneratorSpec random_generator(std::mt19937_64& rng,
                                              const bekrep::ScenarioTree& tree,
                                              bool table) {
  if (!table) {
    bekrep::AffineGenerator g;
    g.intercept = bekrep::AdaptedProcess::constant(tree, 0.0);
    for (int i = 0; i < tree.size(); ++i)
      g.intercept[i] = 0.5 * (2.0 * uniform(rng) - 1.0);
    g.slope = 0.5 + 0.5 * uniform(rng);
    return g;
  }
  bekrep::TableGenerator g;
  const int K = 9;
  g.knots.resize(K);
  for (int k = 0; k < K; ++k) g.knots[k] = -6.0 + 12.0 * k / (K - 1);
  g.ext_slope = 0.4 + 0.4 * uniform(rng);
  g.values.resize(tree.size());
  const double gap = g.knots[1] - g.knots[0];
  for (int i = 0; i < tree.size(); ++i) {
    double v = -4.0 + 0.5 * uniform(rng);
    for (int k = 0; k < K; ++k) {
      g.values[i].push_back(v);
      v += gap * (0.1 + 0.9 * uniform(rng));  // slope in (0.1, 1.0)
    }
  }
  return g;
}

}  // namespace oracle
