#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bekrep/tree.hpp"
#include "bekrep/vplus.hpp"

namespace bekrep {

namespace detail {

/// Max flow on a small directed graph with double capacities (Dinic).
/// Deterministic; augmenting below 1e-12 residual is treated as saturated.
class MaxFlow {
public:
  explicit MaxFlow(int n);
  void add_edge(int from, int to, double cap);
  double run(int source, int sink);

private:
  struct Edge {
    int to;
    double cap;
    int rev;
  };
  bool bfs(int s, int t);
  double dfs(int v, int t, double f);
  std::vector<std::vector<Edge>> g_;
  std::vector<int> level_, iter_;
};

}  // namespace detail

/// One support point of a finite-support distribution: a step path, a real
/// vector, or a composite of both (either part may be empty).
struct Outcome {
  std::vector<double> path;  // V+ path values on the measure's shared grid
  std::vector<double> vec;

  bool operator==(const Outcome&) const = default;
};

/// Max of the Levy distance between the path parts (on the shared grid) and
/// the sup distance between the vector parts.
double outcome_distance(const Outcome& a, const Outcome& b, double dt);
/// Componentwise order on path x vec.
bool outcome_leq(const Outcome& a, const Outcome& b);

struct WeightedOutcome {
  double w = 0.0;
  Outcome o;
};

struct MeasureAtom {
  double prob = 1.0;                     // P(atom)
  std::vector<WeightedOutcome> support;  // weights sum to 1 per atom
};

/// G-measurable random measure on a finite-partition common noise: one
/// finite-support distribution per atom.
struct RandomMeasure {
  std::vector<MeasureAtom> atoms;
  double dt = 1.0;  // slot width of the path parts

  void validate() const;
  /// Merges outcomes closer than `merge_eps`, drops weights below `drop_eps`,
  /// renormalizes. Deterministic.
  void prune(double merge_eps = 1e-9, double drop_eps = 1e-12);
};

/// Levy-Prokhorov distance between two finite-support distributions with a
/// precomputed distance matrix: the smallest eps such that some coupling puts
/// mass >= 1 - eps on pairs at distance <= eps. Bisection on eps with
/// feasibility by max flow; accurate to 1e-9.
double levy_prokhorov(const std::vector<double>& w1,
                      const std::vector<double>& w2,
                      const std::vector<std::vector<double>>& dist);
/// Same on two atoms' supports using outcome_distance.
double levy_prokhorov(const MeasureAtom& a, const MeasureAtom& b, double dt);
/// Atom-probability-weighted average of the per-atom distances.
double levy_prokhorov(const RandomMeasure& a, const RandomMeasure& b);

/// Multivariate stochastic order mu <=_p nu on finite supports in R^d:
/// existence of a coupling supported on {x <= y componentwise}, decided by
/// max-flow saturation to 1e-12.
bool stochastic_order_leq(const std::vector<std::pair<double, std::vector<double>>>& mu,
                          const std::vector<std::pair<double, std::vector<double>>>& nu);
/// Per-atom order of random measures (path and vec parts concatenated).
bool stochastic_order_leq(const RandomMeasure& a, const RandomMeasure& b);

/// Per-atom reweighted empirical distribution of a path functional:
/// weight = path probability / atom probability.
RandomMeasure conditional_law(const ScenarioTree& tree,
                              const std::function<Outcome(const PathRecord&)>& functional);

/// JSON per the external interface:
/// {atoms:[{weight_total, support:[{w, outcome}]}]}.
std::string measure_to_json(const RandomMeasure& m);
RandomMeasure measure_from_json(const std::string& text);

}  // namespace bekrep
