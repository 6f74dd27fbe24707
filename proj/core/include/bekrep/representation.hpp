#pragma once

#include <optional>

#include "bekrep/generator.hpp"
#include "bekrep/tree.hpp"

namespace bekrep {

struct SnellResult {
  AdaptedProcess envelope;
  StoppingTime smallest;
  double value = 0.0;  // envelope at the root
};

/// Snell envelope of sup_tau E[payoff_tau + sum_{s<tau} running_s * dt] by
/// backward induction. The returned stopping time stops at the first node
/// where the immediate payoff attains the envelope (ties stop early at
/// tolerance 1e-12), which is the smallest optimal stopping time.
SnellResult snell_smallest_optimal(const ScenarioTree& tree,
                                   const AdaptedProcess& payoff,
                                   const AdaptedProcess& running);

/// Unique ell with E[sum_{t<=s<sigma} f(s, ell) dt | F_node] =
/// Y_node - E[Y_sigma | F_node]. Requires sigma strictly later than `node`
/// on the subtree. Closed form for affine generators, bisection otherwise.
double ell_root(const ScenarioTree& tree, const AdaptedProcess& Y,
                const GeneratorSpec& gen, int node, const StoppingTime& sigma);

/// Output of a representation solve. `running_max` is the inclusive running
/// maximum R_t = max_{s<=t} L_s (constant across each terminal slot), `lhat`
/// the strict one Lhat_t = max_{s<t} L_s with Lhat_0 = -inf; the two are
/// linked by Lhat_v = R_parent(v).
struct LhatResult {
  AdaptedProcess running_max;
  AdaptedProcess lhat;
  std::optional<AdaptedProcess> ell;  // L itself when the method produces it
  std::vector<double> levels;
  std::vector<StoppingTime> stop_times;  // aligned with `levels`
  double residual = 0.0;
  double grid_cell = 0.0;
};

/// Level grid spanning the one-step-root range of (Y, f); these roots bracket
/// every multi-step root and hence the whole representation process.
std::vector<double> default_level_grid(const ScenarioTree& tree,
                                       const AdaptedProcess& Y,
                                       const GeneratorSpec& gen,
                                       int count = 257);

/// Brute-force oracle: L_t = min over all enumerated strictly-later stopping
/// times sigma of ell_root(t, sigma). Exact up to root finding; refuses on
/// trees the stopping-time enumeration refuses.
LhatResult solve_essinf_bruteforce(const ScenarioTree& tree,
                                   const AdaptedProcess& Y,
                                   const GeneratorSpec& gen,
                                   std::size_t max_paths = 64);

/// Level-grid method: one Snell solve per level ell with running reward
/// f(., ell); the running maximum is recovered from the family of smallest
/// optimal stopping times, exact to one grid cell.
LhatResult solve_level_grid(const ScenarioTree& tree, const AdaptedProcess& Y,
                            const GeneratorSpec& gen,
                            const std::vector<double>& levels);

/// Deterministic solver for f(t, ell) = ell: L_t is the initial slope of the
/// lower convex envelope of s -> -Y_s on [t, T]. Input is Y on the full grid
/// with Y_N = 0; output is L at times 0..N-1.
std::vector<double> solve_deterministic_convex_envelope(
    const std::vector<double>& Y, double dt);

/// Max residual of Y_tau = E[sum_{tau<=t<T} f(t, sup_{tau<=s<=t} L_s) dt |
/// F_tau] over the stop nodes of every supplied start. Uses the stored L when
/// available, otherwise re-runs per-level Snell solves restarted at each stop
/// node (cached per node).
double verify_representation(const ScenarioTree& tree, const AdaptedProcess& Y,
                             const GeneratorSpec& gen, const LhatResult& lhat,
                             const std::vector<StoppingTime>& starts);

/// JSON per the external interface:
/// {levels, lhat:{node->value|"-inf"}, residual, stop_times:{level->[nodes]}}.
std::string lhat_to_json(const ScenarioTree& tree, const LhatResult& r);

}  // namespace bekrep
