#pragma once

#include <string>
#include <vector>

#include "bekrep/tree.hpp"

namespace bekrep {

/// Left-continuous increasing step path on [0, T) with v(0) = -inf:
/// v(t) = values[k] for t in (breaks[k], breaks[k+1]], breaks[0] = 0 and
/// T = breaks.back().
struct VPlusPath {
  std::vector<double> breaks;
  std::vector<double> values;

  double horizon() const { return breaks.back(); }
  /// Left-continuous evaluation; v(0) = -inf.
  double at(double t) const;
  void validate() const;

  /// Path with a single value on (0, T).
  static VPlusPath constant(double value, double T);
  /// Values on a uniform grid: value(k) on (k*dt, (k+1)*dt].
  static VPlusPath from_grid(const std::vector<double>& values, double dt);
};

/// Levy metric on V+: the smallest eps >= 0 such that
/// v1((t-eps) v 0) - eps <= v2(t) and symmetrically for all t in (0, T).
/// Exact for step paths; the infimum is located by bisection to 1e-10 from a
/// certified feasible upper endpoint.
double levy_distance(const VPlusPath& v1, const VPlusPath& v2);
/// Feasibility of a given eps (exposed for the grid-search test oracle).
bool levy_feasible(const VPlusPath& v1, const VPlusPath& v2, double eps);

/// Truncated infinite-horizon metric: sum_{n=1..M} 2^-n (d_L on [0,n) ^ 1).
/// Paths are extended beyond their last breakpoint by their final value.
/// The reported value is within 2^-M of the infinite sum.
double levy_distance_truncated(const VPlusPath& v1, const VPlusPath& v2, int M);

/// Running-max path of one scenario: value R_k on slot (t_k, t_{k+1}].
VPlusPath running_max_path(const ScenarioTree& tree,
                           const AdaptedProcess& running_max,
                           const PathRecord& path);

/// JSON per the external interface: {times, values, "v0":"-inf"}.
std::string vplus_to_json(const VPlusPath& p);
VPlusPath vplus_from_json(const std::string& text);

}  // namespace bekrep
