#pragma once

#include <variant>
#include <vector>

#include "bekrep/tree.hpp"

namespace bekrep {

/// f(t, omega, ell) = intercept(t, omega) + slope * ell, slope > 0.
struct AffineGenerator {
  AdaptedProcess intercept;
  double slope = 1.0;
};

/// Piecewise-linear strictly increasing map per node: shared knot grid in
/// ell, one strictly increasing value row per node, extended affinely with
/// slope `ext_slope` outside the knot range so the range is all of R.
struct TableGenerator {
  std::vector<double> knots;
  std::vector<std::vector<double>> values;  // values[node][knot]
  double ext_slope = 1.0;
};

using GeneratorSpec = std::variant<AffineGenerator, TableGenerator>;

void validate_generator(const ScenarioTree& tree, const GeneratorSpec& gen);

double generator_eval(const GeneratorSpec& gen, int node, double ell);
/// Unique ell with generator_eval(gen, node, ell) == y.
double generator_invert(const GeneratorSpec& gen, int node, double y);

/// Smallest slope of the generator in ell (used for bracket sizing).
double generator_min_slope(const GeneratorSpec& gen);
/// Largest slope (Lipschitz constant in ell).
double generator_max_slope(const GeneratorSpec& gen);

/// Per-node root of f(t, ell) * dt = Y_t - E[Y_{t+dt} | F_t] at every
/// non-terminal node (terminal entries are 0). These one-step roots bracket
/// every multi-step root and hence the representation process.
AdaptedProcess one_step_roots(const ScenarioTree& tree, const AdaptedProcess& Y,
                              const GeneratorSpec& gen);

/// Samples an arbitrary per-node strictly increasing map into a
/// TableGenerator on the given knots.
TableGenerator sample_generator(
    const ScenarioTree& tree,
    const std::function<double(int node, double ell)>& f,
    const std::vector<double>& knots, double ext_slope);

}  // namespace bekrep
