#pragma once

#include "bekrep/representation.hpp"

namespace bekrep {

/// Smallest and biggest optimal stopping times for level `ell`: the first
/// slot whose inclusive running max reaches (resp. strictly exceeds) the
/// level. Equivalently tau = inf{t : Lhat_{t+dt} >= ell} with the strict
/// running max.
std::pair<StoppingTime, StoppingTime> hitting_times(const ScenarioTree& tree,
                                                    const LhatResult& lhat,
                                                    double level);

/// Hitting time of the linearly tilted running max R_t + delta * (t + dt)
/// (the epsilon-equilibrium construction for games of timing).
StoppingTime tilted_hitting_time(const ScenarioTree& tree,
                                 const LhatResult& lhat, double level,
                                 double delta);

/// Monotone-follower control problem data. The representation inputs the
/// optimizer expects are Y = -control_cost with generator cost_derivative.
struct SingularControlSpec {
  double floor = 0.0;
  AdaptedProcess cap;              // non-decreasing path-wise, >= floor
  GeneratorSpec cost_derivative;   // c', strictly increasing in ell
  AdaptedProcess control_cost;     // k, with k_T = 0

  void validate(const ScenarioTree& tree) const;
};

/// Theta*_t = floor v R_t ^ cap_t: the clamp of the running max.
AdaptedProcess singular_optimizer(const ScenarioTree& tree,
                                  const LhatResult& lhat,
                                  const SingularControlSpec& spec);

/// J(Theta) = E[sum c(t, Theta_t) dt + sum k_t dTheta_t], with c recovered
/// from c' by exact piecewise integration from the floor (costs are reported
/// relative to that gauge).
double singular_cost(const ScenarioTree& tree, const SingularControlSpec& spec,
                     const AdaptedProcess& control);

/// Consumption problem data; u_prime(node, level) must be positive and
/// strictly decreasing in the satisfaction level.
struct ConsumptionSpec {
  AdaptedProcess rate;  // interest rate process r
  double beta = 1.0;
  double eta = 1.0;     // initial satisfaction level, > 0
  double lambda = 1.0;  // Lagrange multiplier, > 0
  std::function<double(int node, double level)> u_prime;

  void validate(const ScenarioTree& tree) const;
};

struct ConsumptionPlan {
  AdaptedProcess satisfaction;  // Y^C
  AdaptedProcess cumulative;    // C
  double budget = 0.0;
  /// Discounted tail mass of the horizon truncation:
  /// e^{-beta T} / beta * max_node u'(node, eta).
  double truncation_tail = 0.0;
};

/// Representation inputs for the consumption problem:
/// Y_t = -lambda e^{-beta t - sum r dt}, f(t, ell) = -beta e^{-beta t}
/// u'(t, -e^{-beta t}/ell) for ell < 0 glued to ell on ell >= 0, sampled on
/// `knots` (all < 0).
std::pair<AdaptedProcess, GeneratorSpec> consumption_representation_inputs(
    const ScenarioTree& tree, const ConsumptionSpec& spec,
    const std::vector<double>& knots);

/// Default negative knot span for the consumption generator.
std::vector<double> consumption_default_knots(const ConsumptionSpec& spec,
                                              int count = 513,
                                              double eta_bar_factor = 64.0);

/// Satisfaction Y^C_t = e^{-beta t}(eta v (-1/R_t)), consumption increments
/// dC_t = e^{-beta t} (G_t - G_{t-dt}) / beta with G = eta v (-1/R), and the
/// budget E[sum e^{-sum r dt} dC]. Rejects when the running max is not
/// strictly negative everywhere.
ConsumptionPlan consumption_from_lhat(const ScenarioTree& tree,
                                      const LhatResult& lhat,
                                      const ConsumptionSpec& spec);

/// U(C) = E[sum u(t, Y^C_t) dt] with u integrated from u_prime (gauge:
/// u(t, eta e^{-beta t}) = 0) and Y^C rebuilt from the increments of C.
double consumption_utility(const ScenarioTree& tree, const ConsumptionSpec& spec,
                           const AdaptedProcess& C);

/// JSON per the external interface:
/// {tau:{level->stop nodes}, theta_star:{node->value},
///  consumption:{Y_C, C, budget}}.
std::string optimizer_report_json(
    const ScenarioTree& tree,
    const std::vector<std::pair<double, StoppingTime>>& taus,
    const AdaptedProcess* theta_star, const ConsumptionPlan* plan);

}  // namespace bekrep
