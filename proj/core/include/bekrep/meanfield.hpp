#pragma once

#include "bekrep/measure.hpp"
#include "bekrep/optimizers.hpp"
#include "bekrep/representation.hpp"

namespace bekrep {

/// Thrown when a Tarski run detects that consecutive iterates are not
/// ordered, i.e. the adapter is not monotone.
class order_violation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AdapterOutput {
  AdaptedProcess state;  // X
  AdaptedProcess payoff; // Y, terminal-zero
  GeneratorSpec gen;     // f, strictly increasing in ell
};

/// Mean-field representation problem: measure -> (X, Y, f) plus the outcome
/// functional applied to (scenario, X path, inclusive running-max path).
struct MeanFieldProblem {
  const ScenarioTree* tree = nullptr;
  std::function<AdapterOutput(const RandomMeasure&)> adapter;
  std::function<Outcome(const PathRecord&, const AdaptedProcess& X,
                        const std::vector<double>& running_max)>
      psi;
  std::vector<double> levels;  // representation level grid (fixed per run)

  void validate() const;
};

struct FixedPointReport {
  RandomMeasure m_star;
  LhatResult lhat_star;
  double residual_consistency = 0.0;
  double residual_representation = 0.0;
  int iterations = 0;
  std::vector<double> trace;
  bool converged = false;
  std::string message;
};

/// One application of Phi: solve the representation under m and push the
/// outcomes through psi into a conditional law.
RandomMeasure apply_phi(const MeanFieldProblem& problem, const RandomMeasure& m,
                        LhatResult* lhat_out = nullptr);

/// Damped Picard iteration m <- (1-damping) m + damping Phi(m). Terminates
/// when the Levy-Prokhorov step distance falls below tol; non-convergence is
/// reported, not thrown.
FixedPointReport picard_solve(const MeanFieldProblem& problem,
                              const RandomMeasure& m0, double damping,
                              double tol, int max_iter);

enum class TarskiDirection { from_bottom, from_top };

/// Monotone iteration m <- Phi(m) from a lattice extreme, with outcomes
/// quantized to the problem's level grid so stationarity is exact equality.
/// Every consecutive pair is certified by stochastic_order_leq; a violation
/// aborts with order_violation.
FixedPointReport tarski_solve(const MeanFieldProblem& problem,
                              const RandomMeasure& extreme,
                              TarskiDirection direction, int max_iter);

/// Snaps all outcome path values to the problem's level grid (floor).
RandomMeasure quantize_to_levels(const RandomMeasure& m,
                                 const std::vector<double>& levels);

struct AuditReport {
  bool pass = true;
  int pairs_checked = 0;
  std::string witness;  // first violation found
};

/// Randomized monotonicity check: draws ordered pairs m1 <=_p m2 by a
/// monotone push-up coupling of a seed measure and verifies X^{m1} <= X^{m2}
/// node-wise, f^{m1} >= f^{m2} on the level grid, and that Y^{m1} - Y^{m2}
/// is a submartingale (the combination that makes m -> Lhat^m
/// order-preserving).
AuditReport monotonicity_audit(const MeanFieldProblem& problem,
                               const RandomMeasure& seed_measure,
                               int sample_pairs, std::uint64_t seed);

/// Per-slot scalar fixed points y_k solving y = E[phi(L_k + y)] for a base
/// representation table with non-decreasing paths, by bisection to `tol`.
/// The derivative bound sup phi' <= 1 - 1e-6 is certified by sampling.
/// Returns y aligned with slots 0..N-1.
std::vector<double> dimension_reduction_solve(
    const std::vector<std::vector<double>>& L_paths,
    const std::vector<double>& path_probs, const std::function<double(double)>& phi,
    double tol, std::uint64_t bracket_seed = 0);

std::string fixed_point_report_json(const ScenarioTree& tree,
                                    const FixedPointReport& r);

}  // namespace bekrep
