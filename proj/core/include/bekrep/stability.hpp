#pragma once

#include "bekrep/representation.hpp"
#include "bekrep/vplus.hpp"

namespace bekrep {

/// Comparison record for the deterministic truncated-ramp families
/// Y^n_t = s * (t - 1/2) on [1/2, 1/2 + 1/n] (s = 1 or n), f(t, ell) = ell,
/// T = 1, solved on a uniform grid.
struct CounterexampleRecord {
  int n = 0;
  int grid_steps = 0;
  double dt = 0.0;
  std::vector<double> L;  // deterministic solver output, slots 0..N-1

  /// Max error against the printed closed form on [0, 1/2], where the closed
  /// form is the envelope derivative.
  double max_formula_error_first_half = 0.0;
  double value_at_half = 0.0;    // family i: L_{1/2}; family ii: Lhat_{1/2}
  double formula_at_half = 0.0;  // -1 resp. -2n/(n+2)
  /// |Lhat^n_{1/2} - Lhat_{1/2}|, the pointwise running-max gap at 1/2.
  double runmax_gap_at_half = 0.0;
  double dl_computed = 0.0;  // Levy distance, solver running max vs limit
  double dl_formula = 0.0;   // Levy distance, printed-formula running max vs limit
};

/// Remark-family (i): Y^n_t = (t - 1/2) 1, L^n -> pointwise divergence at
/// 1/2 while the running max converges. grid_steps must be a multiple of 2n.
CounterexampleRecord counterexample_i(int n, int grid_steps);
/// Remark-family (ii): Y^n_t = n (t - 1/2) 1; the running max gap at 1/2
/// approaches 2.
CounterexampleRecord counterexample_ii(int n, int grid_steps);

/// Indexed perturbations (Y^n, f_n) of a base pair on a tree, with the
/// convergence budget e_n = max over probe levels of E[int |f_n - f| dt]
/// + E[sup_t |Y^n - Y|].
struct PerturbationFamily {
  AdaptedProcess base_Y;
  GeneratorSpec base_gen;
  std::function<std::pair<AdaptedProcess, GeneratorSpec>(int n)> perturbed;
  std::vector<int> indices;
  std::vector<double> probe_levels;
};

double convergence_budget(const ScenarioTree& tree,
                          const PerturbationFamily& family, int n);

struct SweepPoint {
  int n = 0;
  double e_n = 0.0;
  double p_dl_exceed = 0.0;  // P[d_L(Lhat^n, Lhat) >= eps]
  double max_dl = 0.0;
  double mean_dlp = 0.0;  // E[d_LP(law(Lhat^n | G), law(Lhat | G))]
};

/// Empirical transcription of the stability theorem: distances along the
/// family, to be checked monotone against e_n (diagnostic, never throws).
std::vector<SweepPoint> stability_sweep(const ScenarioTree& tree,
                                        const PerturbationFamily& family,
                                        const std::vector<double>& levels,
                                        double eps);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct HittingConvergencePoint {
  int n = 0;
  double p_exceed = 0.0;  // P[|tau^n ^ N - tau ^ N| > eps]
};

struct HittingConvergenceReport {
  bool exceptional_level = false;  // tau_ell != tau'_ell somewhere: skipped
  std::vector<HittingConvergencePoint> points;
};

HittingConvergenceReport hitting_time_convergence(
    const ScenarioTree& tree, const PerturbationFamily& family, double level,
    const std::vector<double>& solver_levels, int truncate_index, double eps);

}  // namespace bekrep
