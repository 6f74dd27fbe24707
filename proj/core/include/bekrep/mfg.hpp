#pragma once

#include "bekrep/meanfield.hpp"

namespace bekrep {

enum class EngineKind { picard, tarski };

struct EngineConfig {
  std::vector<double> levels;  // representation level grid
  double damping = 1.0;
  double tol = 1e-8;
  int max_iter = 100;
  std::size_t oracle_paths = 16;  // exhaustive certificates up to this size
};

struct PopulationGap {
  double key = 0.0;       // query level or population index
  double best = 0.0;      // brute-force optimum
  double achieved = 0.0;  // value of the emitted optimizer
  double gap = 0.0;       // best - achieved (>= 0 up to solver slack)
};

struct EquilibriumCertificate {
  double consistency_gap = 0.0;
  std::vector<PopulationGap> gaps;
  bool exhaustive = false;  // brute-force verification ran
};

std::string certificate_to_json(const EquilibriumCertificate& c);

/// Affine-tailed convex interpolation of finitely many population rewards:
/// g_ell = g_1 + (ell-1) below 1, (i+1-ell) g_i + (ell-i) g_{i+1} on [i,i+1],
/// g_n + (ell-n) above n.
std::function<double(int, const RandomMeasure&, double)> interpolate_populations(
    std::vector<std::function<double(int, const RandomMeasure&)>> g_list);

/// Throws when the family is not strictly increasing between interior knots
/// at some node for the given measure.
void validate_population_family(
    const ScenarioTree& tree,
    const std::vector<std::function<double(int, const RandomMeasure&)>>& g_list,
    const RandomMeasure& m);

/// Mean stop-time statistic of a measure whose outcome paths encode running
/// maxima: expectation of the (tilted) hitting time of `level`, normalized
/// by the horizon.
double timing_stop_stat(const RandomMeasure& m, double level, double delta,
                        double horizon);

/// Mean of the outcome path values at slot k (a monotone statistic).
double mean_path_stat(const RandomMeasure& m, std::size_t k);
/// Mean of all outcome path values.
double mean_path_stat(const RandomMeasure& m);

struct TimingGame {
  // Finitely many populations to interpolate...
  std::vector<std::function<double(int, const RandomMeasure&)>> populations;
  // ...or a direct family g_ell; used when set.
  std::function<double(int, const RandomMeasure&, double)> family;
  std::function<double(int, const RandomMeasure&)> reward;  // G
  std::function<AdaptedProcess(const RandomMeasure&)> state; // optional X
  double epsilon = 0.0;
  std::function<double(double)> delta_lookup;  // modulus eps -> delta_eps
  std::vector<double> query_levels;
  std::vector<double> table_knots;  // ell sampling grid for the generator
};

struct TimingEquilibrium {
  RandomMeasure m;
  LhatResult lhat;
  std::vector<std::pair<double, StoppingTime>> taus;  // tilted when eps > 0
  EquilibriumCertificate certificate;
  FixedPointReport report;
};

TimingEquilibrium timing_equilibrium(const ScenarioTree& tree,
                                     const TimingGame& game, EngineKind engine,
                                     const EngineConfig& cfg);

struct SingularMfgPopulation {
  double floor = 0.0;
  AdaptedProcess cap;
};

/// Populations share (c, k); only the clamp bounds differ. Caps must be
/// deterministic in time for the measure bookkeeping (the emitted outcomes
/// store the unclamped running max).
struct SingularMfg {
  std::vector<SingularMfgPopulation> populations;
  std::function<double(int, const RandomMeasure&, double)> cost_derivative;
  std::function<double(int, const RandomMeasure&)> control_cost;
  std::function<AdaptedProcess(const RandomMeasure&)> state;  // optional
  std::vector<double> table_knots;
};

struct SingularMfgEquilibrium {
  RandomMeasure m;
  LhatResult lhat;
  std::vector<AdaptedProcess> controls;
  EquilibriumCertificate certificate;
  FixedPointReport report;
};

SingularMfgEquilibrium singular_mfg_equilibrium(const ScenarioTree& tree,
                                                const SingularMfg& game,
                                                EngineKind engine,
                                                const EngineConfig& cfg);

enum class ConsumptionMode { general, dimension_reduction };

struct ConsumptionMfg {
  ConsumptionSpec base;  // u_prime is the mu-free base when u_prime_mu is set
  // Optional interaction u'(t, mu, level); must keep assumptions per mu.
  std::function<double(int, const RandomMeasure&, double)> u_prime_mu;
  // Dimension-reduction interaction phi with derivative in [0, 1).
  std::function<double(double)> phi;
  double eta_bar = 0.0;  // satisfaction band upper clamp (0 = none)
  std::vector<double> table_knots;
};

struct ConsumptionMfgEquilibrium {
  RandomMeasure m;
  LhatResult lhat;
  ConsumptionPlan plan;
  std::vector<double> shifts;  // dimension-reduction scalar fixed points
  EquilibriumCertificate certificate;
  FixedPointReport report;
};

ConsumptionMfgEquilibrium consumption_mfg_equilibrium(const ScenarioTree& tree,
                                                      const ConsumptionMfg& game,
                                                      ConsumptionMode mode,
                                                      EngineKind engine,
                                                      const EngineConfig& cfg);

/// Seed measure for engines: one outcome per atom with a constant path.
RandomMeasure seed_measure(const ScenarioTree& tree, double path_value,
                           std::size_t vec_size = 0, double vec_value = 0.0);

}  // namespace bekrep
