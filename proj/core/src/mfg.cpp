#include "bekrep/mfg.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace bekrep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string certificate_to_json(const EquilibriumCertificate& c) {
  nlohmann::ordered_json j;
  j["consistency_gap"] = c.consistency_gap;
  j["exhaustive"] = c.exhaustive;
  j["gaps"] = nlohmann::ordered_json::array();
  for (const auto& g : c.gaps)
    j["gaps"].push_back({{"key", g.key},
                         {"best", g.best},
                         {"achieved", g.achieved},
                         {"gap", g.gap}});
  return j.dump(2);
}

std::function<double(int, const RandomMeasure&, double)> interpolate_populations(
    std::vector<std::function<double(int, const RandomMeasure&)>> g_list) {
  if (g_list.empty())
    throw std::invalid_argument("interpolate_populations: empty family");
  const int n = static_cast<int>(g_list.size());
  return [g_list = std::move(g_list), n](int node, const RandomMeasure& m,
                                         double ell) {
    if (ell <= 1.0) return g_list[0](node, m) + (ell - 1.0);
    if (ell >= n) return g_list[n - 1](node, m) + (ell - n);
    const int i = std::min(static_cast<int>(std::floor(ell)), n - 1);
    const double lo = g_list[i - 1](node, m);
    const double hi = g_list[i](node, m);
    return (i + 1 - ell) * lo + (ell - i) * hi;
  };
}

void validate_population_family(
    const ScenarioTree& tree,
    const std::vector<std::function<double(int, const RandomMeasure&)>>& g_list,
    const RandomMeasure& m) {
  for (const auto& n : tree.nodes()) {
    for (std::size_t i = 1; i < g_list.size(); ++i) {
      if (!(g_list[i - 1](n.id, m) < g_list[i](n.id, m)))
        throw std::invalid_argument(
            "population family not strictly increasing between populations " +
            std::to_string(i) + " and " + std::to_string(i + 1) + " at node " +
            std::to_string(n.id));
    }
  }
}

double timing_stop_stat(const RandomMeasure& m, double level, double delta,
                        double horizon) {
  double acc = 0.0;
  for (const auto& atom : m.atoms) {
    double a = 0.0;
    for (const auto& wo : atom.support) {
      const std::size_t slots = wo.o.path.size();
      double tau = horizon;
      for (std::size_t k = 0; k < slots; ++k) {
        const double tilt = delta * m.dt * (k + 1);
        if (wo.o.path[k] + tilt >= level) {
          tau = m.dt * k;
          break;
        }
      }
      a += wo.w * tau;
    }
    acc += atom.prob * a;
  }
  return acc / horizon;
}

double mean_path_stat(const RandomMeasure& m, std::size_t k) {
  double acc = 0.0;
  for (const auto& atom : m.atoms) {
    double a = 0.0;
    for (const auto& wo : atom.support) a += wo.w * wo.o.path.at(k);
    acc += atom.prob * a;
  }
  return acc;
}

double mean_path_stat(const RandomMeasure& m) {
  double acc = 0.0;
  for (const auto& atom : m.atoms) {
    double a = 0.0;
    for (const auto& wo : atom.support) {
      double s = 0.0;
      for (double x : wo.o.path) s += x;
      a += wo.w * (wo.o.path.empty() ? 0.0 : s / wo.o.path.size());
    }
    acc += atom.prob * a;
  }
  return acc;
}

RandomMeasure seed_measure(const ScenarioTree& tree, double path_value,
                           std::size_t vec_size, double vec_value) {
  RandomMeasure m;
  m.dt = tree.grid().dt();
  m.atoms.resize(tree.atom_count());
  for (int a = 0; a < tree.atom_count(); ++a) {
    m.atoms[a].prob = tree.atom_probability(a);
    WeightedOutcome wo;
    wo.w = 1.0;
    wo.o.path.assign(tree.grid().steps, path_value);
    wo.o.vec.assign(vec_size, vec_value);
    m.atoms[a].support.push_back(std::move(wo));
  }
  return m;
}

namespace {

RandomMeasure extreme_measure(const MeanFieldProblem& problem, double value) {
  RandomMeasure seed = seed_measure(*problem.tree, value);
  RandomMeasure probe = apply_phi(problem, seed);
  for (auto& atom : probe.atoms)
    for (auto& wo : atom.support)
      for (double& x : wo.o.path) x = value;
  probe.prune();
  return probe;
}

FixedPointReport run_engine(const MeanFieldProblem& problem, EngineKind engine,
                            const EngineConfig& cfg) {
  if (engine == EngineKind::picard) {
    RandomMeasure m0 = apply_phi(problem, seed_measure(*problem.tree,
                                                       cfg.levels.front()));
    return picard_solve(problem, m0, cfg.damping, cfg.tol, cfg.max_iter);
  }
  RandomMeasure bottom = extreme_measure(problem, cfg.levels.front());
  return tarski_solve(problem, bottom, TarskiDirection::from_bottom,
                      cfg.max_iter);
}

double timing_objective(const ScenarioTree& tree, const AdaptedProcess& g_ell,
                        const AdaptedProcess& G, const StoppingTime& tau) {
  const double dt = tree.grid().dt();
  double acc = 0.0;
  for (const auto& path : tree.paths()) {
    double run = 0.0;
    const int stop_t = stop_time_index(tree, tau, path);
    for (int id : path.nodes) {
      if (tree.node(id).t >= stop_t) break;
      run += g_ell[id] * dt;
    }
    acc += path.probability * (run + G[stop_node(tree, tau, path)]);
  }
  return acc;
}

}  // namespace

TimingEquilibrium timing_equilibrium(const ScenarioTree& tree,
                                     const TimingGame& game, EngineKind engine,
                                     const EngineConfig& cfg) {
  if (cfg.levels.size() < 2)
    throw std::invalid_argument("timing_equilibrium: engine level grid required");
  auto family = game.family;
  if (!family) {
    if (game.populations.empty())
      throw std::invalid_argument("timing_equilibrium: no rewards supplied");
    family = interpolate_populations(game.populations);
  }
  if (game.table_knots.size() < 2)
    throw std::invalid_argument("timing_equilibrium: table_knots required");

  const double T = tree.grid().horizon;
  double delta = 0.0;
  if (game.epsilon > 0.0) {
    if (!game.delta_lookup)
      throw std::invalid_argument(
          "timing_equilibrium: epsilon > 0 requires a delta lookup");
    delta = game.delta_lookup(game.epsilon / (3.0 * T));
    if (!(delta > 0.0))
      throw std::invalid_argument("timing_equilibrium: modulus must be > 0");
  }

  MeanFieldProblem problem;
  problem.tree = &tree;
  problem.levels = cfg.levels;
  problem.adapter = [&](const RandomMeasure& m) {
    if (!game.populations.empty())
      validate_population_family(tree, game.populations, m);
    AdapterOutput out;
    out.state = game.state ? game.state(m) : AdaptedProcess::constant(tree, 0.0);
    AdaptedProcess G = AdaptedProcess::constant(tree, 0.0);
    for (int id = 0; id < tree.size(); ++id) G[id] = game.reward(id, m);
    out.payoff = normalize_terminal(tree, G).first;
    out.gen = sample_generator(
        tree, [&](int node, double ell) { return family(node, m, ell); },
        game.table_knots, 1.0);
    return out;
  };
  problem.psi = [&](const PathRecord& path, const AdaptedProcess& X,
                    const std::vector<double>& running_max) {
    Outcome o;
    o.path = running_max;
    o.vec.reserve(path.nodes.size());
    for (int id : path.nodes) o.vec.push_back(X[id]);
    return o;
  };

  TimingEquilibrium eq;
  eq.report = run_engine(problem, engine, cfg);
  eq.m = eq.report.m_star;

  // Recompute the equilibrium representation and derive the stopping family.
  AdapterOutput out = problem.adapter(eq.m);
  eq.lhat = solve_level_grid(tree, out.payoff, out.gen, cfg.levels);
  for (double ell : game.query_levels) {
    StoppingTime tau = delta > 0.0
                           ? tilted_hitting_time(tree, eq.lhat, ell, delta)
                           : hitting_times(tree, eq.lhat, ell).first;
    eq.taus.emplace_back(ell, std::move(tau));
  }

  eq.certificate.consistency_gap = eq.report.residual_consistency;
  if (tree.paths().size() <= cfg.oracle_paths) {
    eq.certificate.exhaustive = true;
    AdaptedProcess G = AdaptedProcess::constant(tree, 0.0);
    for (int id = 0; id < tree.size(); ++id) G[id] = game.reward(id, eq.m);
    const auto all_taus = enumerate_stopping_times(tree, cfg.oracle_paths);
    for (const auto& [ell, tau] : eq.taus) {
      AdaptedProcess g_ell = AdaptedProcess::constant(tree, 0.0);
      for (int id = 0; id < tree.size(); ++id) g_ell[id] = family(id, eq.m, ell);
      double best = -kInf;
      for (const auto& cand : all_taus)
        best = std::max(best, timing_objective(tree, g_ell, G, cand));
      const double achieved = timing_objective(tree, g_ell, G, tau);
      eq.certificate.gaps.push_back({ell, best, achieved, best - achieved});
    }
  }
  return eq;
}

SingularMfgEquilibrium singular_mfg_equilibrium(const ScenarioTree& tree,
                                                const SingularMfg& game,
                                                EngineKind engine,
                                                const EngineConfig& cfg) {
  if (game.populations.empty())
    throw std::invalid_argument("singular_mfg_equilibrium: no populations");
  if (game.table_knots.size() < 2)
    throw std::invalid_argument("singular_mfg_equilibrium: table_knots required");

  MeanFieldProblem problem;
  problem.tree = &tree;
  problem.levels = cfg.levels;
  problem.adapter = [&](const RandomMeasure& m) {
    AdapterOutput out;
    out.state = game.state ? game.state(m) : AdaptedProcess::constant(tree, 0.0);
    AdaptedProcess k = AdaptedProcess::constant(tree, 0.0);
    for (int id = 0; id < tree.size(); ++id) k[id] = game.control_cost(id, m);
    out.payoff = AdaptedProcess::constant(tree, 0.0);
    for (int id = 0; id < tree.size(); ++id) out.payoff[id] = -k[id];
    out.gen = sample_generator(
        tree,
        [&](int node, double ell) { return game.cost_derivative(node, m, ell); },
        game.table_knots, 1.0);
    return out;
  };
  problem.psi = [&](const PathRecord&, const AdaptedProcess&,
                    const std::vector<double>& running_max) {
    Outcome o;
    o.path = running_max;
    return o;
  };

  SingularMfgEquilibrium eq;
  eq.report = run_engine(problem, engine, cfg);
  eq.m = eq.report.m_star;

  AdapterOutput out = problem.adapter(eq.m);
  eq.lhat = solve_level_grid(tree, out.payoff, out.gen, cfg.levels);

  AdaptedProcess k_star = AdaptedProcess::constant(tree, 0.0);
  for (int id = 0; id < tree.size(); ++id)
    k_star[id] = game.control_cost(id, eq.m);
  TableGenerator cprime_star = sample_generator(
      tree,
      [&](int node, double ell) { return game.cost_derivative(node, eq.m, ell); },
      game.table_knots, 1.0);

  eq.certificate.consistency_gap = eq.report.residual_consistency;
  const bool small = tree.paths().size() <= cfg.oracle_paths;
  for (std::size_t i = 0; i < game.populations.size(); ++i) {
    SingularControlSpec spec;
    spec.floor = game.populations[i].floor;
    spec.cap = game.populations[i].cap;
    spec.cost_derivative = cprime_star;
    spec.control_cost = k_star;
    eq.controls.push_back(singular_optimizer(tree, eq.lhat, spec));
    if (small) {
      eq.certificate.exhaustive = true;
      const double achieved = singular_cost(tree, spec, eq.controls.back());

      // Enumerate adapted monotone controls on a 21-point grid per node.
      const int pitch = 21;
      double best = kInf;
      std::vector<double> ctrl(tree.size(), spec.floor);
      std::vector<int> slots;
      for (const auto& n : tree.nodes())
        if (!n.children.empty()) slots.push_back(n.id);
      std::stable_sort(slots.begin(), slots.end(), [&](int a, int b) {
        return tree.node(a).t < tree.node(b).t;
      });
      std::function<void(std::size_t)> assign = [&](std::size_t s) {
        if (s == slots.size()) {
          AdaptedProcess c{std::vector<double>(ctrl)};
          for (const auto& n : tree.nodes())
            if (n.children.empty()) c[n.id] = c[n.parent];
          best = std::min(best, singular_cost(tree, spec, c));
          return;
        }
        const int id = slots[s];
        const int parent = tree.node(id).parent;
        const double lo = std::max(spec.floor, parent < 0 ? spec.floor : ctrl[parent]);
        const double hi = spec.cap[id];
        for (int q = 0; q < pitch; ++q) {
          ctrl[id] = lo + (hi - lo) * q / (pitch - 1);
          assign(s + 1);
        }
        ctrl[id] = spec.floor;
      };
      assign(0);
      eq.certificate.gaps.push_back(
          {static_cast<double>(i), best, achieved, achieved - best});
    }
  }
  return eq;
}

ConsumptionMfgEquilibrium consumption_mfg_equilibrium(const ScenarioTree& tree,
                                                      const ConsumptionMfg& game,
                                                      ConsumptionMode mode,
                                                      EngineKind engine,
                                                      const EngineConfig& cfg) {
  game.base.validate(tree);
  const double eta = game.base.eta;
  const double lo_clamp = -1.0 / eta;
  const double hi_clamp = game.eta_bar > 0.0 ? -1.0 / game.eta_bar : kInf;
  auto clamp_level = [&](double x) {
    return std::min(std::max(x, lo_clamp), hi_clamp);
  };
  std::vector<double> knots = game.table_knots.empty()
                                  ? consumption_default_knots(game.base)
                                  : game.table_knots;

  ConsumptionMfgEquilibrium eq;

  if (mode == ConsumptionMode::dimension_reduction) {
    if (!game.phi)
      throw std::invalid_argument("consumption_mfg: dimension reduction needs phi");
    // Base representation with the mu-free utility.
    auto [Y, gen] = consumption_representation_inputs(tree, game.base, knots);
    LhatResult base = solve_essinf_bruteforce(tree, Y, gen);

    std::vector<std::vector<double>> L_paths;
    std::vector<double> probs;
    for (const auto& path : tree.paths()) {
      std::vector<double> lp;
      for (int k = 0; k < tree.grid().steps; ++k)
        lp.push_back((*base.ell)[path.nodes[k]]);
      L_paths.push_back(std::move(lp));
      probs.push_back(path.probability);
    }
    auto phi_hat = [&](double x) { return game.phi(clamp_level(x)); };
    eq.shifts = dimension_reduction_solve(L_paths, probs, phi_hat, 1e-10);

    // L^mu = L + y, slot-wise; with non-decreasing L the inclusive running
    // max equals the shifted process itself.
    eq.lhat = base;
    for (const auto& path : tree.paths()) {
      double run = -kInf;
      for (int k = 0; k < tree.grid().steps; ++k) {
        const int id = path.nodes[k];
        (*eq.lhat.ell)[id] = (*base.ell)[id] + eq.shifts[k];
        run = std::max(run, (*eq.lhat.ell)[id]);
        eq.lhat.running_max[id] = run;
        eq.lhat.lhat[id] = k == 0 ? -kInf : eq.lhat.running_max[path.nodes[k - 1]];
      }
      const int leaf = path.nodes.back();
      eq.lhat.running_max[leaf] = run;
      eq.lhat.lhat[leaf] = run;
    }
    eq.plan = consumption_from_lhat(tree, eq.lhat, game.base);

    // Emitted measure: exactly the law of L + y*.
    eq.m = conditional_law(tree, [&](const PathRecord& path) {
      Outcome o;
      for (int k = 0; k < tree.grid().steps; ++k)
        o.path.push_back((*eq.lhat.ell)[path.nodes[k]]);
      return o;
    });
    eq.m.dt = tree.grid().dt();

    double res = 0.0;
    for (std::size_t k = 0; k < eq.shifts.size(); ++k) {
      double e = 0.0;
      for (std::size_t p = 0; p < L_paths.size(); ++p)
        e += probs[p] * phi_hat(L_paths[p][k] + eq.shifts[k]);
      res = std::max(res, std::abs(e - eq.shifts[k]));
    }
    eq.certificate.consistency_gap = res;
    eq.certificate.exhaustive = false;
    eq.report.converged = true;
    eq.report.iterations = 1;
    eq.report.trace = {res};
    eq.report.residual_consistency = res;
    eq.report.message = "dimension reduction: per-slot scalar fixed points";
    return eq;
  }

  // General mode: Picard/Tarski over the satisfaction-intensity law.
  auto u_prime_at = [&](const RandomMeasure& m, int node, double level) {
    return game.u_prime_mu ? game.u_prime_mu(node, m, level)
                           : game.base.u_prime(node, level);
  };
  MeanFieldProblem problem;
  problem.tree = &tree;
  problem.levels = cfg.levels;
  problem.adapter = [&](const RandomMeasure& m) {
    ConsumptionSpec spec = game.base;
    spec.u_prime = [&, m](int node, double level) {
      return u_prime_at(m, node, level);
    };
    auto [Y, gen] = consumption_representation_inputs(tree, spec, knots);
    AdapterOutput out;
    out.state = AdaptedProcess::constant(tree, 0.0);
    out.payoff = std::move(Y);
    out.gen = std::move(gen);
    return out;
  };
  problem.psi = [&](const PathRecord&, const AdaptedProcess&,
                    const std::vector<double>& running_max) {
    // Satisfaction intensity eta v (-1/psi1(R)); non-decreasing, hence V+.
    Outcome o;
    o.path.reserve(running_max.size());
    for (double r : running_max)
      o.path.push_back(std::max(eta, -1.0 / clamp_level(r)));
    return o;
  };

  eq.report = run_engine(problem, engine, cfg);
  eq.m = eq.report.m_star;

  AdapterOutput out = problem.adapter(eq.m);
  eq.lhat = solve_level_grid(tree, out.payoff, out.gen, cfg.levels);
  ConsumptionSpec star = game.base;
  star.u_prime = [&, m = eq.m](int node, double level) {
    return u_prime_at(m, node, level);
  };
  eq.plan = consumption_from_lhat(tree, eq.lhat, star);
  eq.certificate.consistency_gap = eq.report.residual_consistency;
  return eq;
}

}  // namespace bekrep
