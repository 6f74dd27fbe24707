#include "bekrep/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

namespace bekrep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_adapter_output(const ScenarioTree& tree, const AdapterOutput& out) {
  if (out.payoff.size() != tree.size() || out.state.size() != tree.size())
    throw std::invalid_argument("adapter: output size mismatch");
  for (int leaf : tree.leaves())
    if (std::abs(out.payoff[leaf]) > 1e-9)
      throw std::invalid_argument("adapter: payoff must be terminal-zero");
  validate_generator(tree, out.gen);
}

std::vector<double> running_max_along(const ScenarioTree& tree,
                                      const LhatResult& lhat,
                                      const PathRecord& path) {
  std::vector<double> r;
  r.reserve(tree.grid().steps);
  for (int k = 0; k < tree.grid().steps; ++k)
    r.push_back(lhat.running_max[path.nodes[k]]);
  return r;
}

}  // namespace

void MeanFieldProblem::validate() const {
  if (!tree) throw std::invalid_argument("MeanFieldProblem: tree missing");
  if (!adapter) throw std::invalid_argument("MeanFieldProblem: adapter missing");
  if (!psi) throw std::invalid_argument("MeanFieldProblem: psi missing");
  if (levels.size() < 2)
    throw std::invalid_argument("MeanFieldProblem: level grid missing");
}

RandomMeasure apply_phi(const MeanFieldProblem& problem, const RandomMeasure& m,
                        LhatResult* lhat_out) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  AdapterOutput out = problem.adapter(m);
  check_adapter_output(tree, out);
  LhatResult lhat = solve_level_grid(tree, out.payoff, out.gen, problem.levels);
  RandomMeasure next = conditional_law(tree, [&](const PathRecord& path) {
    return problem.psi(path, out.state, running_max_along(tree, lhat, path));
  });
  next.prune();
  if (lhat_out) *lhat_out = std::move(lhat);
  return next;
}

namespace {

RandomMeasure mix(const RandomMeasure& a, const RandomMeasure& b, double wb) {
  // (1-wb) a + wb b per atom, then prune.
  RandomMeasure out = a;
  for (std::size_t i = 0; i < out.atoms.size(); ++i) {
    for (auto& wo : out.atoms[i].support) wo.w *= (1.0 - wb);
    for (const auto& wo : b.atoms[i].support)
      out.atoms[i].support.push_back({wo.w * wb, wo.o});
  }
  out.prune();
  return out;
}

}  // namespace

FixedPointReport picard_solve(const MeanFieldProblem& problem,
                              const RandomMeasure& m0, double damping,
                              double tol, int max_iter) {
  if (!(damping > 0.0) || damping > 1.0)
    throw std::invalid_argument("picard_solve: damping must be in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("picard_solve: tol must be > 0");
  FixedPointReport rep;
  RandomMeasure m = m0;
  m.validate();
  for (int it = 0; it < max_iter; ++it) {
    LhatResult lhat;
    RandomMeasure phi = apply_phi(problem, m, &lhat);
    RandomMeasure next = damping >= 1.0 ? phi : mix(m, phi, damping);
    const double step = levy_prokhorov(next, m);
    rep.trace.push_back(step);
    rep.iterations = it + 1;
    m = std::move(next);
    if (step < tol) {
      rep.converged = true;
      rep.lhat_star = std::move(lhat);
      break;
    }
  }
  rep.m_star = std::move(m);
  if (rep.converged) {
    RandomMeasure phi = apply_phi(problem, rep.m_star, nullptr);
    rep.residual_consistency = levy_prokhorov(phi, rep.m_star);
    AdapterOutput out = problem.adapter(rep.m_star);
    rep.residual_representation =
        solve_level_grid(*problem.tree, out.payoff, out.gen, problem.levels)
            .residual;
    rep.message = "converged";
  } else {
    rep.message = "picard did not converge within " + std::to_string(max_iter) +
                  " iterations; see trace";
    // Still provide the diagnostics of the last iterate.
    RandomMeasure phi = apply_phi(problem, rep.m_star, &rep.lhat_star);
    rep.residual_consistency = levy_prokhorov(phi, rep.m_star);
  }
  return rep;
}

RandomMeasure quantize_to_levels(const RandomMeasure& m,
                                 const std::vector<double>& levels) {
  RandomMeasure out = m;
  for (auto& atom : out.atoms) {
    for (auto& wo : atom.support) {
      for (double& x : wo.o.path) {
        // Floor to the grid; monotone, so order is preserved.
        auto it = std::upper_bound(levels.begin(), levels.end(), x);
        if (it == levels.begin())
          x = levels.front();
        else
          x = *(it - 1);
      }
    }
  }
  out.prune(1e-12, 1e-12);
  return out;
}

namespace {

bool measures_equal(const RandomMeasure& a, const RandomMeasure& b) {
  if (a.atoms.size() != b.atoms.size()) return false;
  auto key = [](const MeasureAtom& atom) {
    std::vector<std::pair<std::vector<double>, double>> k;
    for (const auto& wo : atom.support) {
      std::vector<double> flat = wo.o.path;
      flat.insert(flat.end(), wo.o.vec.begin(), wo.o.vec.end());
      k.emplace_back(std::move(flat), wo.w);
    }
    std::sort(k.begin(), k.end());
    return k;
  };
  for (std::size_t i = 0; i < a.atoms.size(); ++i) {
    auto ka = key(a.atoms[i]), kb = key(b.atoms[i]);
    if (ka.size() != kb.size()) return false;
    for (std::size_t j = 0; j < ka.size(); ++j) {
      if (ka[j].first != kb[j].first) return false;
      if (std::abs(ka[j].second - kb[j].second) > 1e-12) return false;
    }
  }
  return true;
}

}  // namespace

FixedPointReport tarski_solve(const MeanFieldProblem& problem,
                              const RandomMeasure& extreme,
                              TarskiDirection direction, int max_iter) {
  FixedPointReport rep;
  RandomMeasure m = quantize_to_levels(extreme, problem.levels);
  m.validate();
  for (int it = 0; it < max_iter; ++it) {
    LhatResult lhat;
    RandomMeasure next = quantize_to_levels(apply_phi(problem, m, &lhat),
                                            problem.levels);
    const bool ordered = direction == TarskiDirection::from_bottom
                             ? stochastic_order_leq(m, next)
                             : stochastic_order_leq(next, m);
    if (!ordered)
      throw order_violation(
          "tarski_solve: iterates " + std::to_string(it) + " -> " +
          std::to_string(it + 1) +
          " are not ordered; the adapter is not monotone");
    rep.trace.push_back(levy_prokhorov(next, m));
    rep.iterations = it + 1;
    const bool stationary = measures_equal(next, m);
    m = std::move(next);
    if (stationary) {
      rep.converged = true;
      rep.lhat_star = std::move(lhat);
      break;
    }
  }
  rep.m_star = std::move(m);
  if (rep.converged) {
    RandomMeasure phi = quantize_to_levels(apply_phi(problem, rep.m_star, nullptr),
                                           problem.levels);
    rep.residual_consistency = levy_prokhorov(phi, rep.m_star);
    AdapterOutput out = problem.adapter(rep.m_star);
    rep.residual_representation =
        solve_level_grid(*problem.tree, out.payoff, out.gen, problem.levels)
            .residual;
    rep.message = "stationary";
  } else {
    rep.message = "tarski did not reach stationarity within " +
                  std::to_string(max_iter) + " iterations";
  }
  return rep;
}

AuditReport monotonicity_audit(const MeanFieldProblem& problem,
                               const RandomMeasure& seed_measure,
                               int sample_pairs, std::uint64_t seed) {
  problem.validate();
  const ScenarioTree& tree = *problem.tree;
  std::mt19937_64 rng(seed);
  auto unif = [&]() { return (rng() >> 11) * 0x1.0p-53; };

  AuditReport rep;
  const double span = problem.levels.back() - problem.levels.front();
  for (int p = 0; p < sample_pairs; ++p) {
    // Monotone coupling: push every outcome of m1 up by a random
    // non-decreasing bump, so m1 <=_p m2 by construction.
    RandomMeasure m1 = seed_measure;
    for (auto& atom : m1.atoms)
      for (auto& wo : atom.support) {
        const double shift = 0.2 * span * (unif() - 0.5);
        for (double& x : wo.o.path) x += shift;
        for (double& x : wo.o.vec) x += shift;
        for (std::size_t i = 1; i < wo.o.path.size(); ++i)
          wo.o.path[i] = std::max(wo.o.path[i], wo.o.path[i - 1]);
      }
    RandomMeasure m2 = m1;
    for (auto& atom : m2.atoms)
      for (auto& wo : atom.support) {
        double bump = 0.0;
        for (double& x : wo.o.path) {
          bump += 0.1 * span * unif();
          x += bump;
        }
        for (double& x : wo.o.vec) x += 0.1 * span * unif();
      }

    AdapterOutput o1 = problem.adapter(m1);
    AdapterOutput o2 = problem.adapter(m2);
    check_adapter_output(tree, o1);
    check_adapter_output(tree, o2);
    rep.pairs_checked = p + 1;

    for (const auto& n : tree.nodes()) {
      if (o1.state[n.id] > o2.state[n.id] + 1e-10) {
        rep.pass = false;
        rep.witness = "X not monotone at node " + std::to_string(n.id) +
                      " (pair " + std::to_string(p) + ")";
        return rep;
      }
      for (double ell : problem.levels) {
        if (generator_eval(o1.gen, n.id, ell) <
            generator_eval(o2.gen, n.id, ell) - 1e-10) {
          rep.pass = false;
          rep.witness = "f^{m1} < f^{m2} at node " + std::to_string(n.id) +
                        ", level " + std::to_string(ell) + " (pair " +
                        std::to_string(p) + ")";
          return rep;
        }
      }
      // Y^{m1} - Y^{m2} must be a submartingale: value <= one-step
      // conditional expectation.
      if (!n.children.empty()) {
        double next = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i)
          next += n.prob[i] *
                  (o1.payoff[n.children[i]] - o2.payoff[n.children[i]]);
        const double here = o1.payoff[n.id] - o2.payoff[n.id];
        if (here > next + 1e-10) {
          rep.pass = false;
          rep.witness = "Y^{m1} - Y^{m2} not a submartingale at node " +
                        std::to_string(n.id) + " (pair " + std::to_string(p) +
                        ")";
          return rep;
        }
      }
    }
  }
  return rep;
}

std::vector<double> dimension_reduction_solve(
    const std::vector<std::vector<double>>& L_paths,
    const std::vector<double>& path_probs,
    const std::function<double(double)>& phi, double tol,
    std::uint64_t bracket_seed) {
  if (L_paths.empty() || L_paths.size() != path_probs.size())
    throw std::invalid_argument("dimension_reduction_solve: bad inputs");
  const std::size_t slots = L_paths.front().size();
  double lmin = kInf, lmax = -kInf;
  for (const auto& lp : L_paths) {
    if (lp.size() != slots)
      throw std::invalid_argument("dimension_reduction_solve: ragged paths");
    for (std::size_t k = 1; k < lp.size(); ++k)
      if (lp[k] < lp[k - 1] - 1e-12)
        throw std::invalid_argument(
            "dimension_reduction_solve: L must have non-decreasing paths");
    lmin = std::min(lmin, lp.front());
    lmax = std::max(lmax, lp.back());
  }

  // Certify the contraction bound sup phi' <= 1 - 1e-6 by sampling the
  // relevant range.
  double phi_lo = kInf, phi_hi = -kInf;
  {
    const int probes = 101;
    for (int i = 0; i < probes; ++i) {
      const double x = lmin - 1.0 + (lmax - lmin + 2.0) * i / (probes - 1);
      const double v = phi(x);
      phi_lo = std::min(phi_lo, v);
      phi_hi = std::max(phi_hi, v);
    }
  }
  const double xlo = lmin + phi_lo - 1.0, xhi = lmax + phi_hi + 1.0;
  const int grid = 10000;
  const double h = (xhi - xlo) / grid;
  for (int i = 0; i < grid; ++i) {
    const double x = xlo + i * h;
    const double deriv = (phi(x + h) - phi(x)) / h;
    if (deriv > 1.0 - 1e-6)
      throw std::invalid_argument(
          "dimension_reduction_solve: phi derivative bound violated near x=" +
          std::to_string(x));
  }

  std::mt19937_64 rng(bracket_seed);
  auto unif = [&]() { return (rng() >> 11) * 0x1.0p-53; };

  std::vector<double> y(slots, 0.0);
  double prev = -kInf;
  for (std::size_t k = 0; k < slots; ++k) {
    auto g = [&](double yy) {
      double e = 0.0;
      for (std::size_t p = 0; p < L_paths.size(); ++p)
        e += path_probs[p] * phi(L_paths[p][k] + yy);
      return e - yy;  // strictly decreasing in yy
    };
    // The fixed point lies in the closed range of phi; randomize the bracket
    // slightly (callers cross-check multi-start agreement).
    double lo = phi_lo - 1.0 - unif();
    double hi = phi_hi + 1.0 + unif();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (hi - lo < 1e-14 * (1.0 + std::abs(mid))) break;
      if (g(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    y[k] = 0.5 * (lo + hi);
    if (std::abs(g(y[k])) > tol)
      throw std::runtime_error("dimension_reduction_solve: bisection residual above tol");
    if (y[k] < prev - 1e-12)
      throw std::logic_error("dimension_reduction_solve: fixed points not monotone in t");
    prev = y[k];
  }
  return y;
}

std::string fixed_point_report_json(const ScenarioTree& tree,
                                    const FixedPointReport& r) {
  nlohmann::ordered_json j;
  j["converged"] = r.converged;
  j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["trace"] = r.trace;
  j["residual_consistency"] = r.residual_consistency;
  j["residual_representation"] = r.residual_representation;
  j["m_star"] = nlohmann::ordered_json::parse(measure_to_json(r.m_star));
  if (r.lhat_star.running_max.size() == tree.size())
    j["lhat_star"] = nlohmann::ordered_json::parse(lhat_to_json(tree, r.lhat_star));
  return j.dump(2);
}

}  // namespace bekrep
