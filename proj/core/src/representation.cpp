#include "bekrep/representation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

namespace bekrep {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double expected_children(const ScenarioTree& tree, const AdaptedProcess& p,
                         const TreeNode& n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] * p[n.children[i]];
  return acc;
}

}  // namespace

SnellResult snell_smallest_optimal(const ScenarioTree& tree,
                                   const AdaptedProcess& payoff,
                                   const AdaptedProcess& running) {
  if (payoff.size() != tree.size() || running.size() != tree.size())
    throw std::invalid_argument("snell: process size mismatch");
  for (double y : payoff.v)
    if (!std::isfinite(y)) throw std::invalid_argument("snell: non-finite payoff");
  const double dt = tree.grid().dt();

  SnellResult res;
  res.envelope = AdaptedProcess::constant(tree, 0.0);
  res.smallest.stop.assign(tree.size(), 0);
  for (int t = tree.grid().steps; t >= 0; --t) {
    for (int id : tree.nodes_at_time(t)) {
      const TreeNode& n = tree.node(id);
      if (n.children.empty()) {
        res.envelope[id] = payoff[id];
        res.smallest.stop[id] = 1;
        continue;
      }
      const double cont = running[id] * dt + expected_children(tree, res.envelope, n);
      if (payoff[id] >= cont - kTieTolerance) {
        res.envelope[id] = std::max(payoff[id], cont);
        res.smallest.stop[id] = 1;
      } else {
        res.envelope[id] = cont;
      }
    }
  }
  res.value = res.envelope[tree.root()];
  return res;
}

namespace {

// E[Y_sigma | F_node] where sigma never stops at `node` itself.
double expected_y_at_sigma(const ScenarioTree& tree, const AdaptedProcess& Y,
                           const StoppingTime& sigma, int node, bool at_start) {
  const TreeNode& n = tree.node(node);
  if (!at_start && (n.children.empty() || sigma.stop[node])) return Y[node];
  if (n.children.empty())
    throw std::invalid_argument("ell_root: sigma must stop strictly after the node");
  double acc = 0.0;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] * expected_y_at_sigma(tree, Y, sigma, n.children[i], false);
  return acc;
}

// E[sum over slots in [node, sigma) of f(s, ell) dt | F_node].
double expected_generator_sum(const ScenarioTree& tree, const GeneratorSpec& gen,
                              const StoppingTime& sigma, int node, double ell,
                              double dt, bool at_start) {
  const TreeNode& n = tree.node(node);
  if (!at_start && (n.children.empty() || sigma.stop[node])) return 0.0;
  double acc = generator_eval(gen, node, ell) * dt;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] *
           expected_generator_sum(tree, gen, sigma, n.children[i], ell, dt, false);
  return acc;
}

// Expected sum of dt over the same slots (affine closed form support).
double expected_slot_mass(const ScenarioTree& tree, const StoppingTime& sigma,
                          int node, double dt, bool at_start) {
  const TreeNode& n = tree.node(node);
  if (!at_start && (n.children.empty() || sigma.stop[node])) return 0.0;
  double acc = dt;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] * expected_slot_mass(tree, sigma, n.children[i], dt, false);
  return acc;
}

double expected_intercept_sum(const ScenarioTree& tree, const AdaptedProcess& a,
                              const StoppingTime& sigma, int node, double dt,
                              bool at_start) {
  const TreeNode& n = tree.node(node);
  if (!at_start && (n.children.empty() || sigma.stop[node])) return 0.0;
  double acc = a[node] * dt;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] *
           expected_intercept_sum(tree, a, sigma, n.children[i], dt, false);
  return acc;
}

void subtree_min_max_roots(const ScenarioTree& tree, const AdaptedProcess& roots,
                           int node, double& lo, double& hi) {
  const TreeNode& n = tree.node(node);
  if (n.children.empty()) return;
  lo = std::min(lo, roots[node]);
  hi = std::max(hi, roots[node]);
  for (int c : n.children) subtree_min_max_roots(tree, roots, c, lo, hi);
}

}  // namespace

double ell_root(const ScenarioTree& tree, const AdaptedProcess& Y,
                const GeneratorSpec& gen, int node, const StoppingTime& sigma) {
  const double dt = tree.grid().dt();
  if (tree.is_terminal(node))
    throw std::invalid_argument("ell_root: node is terminal");
  if (node < static_cast<int>(sigma.stop.size()) && sigma.stop[node])
    throw std::invalid_argument("ell_root: sigma must be strictly later than the node");
  const double rhs = Y[node] - expected_y_at_sigma(tree, Y, sigma, node, true);

  if (const auto* a = std::get_if<AffineGenerator>(&gen)) {
    const double mass = expected_slot_mass(tree, sigma, node, dt, true);
    const double drift = expected_intercept_sum(tree, a->intercept, sigma, node, dt, true);
    return (rhs - drift) / (a->slope * mass);
  }

  // Bracket from the one-step roots of the subtree, then bisect.
  AdaptedProcess roots = one_step_roots(tree, Y, gen);
  double lo = kInf, hi = -kInf;
  subtree_min_max_roots(tree, roots, node, lo, hi);
  const double pad = 1e-6 * (1.0 + std::abs(lo) + std::abs(hi));
  lo -= pad;
  hi += pad;
  auto g = [&](double ell) {
    return expected_generator_sum(tree, gen, sigma, node, ell, dt, true) - rhs;
  };
  double glo = g(lo), ghi = g(hi);
  // The bracket is guaranteed in exact arithmetic; grow defensively anyway.
  double width = hi - lo;
  while (glo > 0.0 && width < 1e300) {
    lo -= width;
    width *= 2;
    glo = g(lo);
  }
  while (ghi < 0.0 && width < 1e300) {
    hi += width;
    width *= 2;
    ghi = g(hi);
  }
  const double tol = 1e-10 * (1.0 + std::abs(rhs));
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (std::abs(gm) <= 0.25 * tol) break;
    if (gm < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * (1.0 + std::abs(mid))) break;
  }
  return mid;
}

std::vector<double> default_level_grid(const ScenarioTree& tree,
                                       const AdaptedProcess& Y,
                                       const GeneratorSpec& gen, int count) {
  if (count < 2) throw std::invalid_argument("default_level_grid: count >= 2");
  AdaptedProcess roots = one_step_roots(tree, Y, gen);
  double lo = kInf, hi = -kInf;
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    lo = std::min(lo, roots[n.id]);
    hi = std::max(hi, roots[n.id]);
  }
  if (!std::isfinite(lo)) {
    lo = -1.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> levels(count);
  for (int i = 0; i < count; ++i)
    levels[i] = lo + (hi - lo) * i / (count - 1);
  return levels;
}

namespace {

// Subtree stopping times as stop-node lists; entry 0 is "stop at the root of
// the subtree" and is excluded by callers needing strictly-later stops.
void subtree_stop_sets(const ScenarioTree& tree, int id,
                       std::vector<std::vector<int>>& out) {
  const TreeNode& n = tree.node(id);
  out.clear();
  out.push_back({id});
  if (n.children.empty()) return;
  std::vector<std::vector<std::vector<int>>> per_child(n.children.size());
  for (std::size_t i = 0; i < n.children.size(); ++i)
    subtree_stop_sets(tree, n.children[i], per_child[i]);
  std::vector<std::size_t> idx(n.children.size(), 0);
  while (true) {
    std::vector<int> combo;
    for (std::size_t i = 0; i < n.children.size(); ++i)
      combo.insert(combo.end(), per_child[i][idx[i]].begin(),
                   per_child[i][idx[i]].end());
    out.push_back(std::move(combo));
    std::size_t k = 0;
    while (k < idx.size()) {
      if (++idx[k] < per_child[k].size()) break;
      idx[k] = 0;
      ++k;
    }
    if (k == idx.size()) break;
  }
}

void fill_running_max_from_ell(const ScenarioTree& tree, LhatResult& r) {
  r.running_max = AdaptedProcess::constant(tree, -kInf);
  r.lhat = AdaptedProcess::constant(tree, -kInf);
  const AdaptedProcess& L = *r.ell;
  for (int t = 0; t <= tree.grid().steps; ++t) {
    for (int id : tree.nodes_at_time(t)) {
      const TreeNode& n = tree.node(id);
      const double prev = n.parent < 0 ? -kInf : r.running_max[n.parent];
      r.lhat[id] = prev;
      r.running_max[id] = n.children.empty() ? prev : std::max(prev, L[id]);
    }
  }
}

double root_start_residual(const ScenarioTree& tree, const AdaptedProcess& Y,
                           const GeneratorSpec& gen, const LhatResult& r);

}  // namespace

LhatResult solve_essinf_bruteforce(const ScenarioTree& tree,
                                   const AdaptedProcess& Y,
                                   const GeneratorSpec& gen,
                                   std::size_t max_paths) {
  if (Y.size() != tree.size())
    throw std::invalid_argument("solve_essinf_bruteforce: size mismatch");
  validate_generator(tree, gen);
  if (tree.paths().size() > max_paths)
    throw refusal_error("solve_essinf_bruteforce: tree has " +
                        std::to_string(tree.paths().size()) +
                        " paths, limit is " + std::to_string(max_paths));

  LhatResult res;
  AdaptedProcess L = AdaptedProcess::constant(tree, std::nan(""));
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    std::vector<std::vector<int>> sets;
    subtree_stop_sets(tree, n.id, sets);
    double best = kInf;
    StoppingTime sigma;
    sigma.stop.assign(tree.size(), 0);
    for (std::size_t s = 1; s < sets.size(); ++s) {
      for (int id : sets[s]) sigma.stop[id] = 1;
      best = std::min(best, ell_root(tree, Y, gen, n.id, sigma));
      for (int id : sets[s]) sigma.stop[id] = 0;
    }
    L[n.id] = best;
  }
  res.ell = std::move(L);
  fill_running_max_from_ell(tree, res);
  res.grid_cell = 0.0;
  res.residual = root_start_residual(tree, Y, gen, res);
  return res;
}

LhatResult solve_level_grid(const ScenarioTree& tree, const AdaptedProcess& Y,
                            const GeneratorSpec& gen,
                            const std::vector<double>& levels) {
  if (Y.size() != tree.size())
    throw std::invalid_argument("solve_level_grid: size mismatch");
  validate_generator(tree, gen);
  if (levels.size() < 2)
    throw std::invalid_argument("solve_level_grid: need at least 2 levels");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1]))
      throw std::invalid_argument("solve_level_grid: levels must be strictly increasing");

  LhatResult res;
  res.levels = levels;
  res.stop_times.reserve(levels.size());
  AdaptedProcess running = AdaptedProcess::constant(tree, 0.0);
  for (double ell : levels) {
    for (int id = 0; id < tree.size(); ++id)
      running[id] = generator_eval(gen, id, ell);
    res.stop_times.push_back(
        snell_smallest_optimal(tree, Y, running).smallest);
  }

  // tau_ell must be non-decreasing in ell path-wise.
  for (std::size_t i = 1; i < levels.size(); ++i) {
    for (const auto& path : tree.paths()) {
      if (stop_time_index(tree, res.stop_times[i], path) <
          stop_time_index(tree, res.stop_times[i - 1], path))
        throw std::logic_error("solve_level_grid: tau_ell not monotone in ell");
    }
  }

  // flagged[i][v]: tau_{ell_i} has stopped at or before v along v's history.
  const int n = tree.size();
  std::vector<std::vector<std::uint8_t>> flagged(levels.size(),
                                                 std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    for (int t = 0; t <= tree.grid().steps; ++t) {
      for (int id : tree.nodes_at_time(t)) {
        const TreeNode& nd = tree.node(id);
        const bool up = nd.parent >= 0 && flagged[i][nd.parent];
        flagged[i][id] = up || res.stop_times[i].stop[id];
      }
    }
  }
  res.running_max = AdaptedProcess::constant(tree, -kInf);
  res.lhat = AdaptedProcess::constant(tree, -kInf);
  for (int t = 0; t <= tree.grid().steps; ++t) {
    for (int id : tree.nodes_at_time(t)) {
      const TreeNode& nd = tree.node(id);
      if (nd.children.empty()) {
        res.running_max[id] = nd.parent < 0 ? -kInf : res.running_max[nd.parent];
      } else {
        // Highest level whose smallest optimal stop occurred by now;
        // flagged[.][id] is non-increasing in the level index.
        int lo = 0, hi = static_cast<int>(levels.size()) - 1, best = -1;
        while (lo <= hi) {
          int mid = (lo + hi) / 2;
          if (flagged[mid][id]) {
            best = mid;
            lo = mid + 1;
          } else {
            hi = mid - 1;
          }
        }
        res.running_max[id] = best < 0 ? -kInf : levels[best];
      }
      res.lhat[id] = nd.parent < 0 ? -kInf : res.running_max[nd.parent];
    }
  }

  double cell = 0.0;
  for (std::size_t i = 1; i < levels.size(); ++i)
    cell = std::max(cell, levels[i] - levels[i - 1]);
  res.grid_cell = cell;
  res.residual = root_start_residual(tree, Y, gen, res);
  return res;
}

std::vector<double> solve_deterministic_convex_envelope(
    const std::vector<double>& Y, double dt) {
  if (Y.size() < 2)
    throw std::invalid_argument("solve_deterministic_convex_envelope: need >= 2 samples");
  if (!(dt > 0.0))
    throw std::invalid_argument("solve_deterministic_convex_envelope: dt must be > 0");
  if (std::abs(Y.back()) > 1e-9)
    throw std::invalid_argument("solve_deterministic_convex_envelope: Y_T must be 0");
  const int N = static_cast<int>(Y.size()) - 1;

  // Lower convex hull of the points (s*dt, -Y_s), built right to left; the
  // initial slope at each new leftmost point is L_t.
  struct Pt {
    double x, y;
  };
  auto cross = [](const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Pt> hull;
  hull.push_back({N * dt, -Y[N]});
  std::vector<double> L(N, 0.0);
  for (int t = N - 1; t >= 0; --t) {
    Pt p{t * dt, -Y[t]};
    while (hull.size() >= 2 &&
           cross(p, hull.back(), hull[hull.size() - 2]) <= 0.0)
      hull.pop_back();
    const Pt& tangent = hull.back();
    L[t] = (tangent.y - p.y) / (tangent.x - p.x);
    hull.push_back(p);
  }
  return L;
}

namespace {

// Restarted expectation with the stored L: E[sum f(s, max over [start, s] of
// L) dt | start].
double restarted_expectation_ell(const ScenarioTree& tree,
                                 const GeneratorSpec& gen,
                                 const AdaptedProcess& L, int node,
                                 double runmax, double dt) {
  const TreeNode& n = tree.node(node);
  if (n.children.empty()) return 0.0;
  const double m = std::max(runmax, L[node]);
  double acc = generator_eval(gen, node, m) * dt;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] *
           restarted_expectation_ell(tree, gen, L, n.children[i], m, dt);
  return acc;
}

void collect_subtree(const ScenarioTree& tree, int node, std::vector<int>& out) {
  out.push_back(node);
  for (int c : tree.node(node).children) collect_subtree(tree, c, out);
}

// Per-level Snell restarted at `start`; recovers the restarted inclusive
// running max on the subtree, exact to one grid cell.
std::map<int, double> restarted_running_max_grid(const ScenarioTree& tree,
                                                 const AdaptedProcess& Y,
                                                 const GeneratorSpec& gen,
                                                 const std::vector<double>& levels,
                                                 int start) {
  std::vector<int> sub;
  collect_subtree(tree, start, sub);
  const double dt = tree.grid().dt();

  std::map<int, double> runmax;
  for (int id : sub) runmax[id] = -kInf;

  std::map<int, std::uint8_t> flagged;
  std::map<int, double> envelope;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double ell = levels[li];
    // Backward Snell on the subtree.
    for (auto it = sub.rbegin(); it != sub.rend(); ++it) {
      const int id = *it;
      const TreeNode& n = tree.node(id);
      if (n.children.empty()) {
        envelope[id] = Y[id];
        flagged[id] = 1;
        continue;
      }
      double cont = generator_eval(gen, id, ell) * dt;
      for (std::size_t i = 0; i < n.children.size(); ++i)
        cont += n.prob[i] * envelope[n.children[i]];
      if (Y[id] >= cont - kTieTolerance) {
        envelope[id] = std::max(Y[id], cont);
        flagged[id] = 1;
      } else {
        envelope[id] = cont;
        flagged[id] = 0;
      }
    }
    // Forward pass: stopped-by-now, then update the recovered max.
    for (int id : sub) {
      const TreeNode& n = tree.node(id);
      const bool up = id != start && flagged.count(n.parent) && flagged[n.parent];
      flagged[id] = flagged[id] || up;
      if (!n.children.empty() && flagged[id]) runmax[id] = levels[li];
    }
  }
  // Terminal slots carry the parent value.
  for (int id : sub) {
    const TreeNode& n = tree.node(id);
    if (n.children.empty())
      runmax[id] = id == start ? -kInf : runmax[n.parent];
  }
  return runmax;
}

double restarted_expectation_grid(const ScenarioTree& tree,
                                  const GeneratorSpec& gen,
                                  const std::map<int, double>& runmax, int node,
                                  double dt) {
  const TreeNode& n = tree.node(node);
  if (n.children.empty()) return 0.0;
  double acc = generator_eval(gen, node, runmax.at(node)) * dt;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] *
           restarted_expectation_grid(tree, gen, runmax, n.children[i], dt);
  return acc;
}

double start_residual(const ScenarioTree& tree, const AdaptedProcess& Y,
                      const GeneratorSpec& gen, const LhatResult& r,
                      int node,
                      std::map<int, double>& cache) {
  const double dt = tree.grid().dt();
  auto it = cache.find(node);
  if (it != cache.end()) return it->second;
  double expected;
  if (r.ell.has_value()) {
    expected = restarted_expectation_ell(tree, gen, *r.ell, node, -kInf, dt);
  } else {
    auto runmax = restarted_running_max_grid(tree, Y, gen, r.levels, node);
    expected = restarted_expectation_grid(tree, gen, runmax, node, dt);
  }
  const double res = std::abs(Y[node] - expected);
  cache[node] = res;
  return res;
}

double root_start_residual(const ScenarioTree& tree, const AdaptedProcess& Y,
                           const GeneratorSpec& gen, const LhatResult& r) {
  std::map<int, double> cache;
  return start_residual(tree, Y, gen, r, tree.root(), cache);
}

}  // namespace

double verify_representation(const ScenarioTree& tree, const AdaptedProcess& Y,
                             const GeneratorSpec& gen, const LhatResult& lhat,
                             const std::vector<StoppingTime>& starts) {
  if (Y.size() != tree.size())
    throw std::invalid_argument("verify_representation: size mismatch");
  std::map<int, double> cache;
  std::set<int> nodes;
  for (const auto& st : starts) {
    if (static_cast<int>(st.stop.size()) != tree.size())
      throw std::invalid_argument("verify_representation: start from another tree");
    for (const auto& path : tree.paths()) nodes.insert(stop_node(tree, st, path));
  }
  double res = 0.0;
  for (int v : nodes) {
    if (tree.is_terminal(v)) continue;  // Y_T = 0 identity is trivial
    res = std::max(res, start_residual(tree, Y, gen, lhat, v, cache));
  }
  return res;
}

std::string lhat_to_json(const ScenarioTree& tree, const LhatResult& r) {
  nlohmann::ordered_json j;
  j["levels"] = r.levels;
  nlohmann::ordered_json lh = nlohmann::ordered_json::object();
  for (int id = 0; id < tree.size(); ++id) {
    if (std::isinf(r.lhat[id]) && r.lhat[id] < 0)
      lh[std::to_string(id)] = "-inf";
    else
      lh[std::to_string(id)] = r.lhat[id];
  }
  j["lhat"] = std::move(lh);
  j["residual"] = r.residual;
  nlohmann::ordered_json st = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.levels.size(); ++i) {
    char key[40];
    std::snprintf(key, sizeof(key), "%.17g", r.levels[i]);
    std::vector<int> stops;
    for (int id = 0; id < tree.size(); ++id)
      if (r.stop_times[i].stop[id]) stops.push_back(id);
    st[key] = stops;
  }
  j["stop_times"] = std::move(st);
  return j.dump(2);
}

}  // namespace bekrep
