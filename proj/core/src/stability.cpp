#include "bekrep/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bekrep/measure.hpp"
#include "bekrep/optimizers.hpp"

namespace bekrep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> running_max_of(const std::vector<double>& L) {
  std::vector<double> r(L.size());
  double m = -kInf;
  for (std::size_t i = 0; i < L.size(); ++i) {
    m = std::max(m, L[i]);
    r[i] = m;
  }
  return r;
}

CounterexampleRecord ramp_counterexample(int n, int grid_steps, double scale) {
  if (n < 2) throw std::invalid_argument("counterexample: n >= 2");
  if (grid_steps % (2 * n) != 0)
    throw std::invalid_argument(
        "counterexample: grid_steps must be a multiple of 2n so the ramp "
        "boundaries are grid points");
  const int N = grid_steps;
  const double dt = 1.0 / N;

  // Left-usc sampling: the ramp is closed at its right boundary (the
  // representation hypotheses require upper semicontinuity from the left),
  // except at T where the terminal value is pinned to 0.
  std::vector<double> Y(N + 1, 0.0);
  for (int k = 0; k < N; ++k) {
    const double t = static_cast<double>(k) / N;
    if (t >= 0.5 && t <= 0.5 + 1.0 / n) Y[k] = scale * (t - 0.5);
  }

  CounterexampleRecord rec;
  rec.n = n;
  rec.grid_steps = grid_steps;
  rec.dt = dt;
  rec.L = solve_deterministic_convex_envelope(Y, dt);

  auto formula = [&](double t) { return -2.0 * scale / (2.0 + n * (1.0 - 2.0 * t)); };
  for (int k = 0; k <= N / 2; ++k) {
    const double t = static_cast<double>(k) / N;
    rec.max_formula_error_first_half =
        std::max(rec.max_formula_error_first_half,
                 std::abs(rec.L[k] - formula(t)));
  }

  const std::vector<double> run = running_max_of(rec.L);
  // Printed formula, 0 outside [0, 1/2 + 1/n).
  std::vector<double> Lf(N, 0.0);
  for (int k = 0; k < N; ++k) {
    const double t = static_cast<double>(k) / N;
    Lf[k] = t < 0.5 + 1.0 / n ? formula(t) : 0.0;
  }
  const std::vector<double> runf = running_max_of(Lf);

  const VPlusPath limit = VPlusPath::constant(0.0, 1.0);
  rec.dl_computed = levy_distance(VPlusPath::from_grid(run, dt), limit);
  rec.dl_formula = levy_distance(VPlusPath::from_grid(runf, dt), limit);
  // Lhat at 1/2 = max over slots strictly before 1/2.
  rec.runmax_gap_at_half = std::abs(run[N / 2 - 1] - 0.0);
  return rec;
}

}  // namespace

CounterexampleRecord counterexample_i(int n, int grid_steps) {
  CounterexampleRecord rec = ramp_counterexample(n, grid_steps, 1.0);
  rec.value_at_half = rec.L[grid_steps / 2];
  rec.formula_at_half = -1.0;
  return rec;
}

CounterexampleRecord counterexample_ii(int n, int grid_steps) {
  CounterexampleRecord rec = ramp_counterexample(n, grid_steps, n);
  const std::vector<double> run = running_max_of(rec.L);
  rec.value_at_half = run[grid_steps / 2 - 1];  // Lhat^n_{1/2}
  rec.formula_at_half = -2.0 * n / (n + 2.0);
  return rec;
}

double convergence_budget(const ScenarioTree& tree,
                          const PerturbationFamily& family, int n) {
  auto [Yn, gn] = family.perturbed(n);
  const double dt = tree.grid().dt();
  double worst_f = 0.0;
  for (double ell : family.probe_levels) {
    double acc = 0.0;
    for (const auto& nd : tree.nodes()) {
      if (nd.children.empty()) continue;
      acc += tree.node_probability(nd.id) * dt *
             std::abs(generator_eval(gn, nd.id, ell) -
                      generator_eval(family.base_gen, nd.id, ell));
    }
    worst_f = std::max(worst_f, acc);
  }
  double e_sup = 0.0;
  for (const auto& path : tree.paths()) {
    double sup = 0.0;
    for (int id : path.nodes)
      sup = std::max(sup, std::abs(Yn[id] - family.base_Y[id]));
    e_sup += path.probability * sup;
  }
  return worst_f + e_sup;
}

std::vector<SweepPoint> stability_sweep(const ScenarioTree& tree,
                                        const PerturbationFamily& family,
                                        const std::vector<double>& levels,
                                        double eps) {
  LhatResult base = solve_level_grid(tree, family.base_Y, family.base_gen, levels);
  auto base_law = conditional_law(tree, [&](const PathRecord& path) {
    Outcome o;
    o.path = std::vector<double>();
    for (int k = 0; k < tree.grid().steps; ++k)
      o.path.push_back(base.running_max[path.nodes[k]]);
    return o;
  });

  std::vector<SweepPoint> out;
  for (int n : family.indices) {
    auto [Yn, gn] = family.perturbed(n);
    LhatResult ln = solve_level_grid(tree, Yn, gn, levels);
    SweepPoint pt;
    pt.n = n;
    pt.e_n = convergence_budget(tree, family, n);
    for (const auto& path : tree.paths()) {
      const double d = levy_distance(running_max_path(tree, ln.running_max, path),
                                     running_max_path(tree, base.running_max, path));
      pt.max_dl = std::max(pt.max_dl, d);
      if (d >= eps) pt.p_dl_exceed += path.probability;
    }
    auto law_n = conditional_law(tree, [&](const PathRecord& path) {
      Outcome o;
      for (int k = 0; k < tree.grid().steps; ++k)
        o.path.push_back(ln.running_max[path.nodes[k]]);
      return o;
    });
    pt.mean_dlp = levy_prokhorov(law_n, base_law);
    out.push_back(pt);
  }
  return out;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("spearman: need two samples of equal size");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return v[a] < v[b];
    });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(xs), ry = ranks(ys);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= rx.size();
  my /= ry.size();
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0 || dy == 0) return 0.0;
  return num / std::sqrt(dx * dy);
}

HittingConvergenceReport hitting_time_convergence(
    const ScenarioTree& tree, const PerturbationFamily& family, double level,
    const std::vector<double>& solver_levels, int truncate_index, double eps) {
  HittingConvergenceReport rep;
  LhatResult base = solve_level_grid(tree, family.base_Y, family.base_gen,
                                     solver_levels);
  auto [tau, tau_prime] = hitting_times(tree, base, level);
  for (const auto& path : tree.paths()) {
    if (stop_time_index(tree, tau, path) != stop_time_index(tree, tau_prime, path)) {
      rep.exceptional_level = true;
      return rep;
    }
  }
  const double dt = tree.grid().dt();
  for (int n : family.indices) {
    auto [Yn, gn] = family.perturbed(n);
    LhatResult ln = solve_level_grid(tree, Yn, gn, solver_levels);
    StoppingTime tn = hitting_times(tree, ln, level).first;
    HittingConvergencePoint pt;
    pt.n = n;
    for (const auto& path : tree.paths()) {
      const int a = std::min(stop_time_index(tree, tn, path), truncate_index);
      const int b = std::min(stop_time_index(tree, tau, path), truncate_index);
      if (std::abs(a - b) * dt > eps) pt.p_exceed += path.probability;
    }
    rep.points.push_back(pt);
  }
  return rep;
}

}  // namespace bekrep
