#include <doctest.h>

#include <random>

#include "bekrep/representation.hpp"
#include "oracles.hpp"

using namespace bekrep;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AffineGenerator identity_gen(const ScenarioTree& tree) {
  return AffineGenerator{AdaptedProcess::constant(tree, 0.0), 1.0};
}

}  // namespace

TEST_CASE("snell: pay to wait stops immediately") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 3}, 2);
  auto res = snell_smallest_optimal(tree, AdaptedProcess::constant(tree, 0.0),
                                    AdaptedProcess::constant(tree, -1.0));
  CHECK(res.value == doctest::Approx(0.0));
  CHECK(res.smallest.stop[tree.root()] == 1);
}

TEST_CASE("snell: paid to wait stops at T") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 3}, 2);
  auto res = snell_smallest_optimal(tree, AdaptedProcess::constant(tree, 0.0),
                                    AdaptedProcess::constant(tree, 1.0));
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& n : tree.nodes())
    if (!n.children.empty()) CHECK(res.smallest.stop[n.id] == 0);
}

TEST_CASE("snell attains the exhaustive maximum and is node-wise consistent") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 3, 2);
    AdaptedProcess payoff = oracle::random_Y(rng, tree);
    AdaptedProcess running = oracle::random_Y(rng, tree);
    auto res = snell_smallest_optimal(tree, payoff, running);
    const double best = oracle::best_stopping_value(tree, payoff, running);
    CHECK(res.value == doctest::Approx(best).epsilon(1e-12));
    CHECK(oracle::stopping_objective(tree, payoff, running, res.smallest) ==
          doctest::Approx(best).epsilon(1e-12));
    // Envelope recursion Z = max(immediate, f dt + E[Z']).
    const double dt = tree.grid().dt();
    for (const auto& n : tree.nodes()) {
      if (n.children.empty()) continue;
      double cont = running[n.id] * dt;
      for (std::size_t i = 0; i < n.children.size(); ++i)
        cont += n.prob[i] * res.envelope[n.children[i]];
      CHECK(res.envelope[n.id] ==
            doctest::Approx(std::max(payoff[n.id], cont)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ell_root closed-form affine") {
  // Y deterministic chain (1, 0.5, 0), dt = 0.5, sigma = T: ell solves
  // ell * (0.5 + 0.5) = 1, so ell = 1.
  ScenarioTree chain = ScenarioTree::chain(TimeGrid{1.0, 2});
  AdaptedProcess Y{std::vector<double>{1.0, 0.5, 0.0}};
  StoppingTime sigma;
  sigma.stop.assign(chain.size(), 0);
  sigma.stop[2] = 1;
  CHECK(ell_root(chain, Y, identity_gen(chain), 0, sigma) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ell_root zero right side") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 2}, 2);
  AdaptedProcess Y = AdaptedProcess::constant(tree, 0.7);
  for (int leaf : tree.leaves()) Y[leaf] = 0.7;
  StoppingTime sigma = StoppingTime::stop_everywhere(tree);
  sigma.stop[0] = 0;
  CHECK(ell_root(tree, Y, identity_gen(tree), 0, sigma) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ell_root rejects sigma not strictly later") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 2}, 2);
  AdaptedProcess Y = AdaptedProcess::constant(tree, 0.0);
  StoppingTime sigma = StoppingTime::stop_everywhere(tree);
  CHECK_THROWS_AS(ell_root(tree, Y, identity_gen(tree), 0, sigma),
                  std::invalid_argument);
}

TEST_CASE("ell_root table bisection matches fine grid scan") {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 10; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 2, 2);
    AdaptedProcess Y = oracle::random_Y(rng, tree);
    GeneratorSpec gen = oracle::random_generator(rng, tree, true);
    auto sigmas = enumerate_stopping_times(tree);
    // sigma = stop at time >= 1 everywhere.
    StoppingTime sigma;
    sigma.stop.assign(tree.size(), 0);
    for (const auto& n : tree.nodes())
      if (n.t == 1) sigma.stop[n.id] = 1;
    const double root = ell_root(tree, Y, gen, 0, sigma);
    // Independent oracle: scan the monotone map on a fine grid.
    const double dt = tree.grid().dt();
    auto lhs = [&](double ell) {
      // E[sum over [0, sigma) of f dt] with sigma = time 1: only the root slot.
      return generator_eval(gen, 0, ell) * dt;
    };
    double rhs = Y[0];
    {
      const auto& n0 = tree.node(0);
      for (std::size_t i = 0; i < n0.children.size(); ++i)
        rhs -= n0.prob[i] * Y[n0.children[i]];
    }
    double best = -10.0, bestv = kInf;
    for (int i = 0; i <= 2000000; ++i) {
      const double ell = -10.0 + 20.0 * i / 2000000.0;
      const double v = std::abs(lhs(ell) - rhs);
      if (v < bestv) {
        bestv = v;
        best = ell;
      }
    }
    CHECK(std::abs(root - best) < 1e-4);  // grid pitch limited
    CHECK(std::abs(lhs(root) - rhs) < 1e-8);
  }
}

TEST_CASE("essinf oracle: zero process") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 2}, 2);
  LhatResult r = solve_essinf_bruteforce(
      tree, AdaptedProcess::constant(tree, 0.0), identity_gen(tree));
  for (const auto& n : tree.nodes()) {
    if (!n.children.empty())
      CHECK((*r.ell)[n.id] == doctest::Approx(0.0).epsilon(1e-12));
    if (n.id == tree.root())
      CHECK(r.lhat[n.id] == -kInf);
    else
      CHECK(r.lhat[n.id] == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(r.residual < 1e-12);
}

TEST_CASE("essinf oracle: linear case L == c") {
  const double c = 0.8;
  ScenarioTree chain = ScenarioTree::chain(TimeGrid{1.0, 4});
  AdaptedProcess Y = AdaptedProcess::constant(chain, 0.0);
  for (const auto& n : chain.nodes())
    Y[n.id] = c * (1.0 - chain.grid().time(n.t));
  LhatResult r = solve_essinf_bruteforce(chain, Y, identity_gen(chain));
  for (const auto& n : chain.nodes())
    if (!n.children.empty())
      CHECK((*r.ell)[n.id] == doctest::Approx(c).epsilon(1e-12));
  CHECK(verify_representation(chain, Y, identity_gen(chain), r,
                              enumerate_stopping_times(chain)) < 1e-12);
}

TEST_CASE("essinf oracle reproduces the ramp formula value") {
  // Truncated-ramp family (i), n = 4 on a chain with dt resolving 1/(2n):
  // at t = 0.25 the closed form gives -2/(2 + 4(1 - 0.5)) = -0.5.
  const int n = 4, N = 16;
  ScenarioTree chain = ScenarioTree::chain(TimeGrid{1.0, N});
  AdaptedProcess Y = AdaptedProcess::constant(chain, 0.0);
  for (int k = 0; k < N; ++k) {
    const double t = static_cast<double>(k) / N;
    if (t >= 0.5 && t <= 0.5 + 1.0 / n) Y[k] = t - 0.5;
  }
  LhatResult r = solve_essinf_bruteforce(chain, Y, identity_gen(chain), 64);
  const int slot = N / 4;  // t = 0.25
  CHECK((*r.ell)[slot] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("representation identity holds at every enumerated start (oracle)") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 2, 2);
    AdaptedProcess Y = oracle::random_Y(rng, tree);
    GeneratorSpec gen = oracle::random_generator(rng, tree, rep % 2 == 0);
    LhatResult r = solve_essinf_bruteforce(tree, Y, gen);
    const double res =
        verify_representation(tree, Y, gen, r, enumerate_stopping_times(tree));
    CHECK(res < 1e-9);
  }
}

TEST_CASE("level grid: zero process on a tiny grid") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 2}, 2);
  AdaptedProcess Y = AdaptedProcess::constant(tree, 0.0);
  LhatResult r = solve_level_grid(tree, Y, identity_gen(tree), {-1.0, 0.0, 1.0});
  // Indifferent ties stop early: tau_{-1} = tau_0 = 0, tau_1 = T.
  CHECK(r.stop_times[0].stop[0] == 1);
  CHECK(r.stop_times[1].stop[0] == 1);
  for (const auto& n : tree.nodes())
    if (!n.children.empty()) CHECK(r.stop_times[2].stop[n.id] == 0);
  for (const auto& n : tree.nodes()) {
    if (n.id == tree.root())
      CHECK(r.lhat[n.id] == -kInf);
    else
      CHECK(r.lhat[n.id] == doctest::Approx(0.0));
  }
}

TEST_CASE("level grid matches the ramp closed form within cell + dt") {
  // Family (i), n = 2, 400 levels on [-1.2, 0.2], N = 64.
  const int n = 2, N = 64;
  ScenarioTree chain = ScenarioTree::chain(TimeGrid{1.0, N});
  AdaptedProcess Y = AdaptedProcess::constant(chain, 0.0);
  for (int k = 0; k < N; ++k) {
    const double t = static_cast<double>(k) / N;
    if (t >= 0.5) Y[k] = t - 0.5;  // dip reaches T for n = 2
  }
  std::vector<double> levels(400);
  for (int i = 0; i < 400; ++i) levels[i] = -1.2 + 1.4 * i / 399.0;
  LhatResult r = solve_level_grid(chain, Y, identity_gen(chain), levels);
  // Closed form: Lhat = -2/(n+2) = -0.5 on (0, 1).
  double worst = 0.0;
  for (int k = 1; k < N; ++k) worst = std::max(worst, std::abs(r.lhat[k] + 0.5));
  CHECK(worst <= r.grid_cell + 1.0 / N);
  (void)n;
}

TEST_CASE("level grid agrees with the oracle within one cell") {
  std::mt19937_64 rng(303);
  for (int rep = 0; rep < 10; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 3, 2);
    AdaptedProcess Y = oracle::random_Y(rng, tree);
    GeneratorSpec gen = oracle::random_generator(rng, tree, rep % 2 == 1);
    LhatResult exact = solve_essinf_bruteforce(tree, Y, gen);
    LhatResult grid =
        solve_level_grid(tree, Y, gen, default_level_grid(tree, Y, gen, 257));
    for (int id = 0; id < tree.size(); ++id) {
      if (std::isinf(exact.lhat[id])) {
        CHECK(std::isinf(grid.lhat[id]));
        continue;
      }
      CHECK(grid.lhat[id] <= exact.lhat[id] + 1e-12);
      CHECK(grid.lhat[id] >= exact.lhat[id] - grid.grid_cell - 1e-12);
    }
  }
}

TEST_CASE("tau_ell is monotone in ell path-wise") {
  std::mt19937_64 rng(404);
  ScenarioTree tree = oracle::random_tree(rng, 3, 2);
  AdaptedProcess Y = oracle::random_Y(rng, tree);
  GeneratorSpec gen = oracle::random_generator(rng, tree, false);
  LhatResult r = solve_level_grid(tree, Y, gen, default_level_grid(tree, Y, gen, 65));
  for (std::size_t i = 1; i < r.levels.size(); ++i)
    for (const auto& path : tree.paths())
      CHECK(stop_time_index(tree, r.stop_times[i], path) >=
            stop_time_index(tree, r.stop_times[i - 1], path));
}

TEST_CASE("grid refinement never increases the distance to the oracle") {
  std::mt19937_64 rng(505);
  for (int rep = 0; rep < 5; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 2, 2);
    AdaptedProcess Y = oracle::random_Y(rng, tree);
    GeneratorSpec gen = oracle::random_generator(rng, tree, false);
    LhatResult exact = solve_essinf_bruteforce(tree, Y, gen);
    // Nested grids with identical span: 2k+1 then 4k+1 points.
    std::vector<double> coarse = default_level_grid(tree, Y, gen, 33);
    std::vector<double> fine = default_level_grid(tree, Y, gen, 65);
    LhatResult rc = solve_level_grid(tree, Y, gen, coarse);
    LhatResult rf = solve_level_grid(tree, Y, gen, fine);
    for (int id = 0; id < tree.size(); ++id) {
      if (std::isinf(exact.lhat[id])) continue;
      const double dc = std::abs(rc.lhat[id] - exact.lhat[id]);
      const double df = std::abs(rf.lhat[id] - exact.lhat[id]);
      CHECK(df <= dc + 1e-12);
      CHECK(df <= rf.grid_cell + 1e-12);
    }
  }
}

TEST_CASE("monotone comparison: supermartingale shift with smaller generator") {
  // If Y1 - Y2 is a supermartingale and f1 <= f2 node-wise, then
  // Lhat1 >= Lhat2 node-wise.
  std::mt19937_64 rng(606);
  for (int rep = 0; rep < 10; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 3, 2);
    AdaptedProcess Y2 = oracle::random_Y(rng, tree);
    // Terminal-zero supermartingale: S_t = E[sum of future positives | F_t].
    AdaptedProcess g = AdaptedProcess::constant(tree, 0.0);
    for (const auto& nd : tree.nodes())
      if (!nd.children.empty()) g[nd.id] = oracle::uniform(rng);
    AdaptedProcess S = AdaptedProcess::constant(tree, 0.0);
    for (int t = tree.grid().steps; t >= 0; --t) {
      for (int id : tree.nodes_at_time(t)) {
        const auto& nd = tree.node(id);
        if (nd.children.empty()) continue;
        double next = 0.0;
        for (std::size_t i = 0; i < nd.children.size(); ++i)
          next += nd.prob[i] * S[nd.children[i]];
        S[id] = g[id] * tree.grid().dt() + next;
      }
    }
    AdaptedProcess Y1 = Y2;
    for (int i = 0; i < tree.size(); ++i) Y1[i] += S[i];

    AffineGenerator f2 = identity_gen(tree);
    AffineGenerator f1 = f2;
    const double drop = oracle::uniform(rng);
    for (int i = 0; i < tree.size(); ++i) f1.intercept[i] -= drop;

    LhatResult r1 = solve_essinf_bruteforce(tree, Y1, f1);
    LhatResult r2 = solve_essinf_bruteforce(tree, Y2, f2);
    for (int id = 0; id < tree.size(); ++id) {
      if (std::isinf(r1.lhat[id])) continue;
      CHECK(r1.lhat[id] >= r2.lhat[id] - 1e-10);
    }
  }
}

TEST_CASE("scale equivariance for Affine(0, b)") {
  std::mt19937_64 rng(707);
  ScenarioTree tree = oracle::random_tree(rng, 3, 2);
  AdaptedProcess Y = oracle::random_Y(rng, tree);
  AffineGenerator gen{AdaptedProcess::constant(tree, 0.0), 0.7};
  LhatResult r1 = solve_essinf_bruteforce(tree, Y, gen);
  const double c = 2.75;
  AdaptedProcess cY = Y;
  for (int i = 0; i < tree.size(); ++i) cY[i] *= c;
  LhatResult r2 = solve_essinf_bruteforce(tree, cY, gen);
  for (int id = 0; id < tree.size(); ++id) {
    if (std::isinf(r1.lhat[id])) continue;
    CHECK(r2.lhat[id] == doctest::Approx(c * r1.lhat[id]).epsilon(1e-12));
  }
}

TEST_CASE("deterministic envelope solver") {
  SUBCASE("flat data gives zero") {
    std::vector<double> Y(9, 0.0);
    auto L = solve_deterministic_convex_envelope(Y, 0.125);
    for (double v : L) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("family (ii), n = 2: L_0 = -1 and Lhat at 1/2 is -1") {
    const int n = 2, N = 64;
    std::vector<double> Y(N + 1, 0.0);
    for (int k = 0; k < N; ++k) {
      const double t = static_cast<double>(k) / N;
      if (t >= 0.5) Y[k] = n * (t - 0.5);
    }
    auto L = solve_deterministic_convex_envelope(Y, 1.0 / N);
    // L_t = -4/(2 + 2(1 - 2t)) at t = 0 gives -1 (up to the half-open
    // endpoint effect of order dt).
    CHECK(std::abs(L[0] + 1.0) < 2.0 / N);
    double run = -kInf;
    for (int k = 0; k < N / 2; ++k) run = std::max(run, L[k]);
    CHECK(std::abs(run + 1.0) < 2.0 / N);
  }
  SUBCASE("family limits: (i) vanishes, (ii) stays near -2") {
    double prev_sup = kInf;
    for (int n : {2, 4, 8, 16}) {
      const int N = 32 * n;
      std::vector<double> Yi(N + 1, 0.0), Yii(N + 1, 0.0);
      for (int k = 0; k < N; ++k) {
        const double t = static_cast<double>(k) / N;
        if (t >= 0.5 && t <= 0.5 + 1.0 / n) {
          Yi[k] = t - 0.5;
          Yii[k] = n * (t - 0.5);
        }
      }
      auto Li = solve_deterministic_convex_envelope(Yi, 1.0 / N);
      auto Lii = solve_deterministic_convex_envelope(Yii, 1.0 / N);
      // sup distance of the (i) running max to 0 shrinks in n.
      double run = -kInf, sup = 0.0;
      for (int k = 0; k < N; ++k) {
        run = std::max(run, Li[k]);
        sup = std::max(sup, std::abs(std::min(run, 0.0)));
      }
      CHECK(sup <= prev_sup + 1e-12);
      prev_sup = sup;
      // (ii) running max at 1/2 equals -2n/(n+2); for n = 2 the ramp end sits
      // at T where the terminal value is pinned, costing one grid cell.
      double run2 = -kInf;
      for (int k = 0; k < N / 2; ++k) run2 = std::max(run2, Lii[k]);
      CHECK(std::abs(run2 + 2.0 * n / (n + 2)) <= 2.0 / N + 1e-12);
    }
  }
  SUBCASE("matches the chord-min oracle on random chains") {
    std::mt19937_64 rng(808);
    for (int rep = 0; rep < 20; ++rep) {
      const int N = 12;
      std::vector<double> Y(N + 1);
      for (int k = 0; k < N; ++k) Y[k] = 2.0 * oracle::uniform(rng) - 1.0;
      Y[N] = 0.0;
      auto L = solve_deterministic_convex_envelope(Y, 1.0 / N);
      auto L_oracle = oracle::chord_min_L(Y, 1.0 / N);
      for (int k = 0; k < N; ++k)
        CHECK(L[k] == doctest::Approx(L_oracle[k]).epsilon(1e-12));
    }
  }
  SUBCASE("matches the tree oracle on chains to 1e-9") {
    std::mt19937_64 rng(909);
    const int N = 6;
    ScenarioTree chain = ScenarioTree::chain(TimeGrid{1.0, N});
    std::vector<double> Yv(N + 1);
    for (int k = 0; k < N; ++k) Yv[k] = 2.0 * oracle::uniform(rng) - 1.0;
    Yv[N] = 0.0;
    auto L = solve_deterministic_convex_envelope(Yv, 1.0 / N);
    LhatResult r = solve_essinf_bruteforce(chain, AdaptedProcess{Yv},
                                           identity_gen(chain));
    double run_det = -kInf;
    for (int k = 0; k < N; ++k) {
      run_det = std::max(run_det, L[k]);
      CHECK(run_det == doctest::Approx(r.running_max[k]).epsilon(1e-9));
    }
  }
  SUBCASE("rejects degenerate input") {
    CHECK_THROWS_AS(solve_deterministic_convex_envelope({0.0}, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_deterministic_convex_envelope({0.0, 1.0}, 0.1),
                    std::invalid_argument);
  }
}

TEST_CASE("verify_representation tolerances by method") {
  std::mt19937_64 rng(111);
  ScenarioTree tree = oracle::random_tree(rng, 2, 2);
  AdaptedProcess Y = oracle::random_Y(rng, tree);
  GeneratorSpec gen = oracle::random_generator(rng, tree, false);
  auto starts = enumerate_stopping_times(tree);

  LhatResult exact = solve_essinf_bruteforce(tree, Y, gen);
  CHECK(verify_representation(tree, Y, gen, exact, starts) < 1e-9);

  LhatResult grid =
      solve_level_grid(tree, Y, gen, default_level_grid(tree, Y, gen, 257));
  const double slope = generator_max_slope(gen);
  CHECK(verify_representation(tree, Y, gen, grid, starts) <=
        grid.grid_cell * tree.grid().horizon * std::max(1.0, slope) + 1e-12);
}

TEST_CASE("lhat json shape") {
  ScenarioTree tree = ScenarioTree::chain(TimeGrid{1.0, 2});
  AdaptedProcess Y = AdaptedProcess::constant(tree, 0.0);
  LhatResult r = solve_level_grid(tree, Y, identity_gen(tree), {-1.0, 0.0, 1.0});
  const std::string j = lhat_to_json(tree, r);
  CHECK(j.find("\"levels\"") != std::string::npos);
  CHECK(j.find("\"-inf\"") != std::string::npos);
  CHECK(j.find("\"stop_times\"") != std::string::npos);
  CHECK(j.find("\"residual\"") != std::string::npos);
}
