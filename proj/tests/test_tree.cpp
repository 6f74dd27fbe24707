#include <doctest.h>

#include <random>

#include "bekrep/tree.hpp"
#include "oracles.hpp"

using namespace bekrep;

namespace {

ScenarioTree two_period_binary(double p) {
  return ScenarioTree::uniform(TimeGrid{1.0, 2}, 2, {p, 1.0 - p});
}

}  // namespace

TEST_CASE("conditional expectation: one-period mean") {
  ScenarioTree tree = ScenarioTree::uniform(TimeGrid{1.0, 1}, 2);
  AdaptedProcess proc = AdaptedProcess::constant(tree, 0.0);
  proc[1] = 2.0;
  proc[2] = 4.0;
  CHECK(conditional_expectation(tree, proc, 0, 1) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("conditional expectation: identity at own time") {
  ScenarioTree tree = two_period_binary(0.3);
  AdaptedProcess proc = AdaptedProcess::constant(tree, 0.0);
  proc[1] = 7.5;
  CHECK(conditional_expectation(tree, proc, 1, 1) == 7.5);
}

TEST_CASE("conditional expectation: two-period hand path sum") {
  // p = (0.3, 0.7) each step, leaf values 1..4 left to right.
  ScenarioTree tree = two_period_binary(0.3);
  AdaptedProcess proc = AdaptedProcess::constant(tree, 0.0);
  const auto& leaves = tree.leaves();
  REQUIRE(leaves.size() == 4);
  for (int i = 0; i < 4; ++i) proc[leaves[i]] = i + 1.0;
  // Hand sum over the four path probabilities:
  // 0.09*1 + 0.21*2 + 0.21*3 + 0.49*4 = 3.1
  CHECK(conditional_expectation(tree, proc, 0, 2) ==
        doctest::Approx(3.1).epsilon(1e-14));
}

TEST_CASE("conditional expectation: errors") {
  ScenarioTree tree = two_period_binary(0.5);
  AdaptedProcess proc = AdaptedProcess::constant(tree, 1.0);
  CHECK_THROWS_AS(conditional_expectation(tree, proc, 99, 2), std::invalid_argument);
  CHECK_THROWS_AS(conditional_expectation(tree, proc, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(conditional_expectation(tree, proc, 0, 3), std::invalid_argument);
}

TEST_CASE("tower property on random trees") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    ScenarioTree tree = oracle::random_tree(rng, 3, 2);
    AdaptedProcess proc = oracle::random_Y(rng, tree);
    for (int leaf : tree.leaves()) proc[leaf] = oracle::uniform(rng);
    // E_0[E_t[proc at 3]] must equal E_0[proc at 3] for all intermediate t.
    for (int t = 1; t <= 2; ++t) {
      AdaptedProcess inner = AdaptedProcess::constant(tree, 0.0);
      for (int id : tree.nodes_at_time(t))
        inner[id] = conditional_expectation(tree, proc, id, 3);
      CHECK(conditional_expectation(tree, inner, 0, t) ==
            doctest::Approx(conditional_expectation(tree, proc, 0, 3))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("path probabilities sum to one, atoms partition") {
  std::mt19937_64 rng(7);
  ScenarioTree tree = oracle::random_tree(rng, 3, 2, 3);
  double total = 0.0;
  std::vector<double> atom_mass(tree.atom_count(), 0.0);
  for (const auto& p : tree.paths()) {
    total += p.probability;
    atom_mass[p.atom] += p.probability;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  double atom_total = 0.0;
  for (int a = 0; a < tree.atom_count(); ++a) {
    CHECK(atom_mass[a] == doctest::Approx(tree.atom_probability(a)).epsilon(1e-14));
    atom_total += tree.atom_probability(a);
  }
  CHECK(atom_total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("stopping time enumeration counts") {
  // Depth-1 single branch: stop at 0 or at 1.
  ScenarioTree chain1 = ScenarioTree::chain(TimeGrid{1.0, 1});
  CHECK(stopping_time_count(chain1) == 2);
  CHECK(enumerate_stopping_times(chain1).size() == 2);

  // Deterministic 3-step chain: one stopping time per instant.
  ScenarioTree chain3 = ScenarioTree::chain(TimeGrid{1.0, 3});
  CHECK(stopping_time_count(chain3) == 4);

  // Binary, three branching levels: 1 + (1 + (1+1)(1+1))^2 = 26.
  ScenarioTree b3 = ScenarioTree::uniform(TimeGrid{1.0, 3}, 2);
  CHECK(stopping_time_count(b3) == 26);
  auto all3 = enumerate_stopping_times(b3);
  CHECK(all3.size() == 26);

  // No duplicates; every element is a valid stopping time.
  for (std::size_t i = 0; i < all3.size(); ++i) {
    validate_stopping_time(b3, all3[i]);
    for (std::size_t j = i + 1; j < all3.size(); ++j) {
      bool same = true;
      for (const auto& path : b3.paths())
        same = same && stop_time_index(b3, all3[i], path) ==
                           stop_time_index(b3, all3[j], path);
      CHECK_FALSE(same);
    }
  }
}

TEST_CASE("stopping time enumeration refuses oversized trees") {
  ScenarioTree big = ScenarioTree::uniform(TimeGrid{1.0, 3}, 2);
  CHECK_THROWS_AS(enumerate_stopping_times(big, 2), refusal_error);
}

TEST_CASE("running sum") {
  TimeGrid grid{1.0, 4};  // dt = 0.25
  ScenarioTree chain = ScenarioTree::chain(grid);
  AdaptedProcess one = AdaptedProcess::constant(chain, 1.0);

  SUBCASE("constant integrand, stop at k") {
    for (int k = 0; k <= 4; ++k) {
      StoppingTime st;
      st.stop.assign(chain.size(), 0);
      st.stop[k] = 1;
      auto sums = running_sum(chain, one, st);
      CHECK(sums[0] == doctest::Approx(0.25 * k).epsilon(1e-14));
    }
  }
  SUBCASE("random integrand vs hand-rolled accumulation") {
    std::mt19937_64 rng(3);
    ScenarioTree tree = oracle::random_tree(rng, 2, 2);
    AdaptedProcess f = oracle::random_Y(rng, tree);
    auto taus = enumerate_stopping_times(tree);
    for (const auto& tau : taus) {
      auto sums = running_sum(tree, f, tau);
      for (std::size_t p = 0; p < tree.paths().size(); ++p) {
        const auto& path = tree.paths()[p];
        double acc = 0.0;
        for (int id : path.nodes) {
          if (tau.stop[id] || tree.is_terminal(id)) break;
          acc += f[id] * tree.grid().dt();
        }
        CHECK(sums[p] == doctest::Approx(acc).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("lattice from sde") {
  SUBCASE("degenerate diffusion is constant") {
    auto [tree, X] = build_lattice_from_sde(
        [](double, double) { return 0.0; }, [](double, double) { return 0.0; },
        1.5, TimeGrid{1.0, 3}, 2);
    for (int i = 0; i < tree.size(); ++i) CHECK(X[i] == 1.5);
  }
  SUBCASE("deterministic drift") {
    auto [tree, X] = build_lattice_from_sde(
        [](double, double) { return 1.0; }, [](double, double) { return 0.0; },
        2.0, TimeGrid{1.0, 2}, 2);
    for (const auto& n : tree.nodes()) {
      const double expected = 2.0 + 0.5 * n.t;
      CHECK(X[n.id] == doctest::Approx(expected).epsilon(1e-14));
    }
  }
  SUBCASE("moment match for binary and trinomial branching") {
    for (int branching : {2, 3}) {
      auto [tree, X] = build_lattice_from_sde(
          [](double, double x) { return 0.2 - 0.1 * x; },
          [](double, double x) { return 0.5 + 0.1 * x * x; }, 0.3,
          TimeGrid{1.0, 2}, branching);
      const double dt = tree.grid().dt();
      for (const auto& n : tree.nodes()) {
        if (n.children.empty()) continue;
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i)
          mean += n.prob[i] * X[n.children[i]];
        for (std::size_t i = 0; i < n.children.size(); ++i)
          var += n.prob[i] * (X[n.children[i]] - mean) * (X[n.children[i]] - mean);
        const double t = tree.grid().time(n.t);
        const double b = 0.2 - 0.1 * X[n.id];
        const double s = 0.5 + 0.1 * X[n.id] * X[n.id];
        CHECK(std::abs(mean - (X[n.id] + b * dt)) < 1e-10);
        CHECK(std::abs(var - s * s * dt) < 1e-10);
        (void)t;
      }
    }
  }
  SUBCASE("rejects non-finite coefficients") {
    CHECK_THROWS_AS(build_lattice_from_sde(
                        [](double, double) { return std::nan(""); },
                        [](double, double) { return 0.0; }, 0.0,
                        TimeGrid{1.0, 1}, 2),
                    std::invalid_argument);
  }
}

TEST_CASE("normalize terminal") {
  std::mt19937_64 rng(11);
  SUBCASE("constant process") {
    ScenarioTree tree = two_period_binary(0.4);
    auto [yhat, mart] = normalize_terminal(tree, AdaptedProcess::constant(tree, 3.0));
    for (int i = 0; i < tree.size(); ++i) {
      CHECK(yhat[i] == doctest::Approx(0.0).epsilon(1e-14));
      CHECK(mart[i] == doctest::Approx(3.0).epsilon(1e-14));
    }
  }
  SUBCASE("already terminal-zero") {
    ScenarioTree tree = two_period_binary(0.4);
    AdaptedProcess Y = oracle::random_Y(rng, tree);
    auto [yhat, mart] = normalize_terminal(tree, Y);
    for (int i = 0; i < tree.size(); ++i)
      CHECK(yhat[i] == doctest::Approx(Y[i]).epsilon(1e-14));
  }
  SUBCASE("random process: terminal zero, exact recomposition, tower") {
    for (int rep = 0; rep < 10; ++rep) {
      ScenarioTree tree = oracle::random_tree(rng, 2, 2);
      AdaptedProcess Y = oracle::random_Y(rng, tree);
      for (int leaf : tree.leaves()) Y[leaf] = 2.0 * oracle::uniform(rng) - 1.0;
      auto [yhat, mart] = normalize_terminal(tree, Y);
      for (int leaf : tree.leaves()) CHECK(std::abs(yhat[leaf]) < 1e-12);
      for (int i = 0; i < tree.size(); ++i)
        CHECK(Y[i] == doctest::Approx(yhat[i] + mart[i]).epsilon(1e-13));
      CHECK(std::abs(conditional_expectation(tree, yhat, 0, 2) -
                     conditional_expectation(tree, yhat, 0, 2)) < 1e-12);
      // E[Yhat_T | F_0] = 0.
      AdaptedProcess terminal_only = yhat;
      CHECK(std::abs(conditional_expectation(tree, terminal_only, 0,
                                             tree.grid().steps)) < 1e-12);
    }
  }
}

TEST_CASE("tree json round trip is lossless") {
  std::mt19937_64 rng(5);
  ScenarioTree tree = oracle::random_tree(rng, 3, 2, 2, 2.5);
  const std::string text = tree_to_json(tree);
  ScenarioTree back = tree_from_json(text);
  CHECK(back.size() == tree.size());
  CHECK(back.grid().horizon == tree.grid().horizon);
  CHECK(back.grid().steps == tree.grid().steps);
  for (int i = 0; i < tree.size(); ++i) {
    CHECK(back.node(i).t == tree.node(i).t);
    CHECK(back.node(i).parent == tree.node(i).parent);
    CHECK(back.node(i).children == tree.node(i).children);
    for (std::size_t c = 0; c < tree.node(i).prob.size(); ++c)
      CHECK(back.node(i).prob[c] == tree.node(i).prob[c]);
  }
  for (int leaf : tree.leaves())
    CHECK(back.atom_of_leaf(leaf) == tree.atom_of_leaf(leaf));
  CHECK(tree_to_json(back) == text);
}

TEST_CASE("tree invariants rejected") {
  // Branch probabilities must sum to one.
  std::vector<TreeNode> nodes(3);
  nodes[0] = {0, 0, -1, {1, 2}, {0.6, 0.6}};
  nodes[1] = {1, 1, 0, {}, {}};
  nodes[2] = {2, 1, 0, {}, {}};
  CHECK_THROWS_AS(ScenarioTree(TimeGrid{1.0, 1}, nodes), std::invalid_argument);
}
