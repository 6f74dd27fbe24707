#include "bekrep/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bekrep {

void TimeGrid::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("TimeGrid: horizon must be finite and > 0");
  if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
  const double recomposed = dt() * steps;
  if (std::abs(recomposed - horizon) >
      std::numeric_limits<double>::epsilon() * horizon)
    throw std::invalid_argument("TimeGrid: dt*N does not recompose T");
}

ScenarioTree::ScenarioTree(TimeGrid grid, std::vector<TreeNode> nodes,
                           std::map<int, int> atom_of_leaf)
    : grid_(grid), nodes_(std::move(nodes)), atom_of_leaf_(std::move(atom_of_leaf)) {
  grid_.validate();
  if (nodes_.empty()) throw std::invalid_argument("ScenarioTree: no nodes");
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (nodes_[i].id != i)
      throw std::invalid_argument("ScenarioTree: node ids must be 0..n-1 in order");
  }
  if (nodes_[0].parent != -1 || nodes_[0].t != 0)
    throw std::invalid_argument("ScenarioTree: node 0 must be the root at time 0");
  for (const auto& n : nodes_) {
    if (n.id != 0) {
      if (n.parent < 0 || n.parent >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument("ScenarioTree: bad parent id");
      if (nodes_[n.parent].t + 1 != n.t)
        throw std::invalid_argument("ScenarioTree: child time must be parent time + 1");
    }
    if (n.children.size() != n.prob.size())
      throw std::invalid_argument("ScenarioTree: children/prob size mismatch");
    if (!n.children.empty()) {
      double s = 0.0;
      for (double p : n.prob) {
        if (!(p > 0.0)) throw std::invalid_argument("ScenarioTree: branch probabilities must be > 0");
        s += p;
      }
      if (std::abs(s - 1.0) > detail::kProbTolerance)
        throw std::invalid_argument("ScenarioTree: branch probabilities must sum to 1");
    }
    for (int c : n.children) {
      if (c < 0 || c >= static_cast<int>(nodes_.size()) || nodes_[c].parent != n.id)
        throw std::invalid_argument("ScenarioTree: inconsistent child link");
    }
    if (n.children.empty() && n.t != grid_.steps)
      throw std::invalid_argument("ScenarioTree: every path must reach time index N");
    if (!n.children.empty() && n.t >= grid_.steps)
      throw std::invalid_argument("ScenarioTree: nodes past the horizon");
  }
  build_derived();
}

void ScenarioTree::build_derived() {
  by_time_.assign(grid_.steps + 1, {});
  node_prob_.assign(nodes_.size(), 0.0);
  node_prob_[0] = 1.0;
  for (const auto& n : nodes_) {
    by_time_[n.t].push_back(n.id);
    for (std::size_t i = 0; i < n.children.size(); ++i)
      node_prob_[n.children[i]] = node_prob_[n.id] * n.prob[i];
  }
  leaves_.clear();
  for (const auto& n : nodes_)
    if (n.children.empty()) leaves_.push_back(n.id);

  atom_count_ = 0;
  for (int leaf : leaves_) {
    auto it = atom_of_leaf_.find(leaf);
    int a = (it == atom_of_leaf_.end()) ? 0 : it->second;
    if (a < 0) throw std::invalid_argument("ScenarioTree: negative atom index");
    atom_of_leaf_[leaf] = a;
    atom_count_ = std::max(atom_count_, a + 1);
  }
  if (atom_count_ == 0) atom_count_ = 1;

  paths_.clear();
  atom_prob_.assign(atom_count_, 0.0);
  double total = 0.0;
  for (int leaf : leaves_) {
    PathRecord rec;
    rec.atom = atom_of_leaf_[leaf];
    int cur = leaf;
    while (cur != -1) {
      rec.nodes.push_back(cur);
      cur = nodes_[cur].parent;
    }
    std::reverse(rec.nodes.begin(), rec.nodes.end());
    rec.probability = node_prob_[leaf];
    atom_prob_[rec.atom] += rec.probability;
    total += rec.probability;
    paths_.push_back(std::move(rec));
  }
  if (std::abs(total - 1.0) > detail::kProbTolerance)
    throw std::invalid_argument("ScenarioTree: path probabilities do not sum to 1");
  for (int a = 0; a < atom_count_; ++a)
    if (!(atom_prob_[a] > 0.0))
      throw std::invalid_argument("ScenarioTree: atom of zero probability");
}

int ScenarioTree::atom_of_leaf(int leaf) const {
  auto it = atom_of_leaf_.find(leaf);
  if (it == atom_of_leaf_.end())
    throw std::invalid_argument("ScenarioTree: not a leaf id");
  return it->second;
}

ScenarioTree ScenarioTree::chain(TimeGrid grid) {
  std::vector<TreeNode> nodes(grid.steps + 1);
  for (int k = 0; k <= grid.steps; ++k) {
    nodes[k].id = k;
    nodes[k].t = k;
    nodes[k].parent = k == 0 ? -1 : k - 1;
    if (k < grid.steps) {
      nodes[k].children = {k + 1};
      nodes[k].prob = {1.0};
    }
  }
  return ScenarioTree(grid, std::move(nodes));
}

ScenarioTree ScenarioTree::uniform(TimeGrid grid, int branching,
                                   std::vector<double> probs, int atom_count) {
  if (branching < 1) throw std::invalid_argument("uniform: branching must be >= 1");
  if (probs.empty())
    probs.assign(branching, 1.0 / branching);
  if (static_cast<int>(probs.size()) != branching)
    throw std::invalid_argument("uniform: probs size must equal branching");

  std::vector<TreeNode> nodes;
  nodes.push_back(TreeNode{0, 0, -1, {}, {}});
  std::vector<int> frontier = {0};
  for (int t = 1; t <= grid.steps; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      for (int b = 0; b < branching; ++b) {
        int id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{id, t, parent, {}, {}});
        nodes[parent].children.push_back(id);
        nodes[parent].prob.push_back(probs[b]);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  std::map<int, int> atoms;
  if (atom_count > 1) {
    int i = 0;
    for (int leaf : frontier) atoms[leaf] = (i++) % atom_count;
  }
  return ScenarioTree(grid, std::move(nodes), std::move(atoms));
}

int stop_node(const ScenarioTree& tree, const StoppingTime& st,
              const PathRecord& path) {
  for (int id : path.nodes) {
    if (tree.is_terminal(id) || (id < static_cast<int>(st.stop.size()) && st.stop[id]))
      return id;
  }
  return path.nodes.back();
}

int stop_time_index(const ScenarioTree& tree, const StoppingTime& st,
                    const PathRecord& path) {
  return tree.node(stop_node(tree, st, path)).t;
}

void validate_stopping_time(const ScenarioTree& tree, const StoppingTime& st) {
  if (static_cast<int>(st.stop.size()) != tree.size())
    throw std::invalid_argument("StoppingTime: size mismatch with tree");
  // Terminal nodes are implicitly flagged, so every path stops; nothing else
  // to check structurally.
}

double conditional_expectation(const ScenarioTree& tree,
                               const AdaptedProcess& proc, int at_node,
                               int of_time) {
  if (at_node < 0 || at_node >= tree.size())
    throw std::invalid_argument("conditional_expectation: node not in tree");
  if (proc.size() != tree.size())
    throw std::invalid_argument("conditional_expectation: process size mismatch");
  const TreeNode& n = tree.node(at_node);
  if (of_time < n.t || of_time > tree.grid().steps)
    throw std::invalid_argument("conditional_expectation: of_time out of range");
  if (n.t == of_time) return proc[at_node];
  double acc = 0.0;
  for (std::size_t i = 0; i < n.children.size(); ++i)
    acc += n.prob[i] * conditional_expectation(tree, proc, n.children[i], of_time);
  return acc;
}

namespace {

std::uint64_t count_below(const ScenarioTree& tree, int id, bool& overflow) {
  const TreeNode& n = tree.node(id);
  if (n.children.empty()) return 1;
  long double prod = 1.0L;
  std::uint64_t p = 1;
  for (int c : n.children) {
    std::uint64_t cc = count_below(tree, c, overflow);
    prod *= cc;
    if (prod > 1e18L) overflow = true;
    p *= cc;
  }
  return 1 + p;
}

void enumerate_below(const ScenarioTree& tree, int id,
                     std::vector<std::vector<int>>& out) {
  // Each element is the list of stop nodes of one stopping time of the
  // subtree rooted at `id`.
  const TreeNode& n = tree.node(id);
  out.clear();
  out.push_back({id});  // stop here
  if (n.children.empty()) return;
  std::vector<std::vector<std::vector<int>>> per_child(n.children.size());
  for (std::size_t i = 0; i < n.children.size(); ++i)
    enumerate_below(tree, n.children[i], per_child[i]);
  // Cartesian product of children choices = "continue at id".
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

}  // namespace

std::uint64_t stopping_time_count(const ScenarioTree& tree) {
  bool overflow = false;
  std::uint64_t c = count_below(tree, tree.root(), overflow);
  if (overflow) throw refusal_error("stopping_time_count: count overflows");
  return c;
}

std::vector<StoppingTime> enumerate_stopping_times(const ScenarioTree& tree,
                                                   std::size_t max_paths) {
  if (tree.paths().size() > max_paths)
    throw refusal_error(
        "enumerate_stopping_times: tree has " +
        std::to_string(tree.paths().size()) + " paths, limit is " +
        std::to_string(max_paths));
  bool overflow = false;
  std::uint64_t count = count_below(tree, tree.root(), overflow);
  constexpr std::uint64_t kMaxCount = 1u << 20;
  if (overflow || count > kMaxCount)
    throw refusal_error("enumerate_stopping_times: " + std::to_string(count) +
                        " stopping times exceed the enumeration cap");

  std::vector<std::vector<int>> stops;
  enumerate_below(tree, tree.root(), stops);
  std::vector<StoppingTime> out;
  out.reserve(stops.size());
  for (const auto& s : stops) {
    StoppingTime st;
    st.stop.assign(tree.size(), 0);
    for (int id : s) st.stop[id] = 1;
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<double> running_sum(const ScenarioTree& tree,
                                const AdaptedProcess& integrand,
                                const StoppingTime& upto) {
  if (integrand.size() != tree.size())
    throw std::invalid_argument("running_sum: integrand size mismatch");
  if (static_cast<int>(upto.stop.size()) != tree.size())
    throw std::invalid_argument("running_sum: stopping time size mismatch");
  const double dt = tree.grid().dt();
  std::vector<double> out;
  out.reserve(tree.paths().size());
  for (const auto& path : tree.paths()) {
    const int stop_t = stop_time_index(tree, upto, path);
    double acc = 0.0;
    for (int id : path.nodes) {
      if (tree.node(id).t >= stop_t) break;
      acc += integrand[id] * dt;
    }
    out.push_back(acc);
  }
  return out;
}

std::pair<ScenarioTree, AdaptedProcess> build_lattice_from_sde(
    const SdeCoefficient& b, const SdeCoefficient& sigma, double x0,
    TimeGrid grid, int branching, int atom_count) {
  if (branching != 2 && branching != 3)
    throw std::invalid_argument("build_lattice_from_sde: branching must be 2 or 3");
  grid.validate();
  const double dt = grid.dt();
  const double sdt = std::sqrt(dt);

  // Quantization points with mean 0 and variance 1.
  std::vector<double> z, pz;
  if (branching == 2) {
    z = {-1.0, 1.0};
    pz = {0.5, 0.5};
  } else {
    const double s3 = std::sqrt(3.0);
    z = {-s3, 0.0, s3};
    pz = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
  }

  std::vector<TreeNode> nodes;
  std::vector<double> xval;
  nodes.push_back(TreeNode{0, 0, -1, {}, {}});
  xval.push_back(x0);
  std::vector<int> frontier = {0};
  for (int t = 1; t <= grid.steps; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      const double x = xval[parent];
      const double tcur = grid.time(t - 1);
      const double drift = b(tcur, x);
      const double vol = sigma(tcur, x);
      if (!std::isfinite(drift) || !std::isfinite(vol))
        throw std::invalid_argument("build_lattice_from_sde: non-finite coefficients");
      for (int i = 0; i < branching; ++i) {
        int id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{id, t, parent, {}, {}});
        nodes[parent].children.push_back(id);
        nodes[parent].prob.push_back(pz[i]);
        xval.push_back(x + drift * dt + vol * sdt * z[i]);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  std::map<int, int> atoms;
  if (atom_count > 1) {
    int i = 0;
    for (int leaf : frontier) atoms[leaf] = (i++) % atom_count;
  }
  ScenarioTree tree(grid, std::move(nodes), std::move(atoms));
  return {std::move(tree), AdaptedProcess(std::move(xval))};
}

std::pair<AdaptedProcess, AdaptedProcess> normalize_terminal(
    const ScenarioTree& tree, const AdaptedProcess& Y) {
  if (Y.size() != tree.size())
    throw std::invalid_argument("normalize_terminal: size mismatch");
  AdaptedProcess mart = AdaptedProcess::constant(tree, 0.0);
  // Backward conditional expectations of Y_T.
  for (int t = tree.grid().steps; t >= 0; --t) {
    for (int id : tree.nodes_at_time(t)) {
      const TreeNode& n = tree.node(id);
      if (n.children.empty()) {
        mart[id] = Y[id];
      } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i)
          acc += n.prob[i] * mart[n.children[i]];
        mart[id] = acc;
      }
    }
  }
  AdaptedProcess yhat = Y;
  for (int i = 0; i < tree.size(); ++i) yhat[i] -= mart[i];
  return {std::move(yhat), std::move(mart)};
}

}  // namespace bekrep
