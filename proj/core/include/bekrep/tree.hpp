#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace bekrep {

/// Thrown when an operation declines to run because the input is too large
/// (e.g. stopping-time enumeration on a tree with too many paths).
class refusal_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Uniform time grid on [0, T]: t_k = k * T / N.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  double dt() const { return horizon / steps; }
  double time(int k) const { return horizon * k / steps; }
  void validate() const;
};

/// One node of a scenario tree. `prob[i]` is the branch probability of
/// `children[i]` conditional on reaching this node.
struct TreeNode {
  int id = 0;
  int t = 0;
  int parent = -1;  // -1 for the root
  std::vector<int> children;
  std::vector<double> prob;
};

/// A root-to-leaf scenario: node ids (one per time index), its probability
/// and the common-noise atom it belongs to.
struct PathRecord {
  std::vector<int> nodes;
  double probability = 0.0;
  int atom = 0;
};

/// Finite filtered probability space: a rooted tree whose levels are the time
/// indices of a uniform grid, with strictly positive branch probabilities and
/// a finite partition of the leaves into common-noise atoms.
class ScenarioTree {
public:
  ScenarioTree(TimeGrid grid, std::vector<TreeNode> nodes,
               std::map<int, int> atom_of_leaf = {});

  /// Deterministic chain with N+1 nodes.
  static ScenarioTree chain(TimeGrid grid);
  /// Non-recombining tree with the same branch count and probabilities at
  /// every non-terminal node. Empty `probs` means uniform.
  static ScenarioTree uniform(TimeGrid grid, int branching,
                              std::vector<double> probs = {},
                              int atom_count = 1);

  const TimeGrid& grid() const { return grid_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int root() const { return 0; }
  bool is_terminal(int id) const { return nodes_.at(id).children.empty(); }

  const std::vector<int>& leaves() const { return leaves_; }
  const std::vector<PathRecord>& paths() const { return paths_; }
  const std::vector<int>& nodes_at_time(int t) const { return by_time_.at(t); }

  /// Unconditional probability of reaching a node.
  double node_probability(int id) const { return node_prob_.at(id); }

  int atom_count() const { return atom_count_; }
  int atom_of_leaf(int leaf) const;
  double atom_probability(int atom) const { return atom_prob_.at(atom); }

private:
  void build_derived();

  TimeGrid grid_;
  std::vector<TreeNode> nodes_;
  std::map<int, int> atom_of_leaf_;
  int atom_count_ = 1;

  std::vector<int> leaves_;
  std::vector<PathRecord> paths_;
  std::vector<std::vector<int>> by_time_;
  std::vector<double> node_prob_;
  std::vector<double> atom_prob_;
};

/// Node-indexed real values; adaptedness is structural.
struct AdaptedProcess {
  std::vector<double> v;

  AdaptedProcess() = default;
  explicit AdaptedProcess(std::vector<double> values) : v(std::move(values)) {}
  static AdaptedProcess constant(const ScenarioTree& tree, double c) {
    return AdaptedProcess(std::vector<double>(tree.size(), c));
  }

  double& operator[](int id) { return v.at(id); }
  const double& operator[](int id) const { return v.at(id); }
  int size() const { return static_cast<int>(v.size()); }
};

/// Stop region flags; the stopping value of a path is the first flagged
/// node's time index. Terminal nodes are implicitly flagged.
struct StoppingTime {
  std::vector<std::uint8_t> stop;

  static StoppingTime stop_everywhere(const ScenarioTree& tree) {
    StoppingTime st;
    st.stop.assign(tree.size(), 1);
    return st;
  }
};

/// First stop node of `st` along `path`; falls back to the leaf.
int stop_node(const ScenarioTree& tree, const StoppingTime& st,
              const PathRecord& path);
/// Time index of the first stop along `path`.
int stop_time_index(const ScenarioTree& tree, const StoppingTime& st,
                    const PathRecord& path);
void validate_stopping_time(const ScenarioTree& tree, const StoppingTime& st);

/// E[proc at `of_time` | F_{at_node}] by backward recursion over the subtree.
double conditional_expectation(const ScenarioTree& tree,
                               const AdaptedProcess& proc, int at_node,
                               int of_time);

/// Number of stopping times of the tree: each node contributes
/// 1 + prod over children of the children's counts.
std::uint64_t stopping_time_count(const ScenarioTree& tree);

/// Complete list of stopping times. Refuses when the tree has more than
/// `max_paths` scenarios or the closed-form count exceeds an internal cap.
std::vector<StoppingTime> enumerate_stopping_times(const ScenarioTree& tree,
                                                   std::size_t max_paths = 64);

/// Per-path value of sum_{s < tau} integrand(s) * dt, aligned with
/// tree.paths().
std::vector<double> running_sum(const ScenarioTree& tree,
                                const AdaptedProcess& integrand,
                                const StoppingTime& upto);

using SdeCoefficient = std::function<double(double t, double x)>;

/// Euler-style non-recombining lattice for dX = b dt + sigma dW, with a
/// branching-point quantization whose one-step conditional mean and variance
/// match b*dt and sigma^2*dt. Supported branching: 2 (+-1) and 3 (sqrt(3)
/// trinomial).
std::pair<ScenarioTree, AdaptedProcess> build_lattice_from_sde(
    const SdeCoefficient& b, const SdeCoefficient& sigma, double x0,
    TimeGrid grid, int branching, int atom_count = 1);

/// Splits Y into (Yhat, M) with Yhat_t = Y_t - E[Y_T | F_t] and M the
/// martingale part, so Yhat is terminal-zero and Y = Yhat + M node-wise.
std::pair<AdaptedProcess, AdaptedProcess> normalize_terminal(
    const ScenarioTree& tree, const AdaptedProcess& Y);

/// Lossless JSON round trip: {grid:{T,N}, nodes:[...], atoms:{leaf->atom}}.
std::string tree_to_json(const ScenarioTree& tree);
ScenarioTree tree_from_json(const std::string& text);

namespace detail {
inline constexpr double kProbTolerance = 1e-12;
}

}  // namespace bekrep
