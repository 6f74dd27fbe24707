#include "bekrep/generator.hpp"

#include <algorithm>
#include <cmath>

namespace bekrep {

namespace {

double table_eval(const TableGenerator& g, int node, double ell) {
  const auto& row = g.values.at(node);
  const auto& k = g.knots;
  if (ell <= k.front()) return row.front() + g.ext_slope * (ell - k.front());
  if (ell >= k.back()) return row.back() + g.ext_slope * (ell - k.back());
  auto it = std::upper_bound(k.begin(), k.end(), ell);
  std::size_t hi = static_cast<std::size_t>(it - k.begin());
  std::size_t lo = hi - 1;
  const double w = (ell - k[lo]) / (k[hi] - k[lo]);
  return row[lo] + w * (row[hi] - row[lo]);
}

double table_invert(const TableGenerator& g, int node, double y) {
  const auto& row = g.values.at(node);
  const auto& k = g.knots;
  if (y <= row.front()) return k.front() + (y - row.front()) / g.ext_slope;
  if (y >= row.back()) return k.back() + (y - row.back()) / g.ext_slope;
  auto it = std::upper_bound(row.begin(), row.end(), y);
  std::size_t hi = static_cast<std::size_t>(it - row.begin());
  std::size_t lo = hi - 1;
  const double w = (y - row[lo]) / (row[hi] - row[lo]);
  return k[lo] + w * (k[hi] - k[lo]);
}

}  // namespace

void validate_generator(const ScenarioTree& tree, const GeneratorSpec& gen) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen)) {
    if (a->intercept.size() != tree.size())
      throw std::invalid_argument("AffineGenerator: intercept size mismatch");
    if (!(a->slope > 0.0))
      throw std::invalid_argument("AffineGenerator: slope must be > 0");
    return;
  }
  const auto& t = std::get<TableGenerator>(gen);
  if (!(t.ext_slope > 0.0))
    throw std::invalid_argument("TableGenerator: ext_slope must be > 0");
  if (t.knots.size() < 2)
    throw std::invalid_argument("TableGenerator: need at least 2 knots");
  for (std::size_t i = 1; i < t.knots.size(); ++i)
    if (!(t.knots[i] > t.knots[i - 1]))
      throw std::invalid_argument("TableGenerator: knots must be increasing");
  if (static_cast<int>(t.values.size()) != tree.size())
    throw std::invalid_argument("TableGenerator: one value row per node required");
  const double min_gap = 1e-12 * t.ext_slope;
  for (const auto& row : t.values) {
    if (row.size() != t.knots.size())
      throw std::invalid_argument("TableGenerator: row/knots size mismatch");
    for (std::size_t i = 1; i < row.size(); ++i)
      if (!(row[i] - row[i - 1] >= min_gap))
        throw std::invalid_argument("TableGenerator: value rows must be strictly increasing");
  }
}

double generator_eval(const GeneratorSpec& gen, int node, double ell) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen))
    return a->intercept[node] + a->slope * ell;
  return table_eval(std::get<TableGenerator>(gen), node, ell);
}

double generator_invert(const GeneratorSpec& gen, int node, double y) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen))
    return (y - a->intercept[node]) / a->slope;
  return table_invert(std::get<TableGenerator>(gen), node, y);
}

double generator_min_slope(const GeneratorSpec& gen) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen)) return a->slope;
  const auto& t = std::get<TableGenerator>(gen);
  double s = t.ext_slope;
  for (const auto& row : t.values)
    for (std::size_t i = 1; i < row.size(); ++i)
      s = std::min(s, (row[i] - row[i - 1]) / (t.knots[i] - t.knots[i - 1]));
  return s;
}

double generator_max_slope(const GeneratorSpec& gen) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen)) return a->slope;
  const auto& t = std::get<TableGenerator>(gen);
  double s = t.ext_slope;
  for (const auto& row : t.values)
    for (std::size_t i = 1; i < row.size(); ++i)
      s = std::max(s, (row[i] - row[i - 1]) / (t.knots[i] - t.knots[i - 1]));
  return s;
}

AdaptedProcess one_step_roots(const ScenarioTree& tree, const AdaptedProcess& Y,
                              const GeneratorSpec& gen) {
  const double dt = tree.grid().dt();
  AdaptedProcess roots = AdaptedProcess::constant(tree, 0.0);
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    double next = 0.0;
    for (std::size_t i = 0; i < n.children.size(); ++i)
      next += n.prob[i] * Y[n.children[i]];
    roots[n.id] = generator_invert(gen, n.id, (Y[n.id] - next) / dt);
  }
  return roots;
}

TableGenerator sample_generator(
    const ScenarioTree& tree,
    const std::function<double(int node, double ell)>& f,
    const std::vector<double>& knots, double ext_slope) {
  TableGenerator g;
  g.knots = knots;
  g.ext_slope = ext_slope;
  g.values.resize(tree.size());
  for (int id = 0; id < tree.size(); ++id) {
    g.values[id].reserve(knots.size());
    for (double k : knots) g.values[id].push_back(f(id, k));
  }
  validate_generator(tree, g);
  return g;
}

}  // namespace bekrep
