#include "bekrep/measure.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace bekrep {

namespace {
constexpr double kWeightTol = 1e-12;
}

double outcome_distance(const Outcome& a, const Outcome& b, double dt) {
  if (a.path.size() != b.path.size() || a.vec.size() != b.vec.size())
    throw std::invalid_argument("outcome_distance: shape mismatch");
  double d = 0.0;
  if (!a.path.empty()) {
    d = levy_distance(VPlusPath::from_grid(a.path, dt),
                      VPlusPath::from_grid(b.path, dt));
  }
  for (std::size_t i = 0; i < a.vec.size(); ++i)
    d = std::max(d, std::abs(a.vec[i] - b.vec[i]));
  return d;
}

bool outcome_leq(const Outcome& a, const Outcome& b) {
  if (a.path.size() != b.path.size() || a.vec.size() != b.vec.size())
    throw std::invalid_argument("outcome_leq: shape mismatch");
  for (std::size_t i = 0; i < a.path.size(); ++i)
    if (a.path[i] > b.path[i]) return false;
  for (std::size_t i = 0; i < a.vec.size(); ++i)
    if (a.vec[i] > b.vec[i]) return false;
  return true;
}

void RandomMeasure::validate() const {
  if (atoms.empty()) throw std::invalid_argument("RandomMeasure: no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.prob > 0.0)) throw std::invalid_argument("RandomMeasure: atom prob must be > 0");
    total += a.prob;
    if (a.support.empty())
      throw std::invalid_argument("RandomMeasure: empty support");
    double s = 0.0;
    for (const auto& wo : a.support) {
      if (wo.w < -kWeightTol)
        throw std::invalid_argument("RandomMeasure: negative weight");
      s += wo.w;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("RandomMeasure: atom weights must sum to 1");
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("RandomMeasure: atom probabilities must sum to 1");
}

void RandomMeasure::prune(double merge_eps, double drop_eps) {
  for (auto& atom : atoms) {
    std::vector<WeightedOutcome> merged;
    for (const auto& wo : atom.support) {
      bool absorbed = false;
      for (auto& m : merged) {
        if (m.o.path.size() == wo.o.path.size() &&
            m.o.vec.size() == wo.o.vec.size() &&
            outcome_distance(m.o, wo.o, dt) < merge_eps) {
          m.w += wo.w;
          absorbed = true;
          break;
        }
      }
      if (!absorbed) merged.push_back(wo);
    }
    std::vector<WeightedOutcome> kept;
    double total = 0.0;
    for (auto& m : merged) {
      if (m.w >= drop_eps) {
        kept.push_back(m);
        total += m.w;
      }
    }
    if (kept.empty() || total <= 0.0) {
      kept = merged;
      total = 0.0;
      for (const auto& m : kept) total += m.w;
    }
    for (auto& k : kept) k.w /= total;
    atom.support = std::move(kept);
  }
}

namespace {

bool lp_feasible(const std::vector<double>& w1, const std::vector<double>& w2,
                 const std::vector<std::vector<double>>& dist, double eps) {
  const int n1 = static_cast<int>(w1.size());
  const int n2 = static_cast<int>(w2.size());
  detail::MaxFlow mf(n1 + n2 + 2);
  const int source = n1 + n2, sink = n1 + n2 + 1;
  for (int i = 0; i < n1; ++i) mf.add_edge(source, i, w1[i]);
  for (int j = 0; j < n2; ++j) mf.add_edge(n1 + j, sink, w2[j]);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      if (dist[i][j] <= eps) mf.add_edge(i, n1 + j, 2.0);
  return mf.run(source, sink) >= 1.0 - eps - 1e-12;
}

}  // namespace

double levy_prokhorov(const std::vector<double>& w1,
                      const std::vector<double>& w2,
                      const std::vector<std::vector<double>>& dist) {
  if (w1.empty() || w2.empty())
    throw std::invalid_argument("levy_prokhorov: empty support");
  if (dist.size() != w1.size())
    throw std::invalid_argument("levy_prokhorov: distance matrix shape mismatch");
  for (const auto& row : dist)
    if (row.size() != w2.size())
      throw std::invalid_argument("levy_prokhorov: distance matrix shape mismatch");
  if (lp_feasible(w1, w2, dist, 0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (lp_feasible(w1, w2, dist, mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double levy_prokhorov(const MeasureAtom& a, const MeasureAtom& b, double dt) {
  std::vector<double> w1, w2;
  for (const auto& wo : a.support) w1.push_back(wo.w);
  for (const auto& wo : b.support) w2.push_back(wo.w);
  std::vector<std::vector<double>> dist(w1.size(),
                                        std::vector<double>(w2.size(), 0.0));
  for (std::size_t i = 0; i < w1.size(); ++i)
    for (std::size_t j = 0; j < w2.size(); ++j)
      dist[i][j] = outcome_distance(a.support[i].o, b.support[j].o, dt);
  return levy_prokhorov(w1, w2, dist);
}

double levy_prokhorov(const RandomMeasure& a, const RandomMeasure& b) {
  if (a.atoms.size() != b.atoms.size())
    throw std::invalid_argument("levy_prokhorov: atom count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.atoms.size(); ++i)
    acc += a.atoms[i].prob * levy_prokhorov(a.atoms[i], b.atoms[i], a.dt);
  return acc;
}

bool stochastic_order_leq(
    const std::vector<std::pair<double, std::vector<double>>>& mu,
    const std::vector<std::pair<double, std::vector<double>>>& nu) {
  if (mu.empty() || nu.empty())
    throw std::invalid_argument("stochastic_order_leq: empty support");
  const std::size_t d = mu.front().second.size();
  for (const auto& [w, x] : mu)
    if (x.size() != d) throw std::invalid_argument("stochastic_order_leq: dimension mismatch");
  for (const auto& [w, x] : nu)
    if (x.size() != d) throw std::invalid_argument("stochastic_order_leq: dimension mismatch");

  const int n1 = static_cast<int>(mu.size());
  const int n2 = static_cast<int>(nu.size());
  detail::MaxFlow mf(n1 + n2 + 2);
  const int source = n1 + n2, sink = n1 + n2 + 1;
  for (int i = 0; i < n1; ++i) mf.add_edge(source, i, mu[i].first);
  for (int j = 0; j < n2; ++j) mf.add_edge(n1 + j, sink, nu[j].first);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      bool leq = true;
      for (std::size_t k = 0; k < d; ++k) {
        if (mu[i].second[k] > nu[j].second[k] + 1e-12) {
          leq = false;
          break;
        }
      }
      if (leq) mf.add_edge(i, n1 + j, 2.0);
    }
  }
  return mf.run(source, sink) >= 1.0 - 1e-12;
}

bool stochastic_order_leq(const RandomMeasure& a, const RandomMeasure& b) {
  if (a.atoms.size() != b.atoms.size())
    throw std::invalid_argument("stochastic_order_leq: atom count mismatch");
  auto flatten = [](const MeasureAtom& atom) {
    std::vector<std::pair<double, std::vector<double>>> out;
    for (const auto& wo : atom.support) {
      std::vector<double> x = wo.o.path;
      x.insert(x.end(), wo.o.vec.begin(), wo.o.vec.end());
      out.emplace_back(wo.w, std::move(x));
    }
    return out;
  };
  for (std::size_t i = 0; i < a.atoms.size(); ++i)
    if (!stochastic_order_leq(flatten(a.atoms[i]), flatten(b.atoms[i])))
      return false;
  return true;
}

RandomMeasure conditional_law(
    const ScenarioTree& tree,
    const std::function<Outcome(const PathRecord&)>& functional) {
  RandomMeasure m;
  m.dt = tree.grid().dt();
  m.atoms.resize(tree.atom_count());
  for (int a = 0; a < tree.atom_count(); ++a) {
    m.atoms[a].prob = tree.atom_probability(a);
    if (!(m.atoms[a].prob > 0.0))
      throw std::invalid_argument("conditional_law: atom of zero probability");
  }
  for (const auto& path : tree.paths()) {
    WeightedOutcome wo;
    wo.w = path.probability / tree.atom_probability(path.atom);
    wo.o = functional(path);
    m.atoms[path.atom].support.push_back(std::move(wo));
  }
  return m;
}

std::string measure_to_json(const RandomMeasure& m) {
  nlohmann::ordered_json j;
  j["dt"] = m.dt;
  j["atoms"] = nlohmann::ordered_json::array();
  for (const auto& atom : m.atoms) {
    nlohmann::ordered_json ja;
    ja["weight_total"] = atom.prob;
    ja["support"] = nlohmann::ordered_json::array();
    for (const auto& wo : atom.support) {
      nlohmann::ordered_json jo;
      jo["w"] = wo.w;
      jo["outcome"] = {{"path", wo.o.path}, {"vec", wo.o.vec}};
      ja["support"].push_back(std::move(jo));
    }
    j["atoms"].push_back(std::move(ja));
  }
  return j.dump(2);
}

RandomMeasure measure_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  RandomMeasure m;
  m.dt = j.value("dt", 1.0);
  for (const auto& ja : j.at("atoms")) {
    MeasureAtom atom;
    atom.prob = ja.at("weight_total").get<double>();
    for (const auto& jo : ja.at("support")) {
      WeightedOutcome wo;
      wo.w = jo.at("w").get<double>();
      wo.o.path = jo.at("outcome").at("path").get<std::vector<double>>();
      wo.o.vec = jo.at("outcome").at("vec").get<std::vector<double>>();
      atom.support.push_back(std::move(wo));
    }
    m.atoms.push_back(std::move(atom));
  }
  m.validate();
  return m;
}

}  // namespace bekrep
