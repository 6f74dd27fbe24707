#include "bekrep/vplus.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace bekrep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double VPlusPath::at(double t) const {
  if (t <= 0.0) return -kInf;
  // v(t) = values[k] for t in (breaks[k], breaks[k+1]].
  auto it = std::lower_bound(breaks.begin(), breaks.end(), t);
  std::size_t k = static_cast<std::size_t>(it - breaks.begin());
  // it points to the first break >= t; the slot index is k-1.
  if (k == 0) return -kInf;
  if (k - 1 >= values.size()) return values.back();
  return values[k - 1];
}

void VPlusPath::validate() const {
  if (breaks.size() < 2 || values.size() + 1 != breaks.size())
    throw std::invalid_argument("VPlusPath: need breaks.size() == values.size()+1 >= 2");
  if (breaks.front() != 0.0)
    throw std::invalid_argument("VPlusPath: breaks must start at 0");
  for (std::size_t i = 1; i < breaks.size(); ++i)
    if (!(breaks[i] > breaks[i - 1]))
      throw std::invalid_argument("VPlusPath: breaks must be increasing");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) && !(std::isinf(values[i]) && values[i] < 0 && i == 0))
      throw std::invalid_argument("VPlusPath: values must be finite on (0,T)");
    if (i > 0 && values[i] < values[i - 1])
      throw std::invalid_argument("VPlusPath: values must be non-decreasing");
  }
}

VPlusPath VPlusPath::constant(double value, double T) {
  return VPlusPath{{0.0, T}, {value}};
}

VPlusPath VPlusPath::from_grid(const std::vector<double>& values, double dt) {
  VPlusPath p;
  p.values = values;
  p.breaks.resize(values.size() + 1);
  for (std::size_t i = 0; i < p.breaks.size(); ++i) p.breaks[i] = dt * i;
  return p;
}

namespace {

// One-sided constraint family: a((t-eps) v 0) - eps <= b(t) for all
// t in (0,T). Both sides are piecewise constant and left-continuous, so it is
// enough to evaluate at the right end of every interval between merged
// breakpoints; T itself enters through left-continuous evaluation.
bool one_sided_feasible(const VPlusPath& a, const VPlusPath& b, double eps) {
  const double T = a.horizon();
  std::vector<double> ts;
  ts.reserve(a.breaks.size() + b.breaks.size());
  for (double s : b.breaks)
    if (s > 0.0 && s <= T) ts.push_back(s);
  for (double s : a.breaks) {
    const double t = s + eps;
    if (t > 0.0 && t <= T) ts.push_back(t);
  }
  ts.push_back(T);
  for (double t : ts) {
    const double lhs = a.at(std::max(t - eps, 0.0)) - eps;
    if (std::isinf(lhs) && lhs < 0) continue;
    if (lhs > b.at(t)) return false;
  }
  return true;
}

}  // namespace

bool levy_feasible(const VPlusPath& v1, const VPlusPath& v2, double eps) {
  return one_sided_feasible(v1, v2, eps) && one_sided_feasible(v2, v1, eps);
}

double levy_distance(const VPlusPath& v1, const VPlusPath& v2) {
  v1.validate();
  v2.validate();
  if (std::abs(v1.horizon() - v2.horizon()) > 1e-12)
    throw std::invalid_argument("levy_distance: mismatched horizons");

  // Certified feasible upper endpoint: sup |v1 - v2| over merged breakpoints
  // (no time shift needed at that eps because the paths are increasing).
  double hi = 0.0;
  std::vector<double> ts;
  for (double s : v1.breaks)
    if (s > 0.0) ts.push_back(s);
  for (double s : v2.breaks)
    if (s > 0.0) ts.push_back(s);
  for (double t : ts) {
    const double diff = std::abs(v1.at(t) - v2.at(t));
    if (std::isfinite(diff)) hi = std::max(hi, diff);
  }
  if (!levy_feasible(v1, v2, hi)) {
    // Guard for exotic breakpoint interplay; widen geometrically.
    double w = std::max(hi, 1e-6);
    while (!levy_feasible(v1, v2, hi) && hi < 1e12) {
      hi += w;
      w *= 2;
    }
  }
  if (levy_feasible(v1, v2, 0.0)) return 0.0;
  double lo = 0.0;
  while (hi - lo > 1e-11) {
    const double mid = 0.5 * (lo + hi);
    if (levy_feasible(v1, v2, mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

namespace {

VPlusPath clip_extend(const VPlusPath& v, double T) {
  // Restriction to [0, T), extending by the final value when the path ends
  // earlier.
  VPlusPath out;
  out.breaks.push_back(0.0);
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    const double end = v.breaks[i + 1];
    if (end >= T) break;
    out.breaks.push_back(end);
    out.values.push_back(v.values[i]);
  }
  out.breaks.push_back(T);
  out.values.push_back(v.at(std::min(v.horizon(), T)));
  return out;
}

}  // namespace

double levy_distance_truncated(const VPlusPath& v1, const VPlusPath& v2, int M) {
  if (M < 1) throw std::invalid_argument("levy_distance_truncated: M >= 1");
  v1.validate();
  v2.validate();
  double acc = 0.0;
  for (int n = 1; n <= M; ++n) {
    const double T = static_cast<double>(n);
    const double d = levy_distance(clip_extend(v1, T), clip_extend(v2, T));
    acc += std::ldexp(std::min(d, 1.0), -n);
  }
  return acc;
}

VPlusPath running_max_path(const ScenarioTree& tree,
                           const AdaptedProcess& running_max,
                           const PathRecord& path) {
  const int N = tree.grid().steps;
  std::vector<double> vals;
  vals.reserve(N);
  for (int k = 0; k < N; ++k) vals.push_back(running_max[path.nodes[k]]);
  VPlusPath p = VPlusPath::from_grid(vals, tree.grid().dt());
  p.breaks.back() = tree.grid().horizon;  // exact T
  return p;
}

std::string vplus_to_json(const VPlusPath& p) {
  nlohmann::ordered_json j;
  j["times"] = p.breaks;
  j["values"] = p.values;
  j["v0"] = "-inf";
  return j.dump();
}

VPlusPath vplus_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  VPlusPath p;
  p.breaks = j.at("times").get<std::vector<double>>();
  p.values = j.at("values").get<std::vector<double>>();
  p.validate();
  return p;
}

}  // namespace bekrep
