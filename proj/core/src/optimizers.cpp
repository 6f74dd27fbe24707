#include "bekrep/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace bekrep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::pair<StoppingTime, StoppingTime> hitting_times(const ScenarioTree& tree,
                                                    const LhatResult& lhat,
                                                    double level) {
  StoppingTime smallest, biggest;
  smallest.stop.assign(tree.size(), 0);
  biggest.stop.assign(tree.size(), 0);
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    if (lhat.running_max[n.id] >= level) smallest.stop[n.id] = 1;
    if (lhat.running_max[n.id] > level) biggest.stop[n.id] = 1;
  }
  return {std::move(smallest), std::move(biggest)};
}

StoppingTime tilted_hitting_time(const ScenarioTree& tree,
                                 const LhatResult& lhat, double level,
                                 double delta) {
  StoppingTime st;
  st.stop.assign(tree.size(), 0);
  const double dt = tree.grid().dt();
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    const double tilt = delta * tree.grid().time(n.t) + delta * dt;
    if (lhat.running_max[n.id] + tilt >= level) st.stop[n.id] = 1;
  }
  return st;
}

void SingularControlSpec::validate(const ScenarioTree& tree) const {
  if (cap.size() != tree.size() || control_cost.size() != tree.size())
    throw std::invalid_argument("SingularControlSpec: size mismatch");
  validate_generator(tree, cost_derivative);
  for (const auto& n : tree.nodes()) {
    if (cap[n.id] < floor)
      throw std::invalid_argument("SingularControlSpec: cap below floor");
    if (n.parent >= 0 && cap[n.id] < cap[n.parent] - 1e-12)
      throw std::invalid_argument("SingularControlSpec: cap must be non-decreasing");
    if (n.children.empty() && std::abs(control_cost[n.id]) > 1e-12)
      throw std::invalid_argument("SingularControlSpec: control cost must vanish at T");
  }
}

AdaptedProcess singular_optimizer(const ScenarioTree& tree,
                                  const LhatResult& lhat,
                                  const SingularControlSpec& spec) {
  spec.validate(tree);
  AdaptedProcess theta = AdaptedProcess::constant(tree, spec.floor);
  for (const auto& n : tree.nodes()) {
    const double r = lhat.running_max[n.id];
    theta[n.id] = std::max(spec.floor, std::min(r, spec.cap[n.id]));
  }
  return theta;
}

namespace {

// Integral of c' from `floor` to `x`; exact for affine and piecewise-linear
// generators.
double cost_from_derivative(const GeneratorSpec& gen, int node, double floor,
                            double x) {
  if (const auto* a = std::get_if<AffineGenerator>(&gen)) {
    return a->intercept[node] * (x - floor) +
           0.5 * a->slope * (x * x - floor * floor);
  }
  const auto& t = std::get<TableGenerator>(gen);
  if (x < floor) return -cost_from_derivative(gen, node, x, floor);
  // Trapezoid over the knot grid restricted to [floor, x]; exact because the
  // integrand is piecewise linear with the same breakpoints.
  double acc = 0.0;
  double prev_pt = floor;
  double prev_val = generator_eval(gen, node, floor);
  for (double k : t.knots) {
    if (k <= floor) continue;
    if (k >= x) break;
    const double val = generator_eval(gen, node, k);
    acc += 0.5 * (prev_val + val) * (k - prev_pt);
    prev_pt = k;
    prev_val = val;
  }
  const double val = generator_eval(gen, node, x);
  acc += 0.5 * (prev_val + val) * (x - prev_pt);
  return acc;
}

}  // namespace

double singular_cost(const ScenarioTree& tree, const SingularControlSpec& spec,
                     const AdaptedProcess& control) {
  if (control.size() != tree.size())
    throw std::invalid_argument("singular_cost: control size mismatch");
  const double dt = tree.grid().dt();
  for (const auto& n : tree.nodes()) {
    const double prev = n.parent < 0 ? spec.floor : control[n.parent];
    if (control[n.id] < prev - 1e-12)
      throw std::invalid_argument("singular_cost: control must be non-decreasing");
  }
  double total = 0.0;
  for (const auto& path : tree.paths()) {
    double acc = 0.0;
    double prev = spec.floor;
    for (int id : path.nodes) {
      const bool terminal = tree.is_terminal(id);
      if (!terminal)
        acc += cost_from_derivative(spec.cost_derivative, id, spec.floor,
                                    control[id]) *
               dt;
      acc += spec.control_cost[id] * (control[id] - prev);
      prev = control[id];
    }
    total += path.probability * acc;
  }
  return total;
}

void ConsumptionSpec::validate(const ScenarioTree& tree) const {
  if (rate.size() != tree.size())
    throw std::invalid_argument("ConsumptionSpec: rate size mismatch");
  if (!(beta > 0.0) || !(eta > 0.0) || !(lambda > 0.0))
    throw std::invalid_argument("ConsumptionSpec: beta, eta, lambda must be > 0");
  if (!u_prime) throw std::invalid_argument("ConsumptionSpec: u_prime missing");
}

namespace {

// Discount factor e^{-sum_{s<t} r_s dt} per node (left Riemann).
AdaptedProcess rate_discount(const ScenarioTree& tree, const AdaptedProcess& r) {
  const double dt = tree.grid().dt();
  AdaptedProcess D = AdaptedProcess::constant(tree, 1.0);
  for (const auto& n : tree.nodes()) {
    if (n.parent < 0)
      D[n.id] = 1.0;
    else
      D[n.id] = D[n.parent] * std::exp(-r[n.parent] * dt);
  }
  return D;
}

}  // namespace

std::pair<AdaptedProcess, GeneratorSpec> consumption_representation_inputs(
    const ScenarioTree& tree, const ConsumptionSpec& spec,
    const std::vector<double>& knots) {
  spec.validate(tree);
  if (knots.size() < 2 || knots.back() >= 0.0)
    throw std::invalid_argument(
        "consumption_representation_inputs: knots must be negative");
  AdaptedProcess D = rate_discount(tree, spec.rate);
  AdaptedProcess Y = AdaptedProcess::constant(tree, 0.0);
  for (const auto& n : tree.nodes()) {
    const double t = tree.grid().time(n.t);
    Y[n.id] = -spec.lambda * std::exp(-spec.beta * t) * D[n.id];
  }
  // The price deflator is not terminal-zero; split off its martingale part.
  auto [yhat, mart] = normalize_terminal(tree, Y);
  (void)mart;

  auto f = [&](int node, double ell) {
    const double t = tree.grid().time(tree.node(node).t);
    const double level = -std::exp(-spec.beta * t) / ell;  // ell < 0
    return -spec.beta * std::exp(-spec.beta * t) * spec.u_prime(node, level);
  };
  TableGenerator gen = sample_generator(tree, f, knots, 1.0);
  return {std::move(yhat), GeneratorSpec(std::move(gen))};
}

std::vector<double> consumption_default_knots(const ConsumptionSpec& spec,
                                              int count, double eta_bar_factor) {
  // Span the satisfaction band [eta / factor, eta * factor] in level space
  // ell = -1/s, log-spaced for resolution near zero.
  const double lo = -eta_bar_factor / spec.eta;
  const double hi = -1.0 / (eta_bar_factor * spec.eta);
  std::vector<double> knots(count);
  const double llo = std::log(-lo), lhi = std::log(-hi);
  for (int i = 0; i < count; ++i) {
    const double w = static_cast<double>(i) / (count - 1);
    knots[i] = -std::exp(llo + (lhi - llo) * w);
  }
  return knots;
}

ConsumptionPlan consumption_from_lhat(const ScenarioTree& tree,
                                      const LhatResult& lhat,
                                      const ConsumptionSpec& spec) {
  spec.validate(tree);
  for (const auto& n : tree.nodes()) {
    if (n.children.empty()) continue;
    if (!(lhat.running_max[n.id] < 0.0))
      throw std::invalid_argument(
          "consumption_from_lhat: running max reaches 0 at node " +
          std::to_string(n.id) + "; the representation level must stay negative");
  }
  const double dt = tree.grid().dt();
  ConsumptionPlan plan;
  plan.satisfaction = AdaptedProcess::constant(tree, 0.0);
  plan.cumulative = AdaptedProcess::constant(tree, 0.0);
  AdaptedProcess D = rate_discount(tree, spec.rate);

  AdaptedProcess G = AdaptedProcess::constant(tree, spec.eta);
  for (const auto& n : tree.nodes()) {
    const double r = lhat.running_max[n.id];
    const double g = tree.is_terminal(n.id) && n.parent >= 0
                         ? G[n.parent]
                         : std::max(spec.eta, -1.0 / r);
    G[n.id] = g;
    const double t = tree.grid().time(n.t);
    plan.satisfaction[n.id] = std::exp(-spec.beta * t) * g;
    const double gprev = n.parent < 0 ? spec.eta : G[n.parent];
    const double dC = std::exp(-spec.beta * t) * (g - gprev) / spec.beta;
    plan.cumulative[n.id] = (n.parent < 0 ? 0.0 : plan.cumulative[n.parent]) + dC;
  }
  double budget = 0.0;
  for (const auto& path : tree.paths()) {
    double acc = 0.0;
    double prev = 0.0;
    for (int id : path.nodes) {
      acc += D[id] * (plan.cumulative[id] - prev);
      prev = plan.cumulative[id];
    }
    budget += path.probability * acc;
  }
  plan.budget = budget;
  double up_floor = 0.0;
  for (const auto& n : tree.nodes())
    up_floor = std::max(up_floor, spec.u_prime(n.id, spec.eta));
  plan.truncation_tail =
      std::exp(-spec.beta * tree.grid().horizon) / spec.beta * up_floor;
  return plan;
}

namespace {

// Integral of u_prime(node, .) over [a, b] by fixed-order Gauss-Legendre on
// panels (u' is smooth between our callers' breakpoints).
double integrate_u(const std::function<double(int, double)>& up, int node,
                   double a, double b) {
  if (b <= a) return b == a ? 0.0 : -integrate_u(up, node, b, a);
  static const double xs[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double ws[5] = {0.2369268850561891, 0.4786286704993665,
                               0.5688888888888889, 0.4786286704993665,
                               0.2369268850561891};
  const int panels = 16;
  const double h = (b - a) / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int q = 0; q < 5; ++q)
      acc += ws[q] * up(node, mid + 0.5 * h * xs[q]);
  }
  return acc * 0.5 * h;
}

}  // namespace

double consumption_utility(const ScenarioTree& tree, const ConsumptionSpec& spec,
                           const AdaptedProcess& C) {
  spec.validate(tree);
  if (C.size() != tree.size())
    throw std::invalid_argument("consumption_utility: size mismatch");
  const double dt = tree.grid().dt();
  for (const auto& n : tree.nodes()) {
    const double prev = n.parent < 0 ? 0.0 : C[n.parent];
    if (C[n.id] < prev - 1e-12)
      throw std::invalid_argument("consumption_utility: C must be non-decreasing");
  }
  double total = 0.0;
  for (const auto& path : tree.paths()) {
    double acc = 0.0;
    double prior = 0.0;  // sum of e^{beta t_j} dC_j so far
    for (int id : path.nodes) {
      const auto& n = tree.node(id);
      if (n.children.empty()) break;
      const double t = tree.grid().time(n.t);
      const double prev = n.parent < 0 ? 0.0 : C[n.parent];
      prior += std::exp(spec.beta * t) * (C[id] - prev);
      const double yc = std::exp(-spec.beta * t) * (spec.eta + spec.beta * prior);
      const double ref = spec.eta * std::exp(-spec.beta * t);
      acc += integrate_u(spec.u_prime, id, ref, yc) * dt;
    }
    total += path.probability * acc;
  }
  return total;
}

std::string optimizer_report_json(
    const ScenarioTree& tree,
    const std::vector<std::pair<double, StoppingTime>>& taus,
    const AdaptedProcess* theta_star, const ConsumptionPlan* plan) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json jt = nlohmann::ordered_json::object();
  for (const auto& [level, st] : taus) {
    char key[40];
    std::snprintf(key, sizeof(key), "%.17g", level);
    std::vector<int> stops;
    for (int id = 0; id < tree.size(); ++id)
      if (st.stop[id] || tree.is_terminal(id)) stops.push_back(id);
    jt[key] = stops;
  }
  j["tau"] = std::move(jt);
  if (theta_star) {
    nlohmann::ordered_json js = nlohmann::ordered_json::object();
    for (int id = 0; id < tree.size(); ++id)
      js[std::to_string(id)] = (*theta_star)[id];
    j["theta_star"] = std::move(js);
  }
  if (plan) {
    j["consumption"] = {{"Y_C", plan->satisfaction.v},
                        {"C", plan->cumulative.v},
                        {"budget", plan->budget}};
  }
  return j.dump(2);
}

}  // namespace bekrep
