#include <queue>

#include "bekrep/measure.hpp"

namespace bekrep::detail {

namespace {
constexpr double kFlowEps = 1e-12;
}

MaxFlow::MaxFlow(int n) : g_(n), level_(n), iter_(n) {}

void MaxFlow::add_edge(int from, int to, double cap) {
  g_[from].push_back({to, cap, static_cast<int>(g_[to].size())});
  g_[to].push_back({from, 0.0, static_cast<int>(g_[from].size()) - 1});
}

bool MaxFlow::bfs(int s, int t) {
  std::fill(level_.begin(), level_.end(), -1);
  std::queue<int> q;
  level_[s] = 0;
  q.push(s);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (const Edge& e : g_[v]) {
      if (e.cap > kFlowEps && level_[e.to] < 0) {
        level_[e.to] = level_[v] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[t] >= 0;
}

double MaxFlow::dfs(int v, int t, double f) {
  if (v == t) return f;
  for (int& i = iter_[v]; i < static_cast<int>(g_[v].size()); ++i) {
    Edge& e = g_[v][i];
    if (e.cap > kFlowEps && level_[v] < level_[e.to]) {
      double d = dfs(e.to, t, std::min(f, e.cap));
      if (d > kFlowEps) {
        e.cap -= d;
        g_[e.to][e.rev].cap += d;
        return d;
      }
    }
  }
  return 0.0;
}

double MaxFlow::run(int source, int sink) {
  double flow = 0.0;
  while (bfs(source, sink)) {
    std::fill(iter_.begin(), iter_.end(), 0);
    double f;
    while ((f = dfs(source, sink, std::numeric_limits<double>::infinity())) >
           kFlowEps)
      flow += f;
  }
  return flow;
}

}  // namespace bekrep::detail
