#include "momentopf/sparsity.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

namespace mopf {

Graph::Graph(std::size_t n_, std::vector<std::pair<int, int>> e) : n(n_) {
  edges.reserve(e.size());
  for (auto& [a, b] : e) {
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (a < 0 || static_cast<std::size_t>(b) >= n)
      throw std::out_of_range("Graph: edge endpoint out of range");
    edges.emplace_back(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

std::vector<std::vector<int>> Graph::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  return adj;
}

bool Graph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
}

Graph ChordalExtension::extended() const {
  std::vector<std::pair<int, int>> all = original.edges;
  all.insert(all.end(), fill.begin(), fill.end());
  return Graph(original.n, std::move(all));
}

namespace {

// Fill edges produced by eliminating vertices in the given order.
std::vector<std::pair<int, int>> elimination_fill(const Graph& g, const std::vector<int>& order) {
  const std::size_t n = g.n;
  std::vector<std::set<int>> adj(n);
  for (const auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<int> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[order[k]] = static_cast<int>(k);

  std::vector<std::pair<int, int>> fill;
  for (std::size_t k = 0; k < n; ++k) {
    const int v = order[k];
    std::vector<int> higher;
    for (int u : adj[v])
      if (pos[u] > pos[v]) higher.push_back(u);
    for (std::size_t i = 0; i < higher.size(); ++i) {
      for (std::size_t j = i + 1; j < higher.size(); ++j) {
        const int a = higher[i], b = higher[j];
        if (!adj[a].count(b)) {
          adj[a].insert(b);
          adj[b].insert(a);
          fill.emplace_back(std::min(a, b), std::max(a, b));
        }
      }
    }
  }
  return fill;
}

std::vector<int> amd_order(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.edges.size() * 2 + g.n);
  for (const auto& [a, b] : g.edges) {
    trip.emplace_back(a, b, 1.0);
    trip.emplace_back(b, a, 1.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());

  Eigen::AMDOrdering<int> amd;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
  amd(m, perm);

  // Factorizing P A P^T in natural order eliminates some original
  // vertex at each step; the permutation convention (indices vs their
  // inverse) is resolved empirically by taking the lower-fill reading.
  const auto& idx = perm.indices();
  std::vector<int> order(g.n), alt(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    order[idx[static_cast<Eigen::Index>(i)]] = static_cast<int>(i);
    alt[i] = idx[static_cast<Eigen::Index>(i)];
  }
  const std::size_t fill_a = elimination_fill(g, order).size();
  const std::size_t fill_b = elimination_fill(g, alt).size();
  return fill_b < fill_a ? alt : order;
}

// Maximum cardinality search; the reverse visit order is a perfect
// elimination order iff the graph is chordal.
std::vector<int> mcs_order(const Graph& g) {
  const std::size_t n = g.n;
  const auto adj = g.adjacency();
  std::vector<int> weight(n, 0), order;
  std::vector<bool> numbered(n, false);
  order.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    int best = -1;
    for (std::size_t v = 0; v < n; ++v)
      if (!numbered[v] && (best < 0 || weight[v] > weight[best])) best = static_cast<int>(v);
    numbered[best] = true;
    order.push_back(best);
    for (int u : adj[best])
      if (!numbered[u]) ++weight[u];
  }
  std::reverse(order.begin(), order.end());
  return order;
}

bool check_peo(const Graph& g, const std::vector<int>& order) {
  const std::size_t n = g.n;
  const auto adj = g.adjacency();
  std::vector<int> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[order[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < n; ++k) {
    const int v = order[k];
    std::vector<int> higher;
    for (int u : adj[v])
      if (pos[u] > pos[v]) higher.push_back(u);
    if (higher.empty()) continue;
    int w = higher[0];
    for (int u : higher)
      if (pos[u] < pos[w]) w = u;
    for (int u : higher)
      if (u != w && !g.has_edge(w, u)) return false;
  }
  return true;
}

}  // namespace

ChordalExtension chordal_extension(const Graph& g) {
  ChordalExtension ext;
  ext.original = g;
  if (g.n == 0) return ext;
  ext.elimination_order = amd_order(g);
  ext.fill = elimination_fill(g, ext.elimination_order);
  std::sort(ext.fill.begin(), ext.fill.end());
  return ext;
}

bool is_chordal(const Graph& g) {
  if (g.n == 0) return true;
  return check_peo(g, mcs_order(g));
}

CliqueSet maximal_cliques(const ChordalExtension& ext) {
  const Graph g = ext.extended();
  const std::size_t n = g.n;
  CliqueSet out;
  if (n == 0) return out;

  std::vector<int> ord = ext.elimination_order;
  if (ord.empty()) ord = mcs_order(g);
  if (!check_peo(g, ord))
    throw std::logic_error("maximal_cliques: no perfect elimination order (graph not chordal?)");

  const auto adj = g.adjacency();
  std::vector<int> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[ord[k]] = static_cast<int>(k);

  // Candidate cliques {v} u higher-neighbors(v); keep the maximal ones.
  std::vector<std::vector<int>> cand;
  cand.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int v = ord[k];
    std::vector<int> c{v};
    for (int u : adj[v])
      if (pos[u] > pos[v]) c.push_back(u);
    std::sort(c.begin(), c.end());
    cand.push_back(std::move(c));
  }
  std::sort(cand.begin(), cand.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<std::vector<std::size_t>> holding(n);  // vertex -> kept clique indices
  for (auto& c : cand) {
    bool subset = false;
    for (std::size_t ci : holding[c[0]]) {
      const auto& kept = out.cliques[ci];
      if (std::includes(kept.begin(), kept.end(), c.begin(), c.end())) {
        subset = true;
        break;
      }
    }
    if (subset) continue;
    const std::size_t idx = out.cliques.size();
    for (int v : c) holding[v].push_back(idx);
    out.cliques.push_back(std::move(c));
  }
  std::sort(out.cliques.begin(), out.cliques.end());
  holding.assign(n, {});
  for (std::size_t i = 0; i < out.cliques.size(); ++i)
    for (int v : out.cliques[i]) holding[v].push_back(i);

  // Clique tree: maximum-weight spanning tree over separator sizes,
  // considering only clique pairs that share a vertex.
  struct Cand {
    std::size_t w, a, b;
  };
  std::vector<Cand> pairs;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < holding[v].size(); ++i) {
      for (std::size_t j = i + 1; j < holding[v].size(); ++j) {
        auto key = std::make_pair(holding[v][i], holding[v][j]);
        if (!seen.insert(key).second) continue;
        const auto& A = out.cliques[key.first];
        const auto& B = out.cliques[key.second];
        std::vector<int> inter;
        std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(inter));
        pairs.push_back({inter.size(), key.first, key.second});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Cand& x, const Cand& y) {
    if (x.w != y.w) return x.w > y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  std::vector<std::size_t> parent(out.cliques.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Cand& c : pairs) {
    const std::size_t ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    parent[ra] = rb;
    const auto& A = out.cliques[c.a];
    const auto& B = out.cliques[c.b];
    std::vector<int> inter;
    std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(inter));
    out.tree.push_back({c.a, c.b, std::move(inter)});
  }
  return out;
}

CliqueSet merge_cliques(const CliqueSet& cs, const MergePolicy& policy) {
  if (policy.threshold <= 0) return cs;  // merging disabled

  std::vector<std::set<int>> cliques;
  cliques.reserve(cs.cliques.size());
  for (const auto& c : cs.cliques) cliques.emplace_back(c.begin(), c.end());
  struct Edge {
    std::size_t a, b;
  };
  std::vector<Edge> edges;
  for (const auto& e : cs.tree) edges.push_back({e.a, e.b});
  std::vector<bool> alive(cliques.size(), true);

  auto cube = [](double v) { return v * v * v; };
  for (;;) {
    double best_score = 0;  // only strictly negative scores merge
    std::size_t best_edge = edges.size();
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto [a, b] = edges[i];
      if (a == b || !alive[a] || !alive[b]) continue;
      std::vector<int> uni, inter;
      std::set_union(cliques[a].begin(), cliques[a].end(), cliques[b].begin(), cliques[b].end(),
                     std::back_inserter(uni));
      std::set_intersection(cliques[a].begin(), cliques[a].end(), cliques[b].begin(),
                            cliques[b].end(), std::back_inserter(inter));
      const double score = cube(double(uni.size())) - cube(double(cliques[a].size())) -
                           cube(double(cliques[b].size())) -
                           policy.threshold * double(inter.size());
      if (score < best_score) {
        best_score = score;
        best_edge = i;
      }
    }
    if (best_edge == edges.size()) break;
    const auto [a, b] = edges[best_edge];
    cliques[a].insert(cliques[b].begin(), cliques[b].end());
    alive[b] = false;
    for (auto& e : edges) {
      if (e.a == b) e.a = a;
      if (e.b == b) e.b = a;
    }
  }

  CliqueSet out;
  std::vector<std::size_t> new_index(cliques.size(), SIZE_MAX);
  for (std::size_t i = 0; i < cliques.size(); ++i) {
    if (!alive[i]) continue;
    new_index[i] = out.cliques.size();
    out.cliques.emplace_back(cliques[i].begin(), cliques[i].end());
  }
  for (const auto& e : edges) {
    if (e.a == e.b || !alive[e.a] || !alive[e.b]) continue;
    const auto& A = out.cliques[new_index[e.a]];
    const auto& B = out.cliques[new_index[e.b]];
    std::vector<int> inter;
    std::set_intersection(A.begin(), A.end(), B.begin(), B.end(), std::back_inserter(inter));
    out.tree.push_back({new_index[e.a], new_index[e.b], std::move(inter)});
  }
  return out;
}

Graph coupling_graph(std::size_t n, std::span<const std::pair<int, int>> base_edges,
                     std::span<const std::vector<int>> groups) {
  std::vector<std::pair<int, int>> edges(base_edges.begin(), base_edges.end());
  for (const auto& grp : groups) {
    for (std::size_t i = 0; i < grp.size(); ++i)
      for (std::size_t j = i + 1; j < grp.size(); ++j) edges.emplace_back(grp[i], grp[j]);
  }
  return Graph(n, std::move(edges));
}

bool covers_all_edges(const CliqueSet& cs, const Graph& g) {
  for (const auto& [a, b] : g.edges) {
    bool found = false;
    for (const auto& c : cs.cliques) {
      if (std::binary_search(c.begin(), c.end(), a) &&
          std::binary_search(c.begin(), c.end(), b)) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

bool running_intersection_holds(const CliqueSet& cs) {
  const std::size_t m = cs.cliques.size();
  if (m <= 1) return true;
  std::vector<std::vector<std::size_t>> tree_adj(m);
  for (const auto& e : cs.tree) {
    tree_adj[e.a].push_back(e.b);
    tree_adj[e.b].push_back(e.a);
  }
  std::set<int> vertices;
  for (const auto& c : cs.cliques) vertices.insert(c.begin(), c.end());
  for (int v : vertices) {
    std::vector<std::size_t> holding;
    for (std::size_t i = 0; i < m; ++i)
      if (std::binary_search(cs.cliques[i].begin(), cs.cliques[i].end(), v)) holding.push_back(i);
    if (holding.size() <= 1) continue;
    std::set<std::size_t> target(holding.begin(), holding.end());
    std::set<std::size_t> seen{holding[0]};
    std::vector<std::size_t> stack{holding[0]};
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      for (std::size_t u : tree_adj[c]) {
        if (target.count(u) && !seen.count(u)) {
          seen.insert(u);
          stack.push_back(u);
        }
      }
    }
    if (seen.size() != target.size()) return false;
  }
  return true;
}

std::size_t covering_clique(const CliqueSet& cs, std::span<const int> vertices) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < cs.cliques.size(); ++i) {
    const auto& c = cs.cliques[i];
    if (std::includes(c.begin(), c.end(), vertices.begin(), vertices.end())) {
      if (best == static_cast<std::size_t>(-1) || c.size() < cs.cliques[best].size()) best = i;
    }
  }
  return best;
}

}  // namespace mopf
