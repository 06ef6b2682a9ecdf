#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mopf {

// Simple undirected graph on vertices 0..n-1.
struct Graph {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;  // stored with first < second, deduped

  Graph() = default;
  Graph(std::size_t n, std::vector<std::pair<int, int>> e);
  std::vector<std::vector<int>> adjacency() const;
  bool has_edge(int a, int b) const;
};

struct ChordalExtension {
  Graph original;
  std::vector<std::pair<int, int>> fill;  // edges added
  std::vector<int> elimination_order;     // perfect elimination order of the extension
  Graph extended() const;
};

// Fill-reducing (approximate minimum degree) symbolic elimination.
ChordalExtension chordal_extension(const Graph& g);

// Maximum-cardinality-search chordality test.
bool is_chordal(const Graph& g);

struct CliqueTreeEdge {
  std::size_t a = 0, b = 0;          // clique indices
  std::vector<int> separator;        // intersection, sorted
};

struct CliqueSet {
  std::vector<std::vector<int>> cliques;  // each sorted ascending
  std::vector<CliqueTreeEdge> tree;       // max-weight spanning tree
};

// Maximal cliques of a chordal extension plus a clique tree satisfying
// the running-intersection property.
CliqueSet maximal_cliques(const ChordalExtension& ext);

// Greedy merge along clique-tree edges: an edge (Ci, Cj) merges when
// |Ci u Cj|^3 - |Ci|^3 - |Cj|^3 < threshold * |separator|.  A zero (or
// negative) threshold disables merging entirely.
struct MergePolicy {
  double threshold = 0;
};
CliqueSet merge_cliques(const CliqueSet& cs, const MergePolicy& policy);

// Union of base edges and a clique over each vertex group (used to
// couple the closed neighborhood of a bus carrying higher-order
// constraints into a single clique).
Graph coupling_graph(std::size_t n, std::span<const std::pair<int, int>> base_edges,
                     std::span<const std::vector<int>> groups);

// Every edge of g lies inside some clique of cs.
bool covers_all_edges(const CliqueSet& cs, const Graph& g);

// Cliques containing any given vertex induce a connected subtree.
bool running_intersection_holds(const CliqueSet& cs);

// Smallest clique covering the given sorted vertex set, preferring
// lower index on ties; returns npos when no clique covers it.
std::size_t covering_clique(const CliqueSet& cs, std::span<const int> vertices);

}  // namespace mopf
