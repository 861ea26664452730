#pragma once

// Trace data model: agents as DAG nodes, spatial/temporal adjacency
// matrices, problems and runs.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "gemmas/error.hpp"

namespace gemmas {

enum class AnswerKind { numeric, choice };

inline const char* to_string(AnswerKind kind) {
  return kind == AnswerKind::numeric ? "numeric" : "choice";
}

// Tagged answer value. Exactly one payload is populated, matching kind.
struct Answer {
  AnswerKind kind = AnswerKind::numeric;
  std::optional<double> numeric_value;
  std::optional<char> choice_label;

  static Answer numeric(double value) {
    return Answer{AnswerKind::numeric, value, std::nullopt};
  }
  static Answer choice(char label) {
    return Answer{AnswerKind::choice, std::nullopt, label};
  }

  bool well_formed() const {
    if (kind == AnswerKind::numeric) return numeric_value.has_value() && !choice_label;
    return choice_label.has_value() && !numeric_value && *choice_label >= 'A' &&
           *choice_label <= 'E';
  }

  friend bool operator==(const Answer&, const Answer&) = default;
};

struct AgentNode {
  std::size_t node_id = 0;
  std::string role;
  std::string prompt;
  std::string response;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool is_final = false;

  friend bool operator==(const AgentNode&, const AgentNode&) = default;
};

// Row-major binary matrix. Kept as int so that invalid entries survive
// until validation reports them.
using AdjacencyMatrix = std::vector<std::vector<int>>;

inline AdjacencyMatrix zero_matrix(std::size_t n) {
  return AdjacencyMatrix(n, std::vector<int>(n, 0));
}

struct TraceGraph {
  std::vector<AgentNode> nodes;
  AdjacencyMatrix spatial;
  AdjacencyMatrix temporal;

  std::size_t size() const noexcept { return nodes.size(); }

  bool has_spatial(std::size_t i, std::size_t j) const { return spatial[i][j] != 0; }
  bool has_temporal(std::size_t i, std::size_t j) const { return temporal[i][j] != 0; }
  bool has_union_edge(std::size_t i, std::size_t j) const {
    return has_spatial(i, j) || has_temporal(i, j);
  }

  friend bool operator==(const TraceGraph&, const TraceGraph&) = default;
};

struct ProblemTrace {
  std::string problem_id;
  std::string question;
  Answer gold_answer;
  TraceGraph graph;

  friend bool operator==(const ProblemTrace&, const ProblemTrace&) = default;
};

struct RunRecord {
  std::string method;
  std::string model;
  std::string benchmark;
  AnswerKind answer_kind = AnswerKind::numeric;
  std::vector<ProblemTrace> traces;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  node_id,
  token_count,
  multiple_final,
  dimension,
  non_binary,
  self_loop,
  cycle,
};

struct Violation {
  ViolationKind kind;
  std::string message;
  // Matrix coordinates or node ids involved; for cycles, the node sequence.
  std::vector<std::size_t> where;
};

using ValidationReport = std::vector<Violation>;

namespace detail {

inline bool matrix_is_square(const AdjacencyMatrix& m, std::size_t n) {
  if (m.size() != n) return false;
  return std::all_of(m.begin(), m.end(), [n](const auto& row) { return row.size() == n; });
}

// Returns one directed cycle of the union graph (first node repeated at the
// end), or an empty vector if the graph is acyclic.
inline std::vector<std::size_t> find_union_cycle(const TraceGraph& g) {
  const std::size_t n = g.size();
  enum : unsigned char { white, grey, black };
  std::vector<unsigned char> colour(n, white);
  std::vector<std::size_t> parent(n, n);

  for (std::size_t root = 0; root < n; ++root) {
    if (colour[root] != white) continue;
    // Iterative DFS: stack of (node, next neighbour to try).
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    colour[root] = grey;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next == n) {
        colour[u] = black;
        stack.pop_back();
        continue;
      }
      const std::size_t v = next++;
      if (v == u || !g.has_union_edge(u, v)) continue;
      if (colour[v] == grey) {
        std::vector<std::size_t> cycle{v};
        for (std::size_t w = u; w != v; w = parent[w]) cycle.push_back(w);
        std::reverse(cycle.begin() + 1, cycle.end());
        cycle.push_back(v);
        return cycle;
      }
      if (colour[v] == white) {
        colour[v] = grey;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return {};
}

inline std::string join_ids(const std::vector<std::size_t>& ids, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (k) out += sep;
    out += std::to_string(ids[k]);
  }
  return out;
}

}  // namespace detail

// Reports every violated structural invariant. Nodes must be stored in id
// order (nodes[k].node_id == k); matrices are indexed by node id.
inline ValidationReport validate_graph(const TraceGraph& g) {
  ValidationReport report;
  const std::size_t n = g.size();

  std::size_t finals = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& node = g.nodes[k];
    if (node.node_id != k) {
      report.push_back({ViolationKind::node_id,
                        "node at position " + std::to_string(k) + " has id " +
                            std::to_string(node.node_id) + " (expected " + std::to_string(k) + ")",
                        {k}});
    }
    if (node.prompt_tokens < 0 || node.completion_tokens < 0) {
      report.push_back({ViolationKind::token_count,
                        "negative token count on node " + std::to_string(k), {k}});
    }
    if (node.is_final) ++finals;
  }
  if (finals > 1) {
    report.push_back({ViolationKind::multiple_final,
                      std::to_string(finals) + " nodes marked is_final (at most one allowed)", {}});
  }

  bool shape_ok = true;
  const std::pair<const char*, const AdjacencyMatrix*> matrices[] = {{"spatial", &g.spatial},
                                                                     {"temporal", &g.temporal}};
  for (const auto& [name, matrix] : matrices) {
    const auto& m = *matrix;
    if (!detail::matrix_is_square(m, n)) {
      shape_ok = false;
      report.push_back({ViolationKind::dimension,
                        std::string(name) + " matrix is not " + std::to_string(n) + "x" +
                            std::to_string(n),
                        {}});
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const int v = m[i][j];
        if (v != 0 && v != 1) {
          report.push_back({ViolationKind::non_binary,
                            "non-binary entry at (" + std::to_string(i) + "," + std::to_string(j) +
                                ") in " + name + ": " + std::to_string(v),
                            {i, j}});
        } else if (i == j && v != 0) {
          report.push_back({ViolationKind::self_loop,
                            "self-loop at (" + std::to_string(i) + "," + std::to_string(i) +
                                ") in " + name,
                            {i, i}});
        }
      }
    }
  }

  if (shape_ok) {
    auto cycle = detail::find_union_cycle(g);
    if (!cycle.empty()) {
      report.push_back({ViolationKind::cycle,
                        "cycle in union graph: " + detail::join_ids(cycle, " -> "),
                        std::move(cycle)});
    }
  }
  return report;
}

inline std::vector<std::string> describe(const ValidationReport& report) {
  std::vector<std::string> out;
  out.reserve(report.size());
  for (const auto& v : report) out.push_back(v.message);
  return out;
}

// Kahn's algorithm over the union graph, smallest ready node id first.
inline std::vector<std::size_t> topological_order(const TraceGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (g.has_union_edge(i, j)) ++indegree[j];

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t v = 0; v < n; ++v)
      if (g.has_union_edge(u, v) && --indegree[v] == 0) ready.push(v);
  }
  if (order.size() != n) throw CycleError("union graph contains a cycle");
  return order;
}

// max(S_ij, S_ji) + max(T_ij, T_ji).
inline int connection_weight(const TraceGraph& g, std::size_t i, std::size_t j) {
  const std::size_t n = g.size();
  if (i >= n || j >= n) {
    throw IndexOutOfRangeError("node index out of range: (" + std::to_string(i) + "," +
                               std::to_string(j) + ") with N=" + std::to_string(n));
  }
  return std::max(g.spatial[i][j], g.spatial[j][i]) + std::max(g.temporal[i][j], g.temporal[j][i]);
}

// The node whose answer counts for accuracy: the is_final node, otherwise the
// highest-id sink of the union graph.
inline std::optional<std::size_t> final_node(const TraceGraph& g) {
  for (const auto& node : g.nodes)
    if (node.is_final) return node.node_id;
  for (std::size_t i = g.size(); i-- > 0;) {
    bool sink = true;
    for (std::size_t j = 0; j < g.size() && sink; ++j) sink = !g.has_union_edge(i, j);
    if (sink) return i;
  }
  return std::nullopt;
}

}  // namespace gemmas
