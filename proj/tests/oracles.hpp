#pragma once

// Test-only reference computations. These deliberately avoid the library's
// metric code paths: they read raw matrices, enumerate node sequences by
// brute force and keep UPR as an exact fraction.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "gemmas/trace_model.hpp"
#include "gemmas/trace_io.hpp"

namespace gemmas::oracle {

// IDS summed over ordered pairs (i != j); each unordered pair is counted
// twice in numerator and denominator alike.
template <typename Sim>
std::optional<double> ids(const TraceGraph& g, Sim sim) {
  const std::size_t n = g.size();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const int s = (g.spatial[i][j] == 1 || g.spatial[j][i] == 1) ? 1 : 0;
      const int t = (g.temporal[i][j] == 1 || g.temporal[j][i] == 1) ? 1 : 0;
      const int w = s + t;
      num += w * (1.0 - sim(i, j));
      den += w;
    }
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

// Every sequence of distinct nodes (length >= 2) whose consecutive pairs are
// spatial edges, sorted lexicographically.
inline std::vector<std::vector<std::size_t>> paths(const TraceGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> out;
  // Enumerate subsets by bitmask, then all orderings of each subset.
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (1u << k)) members.push_back(k);
    if (members.size() < 2) continue;
    do {
      bool ok = true;
      for (std::size_t k = 0; k + 1 < members.size() && ok; ++k)
        ok = g.spatial[members[k]][members[k + 1]] == 1;
      if (ok) out.push_back(members);
    } while (std::next_permutation(members.begin(), members.end()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction reduced() const {
    const auto g = std::gcd(num, den);
    return g == 0 ? *this : Fraction{num / g, den / g};
  }
  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num * b.den == b.num * a.den;
  }
};

// UPR as an exact fraction with a rational threshold p/q: a path is
// necessary iff c/t >= p/q, i.e. c*q >= p*t.
inline std::optional<Fraction> upr(const TraceGraph& g, const std::vector<bool>& correct,
                                   std::int64_t p = 1, std::int64_t q = 2) {
  const auto all = paths(g);
  if (all.empty()) return std::nullopt;
  std::int64_t necessary = 0;
  for (const auto& path : all) {
    std::int64_t c = 0;
    for (auto v : path) c += correct[v] ? 1 : 0;
    if (c * q >= p * static_cast<std::int64_t>(path.size())) ++necessary;
  }
  const auto total = static_cast<std::int64_t>(all.size());
  return Fraction{total - necessary, total}.reduced();
}

// Applies a node relabelling so random DAGs are not always upper triangular.
inline TraceGraph relabel(const TraceGraph& g, const std::vector<std::size_t>& perm) {
  const std::size_t n = g.size();
  TraceGraph out;
  out.nodes.resize(n);
  out.spatial = zero_matrix(n);
  out.temporal = zero_matrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.nodes[perm[i]] = g.nodes[i];
    out.nodes[perm[i]].node_id = perm[i];
    for (std::size_t j = 0; j < n; ++j) {
      out.spatial[perm[i]][perm[j]] = g.spatial[i][j];
      out.temporal[perm[i]][perm[j]] = g.temporal[i][j];
    }
  }
  return out;
}

// Random runs with N <= 7 and shuffled node ids.
inline RunRecord random_small_run(std::mt19937_64& rng, int problems = 1) {
  std::uniform_int_distribution<int> agents(2, 7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GenSpec spec;
  spec.num_agents = agents(rng);
  spec.num_problems = problems;
  spec.edge_density = unit(rng);
  spec.correctness_rate = unit(rng);
  spec.vocabulary_size = 10 + static_cast<int>(rng() % 40);
  spec.seed = rng();
  auto run = generate_synthetic_run(spec);
  for (auto& trace : run.traces) {
    std::vector<std::size_t> perm(trace.graph.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    trace.graph = relabel(trace.graph, perm);
  }
  return run;
}

}  // namespace gemmas::oracle
