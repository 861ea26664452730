#pragma once

// Process-level metrics over trace graphs: Information Diversity Score,
// Unnecessary Path Ratio, accuracy and token usage, plus the per-run
// analyzer that ties them together.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gemmas/answer.hpp"
#include "gemmas/embedding.hpp"
#include "gemmas/error.hpp"
#include "gemmas/text_features.hpp"
#include "gemmas/trace_model.hpp"

namespace gemmas {

// ---------------------------------------------------------------------------
// Information Diversity Score

// Connection-weighted mean of (1 - similarity) over unordered agent pairs.
// Returns nullopt when no pair is connected (total weight zero).
inline std::optional<double> information_diversity_score(const TraceGraph& graph,
                                                         const SimilarityMatrix& ss_total) {
  const std::size_t n = graph.size();
  if (ss_total.size() != n) {
    throw DimensionMismatchError("similarity matrix is " + std::to_string(ss_total.size()) +
                                 "x" + std::to_string(ss_total.size()) + " but the graph has " +
                                 std::to_string(n) + " nodes");
  }
  double weighted_diversity = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int w = connection_weight(graph, i, j);
      if (w > 0) {
        weighted_diversity += w * (1.0 - ss_total(i, j));
        total_weight += w;
      }
    }
  }
  if (total_weight == 0.0) return std::nullopt;
  return weighted_diversity / total_weight;
}

// ---------------------------------------------------------------------------
// Paths

// Simple directed path over spatial edges, at least two nodes.
using Path = std::vector<std::size_t>;

// Every simple spatial path with at least one edge. Depth-first from each
// node in ascending id, neighbours in ascending id; each path is emitted when
// first reached, so prefixes precede their extensions.
inline std::vector<Path> enumerate_paths(const TraceGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<Path> out;
  std::vector<bool> on_path(n, false);
  Path current;

  std::function<void(std::size_t)> extend = [&](std::size_t u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (!graph.has_spatial(u, v)) continue;
      if (on_path[v]) throw CycleError("spatial graph contains a cycle through node " + std::to_string(v));
      current.push_back(v);
      on_path[v] = true;
      out.push_back(current);
      extend(v);
      on_path[v] = false;
      current.pop_back();
    }
  };

  for (std::size_t start = 0; start < n; ++start) {
    current.assign(1, start);
    on_path[start] = true;
    extend(start);
    on_path[start] = false;
  }
  return out;
}

struct PathAssessment {
  Path path;
  std::size_t correct_count = 0;
  std::size_t total_count = 0;
  double score = 0.0;
  bool necessary = false;
};

inline constexpr double kDefaultUprThreshold = 0.5;

// Whether each node's extracted answer matches the gold answer.
inline std::vector<bool> node_correctness(const TraceGraph& graph, const Answer& gold,
                                          AnswerKind kind,
                                          const ExtractorRegistry& extractors = {}) {
  std::vector<bool> out(graph.size());
  for (std::size_t k = 0; k < graph.size(); ++k) {
    out[k] = answers_match(extractors.extract(graph.nodes[k].response, kind), gold);
  }
  return out;
}

inline PathAssessment assess_path(const Path& path, const std::vector<bool>& correct,
                                  double threshold = kDefaultUprThreshold) {
  PathAssessment a;
  a.path = path;
  for (std::size_t v : path) {
    if (correct.at(v)) ++a.correct_count;
    ++a.total_count;
  }
  a.score = a.total_count > 0
                ? static_cast<double>(a.correct_count) / static_cast<double>(a.total_count)
                : 0.0;
  a.necessary = a.score >= threshold;
  return a;
}

// Fraction of path members whose answer equals gold; necessary when the
// fraction reaches the threshold (inclusive).
inline PathAssessment path_contribution(const Path& path, const TraceGraph& graph,
                                        const Answer& gold, AnswerKind kind,
                                        double threshold = kDefaultUprThreshold,
                                        const ExtractorRegistry& extractors = {}) {
  for (std::size_t v : path) {
    if (v >= graph.size()) {
      throw IndexOutOfRangeError("path node " + std::to_string(v) + " outside graph of size " +
                                 std::to_string(graph.size()));
    }
  }
  return assess_path(path, node_correctness(graph, gold, kind, extractors), threshold);
}

struct PathCounts {
  std::size_t necessary = 0;
  std::size_t all = 0;

  // 1 - necessary/all, or nullopt when there are no paths.
  std::optional<double> ratio() const {
    if (all == 0) return std::nullopt;
    return static_cast<double>(all - necessary) / static_cast<double>(all);
  }
};

inline PathCounts count_paths(const TraceGraph& graph, const std::vector<bool>& correct,
                              double threshold = kDefaultUprThreshold) {
  PathCounts counts;
  for (const auto& p : enumerate_paths(graph)) {
    ++counts.all;
    if (assess_path(p, correct, threshold).necessary) ++counts.necessary;
  }
  return counts;
}

inline std::optional<double> unnecessary_path_ratio(const TraceGraph& graph, const Answer& gold,
                                                    AnswerKind kind,
                                                    double threshold = kDefaultUprThreshold,
                                                    const ExtractorRegistry& extractors = {}) {
  return count_paths(graph, node_correctness(graph, gold, kind, extractors), threshold).ratio();
}

// ---------------------------------------------------------------------------
// Baselines

inline bool trace_is_correct(const ProblemTrace& trace, AnswerKind kind,
                             const ExtractorRegistry& extractors = {}) {
  const auto final_id = final_node(trace.graph);
  if (!final_id) return false;
  return answers_match(extractors.extract(trace.graph.nodes[*final_id].response, kind),
                       trace.gold_answer);
}

inline double accuracy(const RunRecord& run, const ExtractorRegistry& extractors = {}) {
  if (run.traces.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& t : run.traces)
    if (trace_is_correct(t, run.answer_kind, extractors)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(run.traces.size());
}

struct TokenUsage {
  double ptok = 0.0;
  double ctok = 0.0;
};

// Mean prompt/completion tokens per problem, divided by scale (kilotokens by
// default).
inline TokenUsage token_usage(const RunRecord& run, double scale = 1000.0) {
  if (run.traces.empty()) return {};
  std::int64_t prompt = 0;
  std::int64_t completion = 0;
  for (const auto& t : run.traces) {
    for (const auto& node : t.graph.nodes) {
      prompt += node.prompt_tokens;
      completion += node.completion_tokens;
    }
  }
  const double denom = scale * static_cast<double>(run.traces.size());
  return {static_cast<double>(prompt) / denom, static_cast<double>(completion) / denom};
}

// ---------------------------------------------------------------------------
// Run analysis

enum class ProviderKind { local, remote };

struct AnalysisConfig {
  double lambda1 = 0.5;
  double upr_threshold = kDefaultUprThreshold;
  ProviderKind provider = ProviderKind::local;
  std::optional<std::string> remote_url;
  double token_scale = 1000.0;
  int workers = 4;
  ExtractorRegistry extractors;
};

inline std::unique_ptr<EmbeddingProvider> make_provider(const AnalysisConfig& config) {
  if (config.provider == ProviderKind::local) return std::make_unique<LocalHashingProvider>();
  return std::make_unique<RemoteEmbeddingProvider>(
      RemoteProviderConfig::from_environment(config.remote_url));
}

// Both similarity channels of one trace, kept apart so they can be
// recombined under different weights without re-embedding.
struct TraceChannels {
  SimilarityMatrix syntactic;
  SimilarityMatrix semantic;
};

inline TraceChannels compute_channels(const TraceGraph& graph, EmbeddingProvider& provider) {
  std::vector<std::string> responses;
  responses.reserve(graph.size());
  for (const auto& node : graph.nodes) responses.push_back(node.response);
  const auto terms = tfidf_vectors(responses);
  const auto embeddings = embed(responses, provider);
  return {pairwise_similarity(std::span<const TermVector>(terms)),
          pairwise_similarity(std::span<const EmbeddingVector>(embeddings))};
}

struct ProblemMetrics {
  std::string problem_id;
  std::optional<double> ids;
  std::optional<double> upr;
  PathCounts paths;
  bool correct = false;
};

struct MetricsReport {
  double accuracy = 0.0;
  double ptok = 0.0;
  double ctok = 0.0;
  std::optional<double> ids;
  std::optional<double> upr;
  std::vector<ProblemMetrics> per_problem;
};

// Mean over the defined values, or nullopt if none is defined.
template <typename Range, typename Proj>
std::optional<double> mean_defined(const Range& items, Proj proj) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& item : items) {
    if (const std::optional<double> v = proj(item)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

namespace detail {

// Runs fn(0..count-1) on up to `workers` threads. The first exception thrown
// is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& fn) {
  const std::size_t threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k; !failed && (k = next++) < count;) {
          try {
            fn(k);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline ProblemMetrics analyze_trace(const ProblemTrace& trace, AnswerKind kind,
                                    const AnalysisConfig& config, EmbeddingProvider& provider) {
  ProblemMetrics m;
  m.problem_id = trace.problem_id;
  const auto channels = compute_channels(trace.graph, provider);
  const auto ss_total = combine_similarity(channels.syntactic, channels.semantic,
                                           LambdaWeights::from_syntactic(config.lambda1));
  m.ids = information_diversity_score(trace.graph, ss_total);
  const auto correct = node_correctness(trace.graph, trace.gold_answer, kind, config.extractors);
  m.paths = count_paths(trace.graph, correct, config.upr_threshold);
  m.upr = m.paths.ratio();
  m.correct = trace_is_correct(trace, kind, config.extractors);
  return m;
}

// Per-trace IDS/UPR plus run-level accuracy and token usage. Traces may be
// processed concurrently; results are merged in trace order.
inline MetricsReport analyze_run(const RunRecord& run, const AnalysisConfig& config,
                                 EmbeddingProvider& provider) {
  MetricsReport report;
  report.per_problem.resize(run.traces.size());
  detail::parallel_for(run.traces.size(), config.workers, [&](std::size_t k) {
    report.per_problem[k] = analyze_trace(run.traces[k], run.answer_kind, config, provider);
  });

  report.accuracy = accuracy(run, config.extractors);
  const auto tokens = token_usage(run, config.token_scale);
  report.ptok = tokens.ptok;
  report.ctok = tokens.ctok;
  report.ids = mean_defined(report.per_problem, [](const ProblemMetrics& p) { return p.ids; });
  report.upr = mean_defined(report.per_problem, [](const ProblemMetrics& p) { return p.upr; });
  return report;
}

inline MetricsReport analyze_run(const RunRecord& run, const AnalysisConfig& config = {}) {
  auto provider = make_provider(config);
  return analyze_run(run, config, *provider);
}

}  // namespace gemmas
