#pragma once

// JSON trace files: parsing, serialization and the synthetic run generator.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gemmas/answer.hpp"
#include "gemmas/error.hpp"
#include "gemmas/trace_model.hpp"

namespace gemmas {

struct ParsedRun {
  RunRecord run;
  std::vector<std::string> warnings;  // unknown fields, one entry each
};

namespace detail {

using json = nlohmann::json;

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t k = 0; k < offset; ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

class RunReader {
 public:
  explicit RunReader(std::vector<std::string>& warnings) : warnings_(warnings) {}

  RunRecord read(const json& doc) {
    if (!doc.is_object()) throw SchemaError("<root>", "expected an object");
    warn_unknown(doc, "", {"method", "model", "benchmark", "answer_kind", "traces"});

    RunRecord run;
    run.method = str(doc, "method", "method");
    run.model = str(doc, "model", "model");
    run.benchmark = str(doc, "benchmark", "benchmark");
    const auto kind = str(doc, "answer_kind", "answer_kind");
    if (kind == "numeric") {
      run.answer_kind = AnswerKind::numeric;
    } else if (kind == "choice") {
      run.answer_kind = AnswerKind::choice;
    } else {
      throw SchemaError("answer_kind", "expected \"numeric\" or \"choice\", got \"" + kind + "\"");
    }

    const auto& traces = member(doc, "traces", "traces");
    if (!traces.is_array()) throw SchemaError("traces", "expected an array");
    if (traces.empty()) throw SchemaError("traces", "must contain at least one trace");
    run.traces.reserve(traces.size());
    for (std::size_t t = 0; t < traces.size(); ++t) {
      run.traces.push_back(read_trace(traces[t], "traces[" + std::to_string(t) + "]", run.answer_kind));
    }
    return run;
  }

 private:
  ProblemTrace read_trace(const json& j, const std::string& path, AnswerKind kind) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    warn_unknown(j, path,
                 {"problem_id", "question", "gold_answer", "nodes", "spatial", "temporal"});
    ProblemTrace trace;
    trace.problem_id = str(j, "problem_id", path + ".problem_id");
    trace.question = str(j, "question", path + ".question");
    const auto gold = str(j, "gold_answer", path + ".gold_answer");
    if (detail::trim(gold).empty()) throw SchemaError(path + ".gold_answer", "must be non-empty");
    auto parsed = parse_answer(gold, kind);
    if (!parsed) {
      throw SchemaError(path + ".gold_answer",
                        std::string("not a valid ") + to_string(kind) + " answer: \"" + gold + "\"");
    }
    trace.gold_answer = *parsed;

    const auto& nodes = member(j, "nodes", path + ".nodes");
    if (!nodes.is_array()) throw SchemaError(path + ".nodes", "expected an array");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      trace.graph.nodes.push_back(read_node(nodes[k], path + ".nodes[" + std::to_string(k) + "]"));
    }
    std::stable_sort(trace.graph.nodes.begin(), trace.graph.nodes.end(),
                     [](const AgentNode& a, const AgentNode& b) { return a.node_id < b.node_id; });

    const std::size_t n = trace.graph.nodes.size();
    trace.graph.spatial = read_matrix(j, "spatial", path, n);
    trace.graph.temporal = read_matrix(j, "temporal", path, n);

    const auto report = validate_graph(trace.graph);
    if (!report.empty()) throw GraphInvariantError(path, describe(report));
    return trace;
  }

  AgentNode read_node(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
    warn_unknown(j, path,
                 {"id", "role", "prompt", "response", "prompt_tokens", "completion_tokens",
                  "is_final"});
    AgentNode node;
    node.node_id = static_cast<std::size_t>(non_negative(j, "id", path + ".id"));
    node.role = str(j, "role", path + ".role");
    node.prompt = str(j, "prompt", path + ".prompt");
    node.response = str(j, "response", path + ".response");
    node.prompt_tokens = non_negative(j, "prompt_tokens", path + ".prompt_tokens");
    node.completion_tokens = non_negative(j, "completion_tokens", path + ".completion_tokens");
    const auto& fin = member(j, "is_final", path + ".is_final");
    if (!fin.is_boolean()) throw SchemaError(path + ".is_final", "expected a boolean");
    node.is_final = fin.get<bool>();
    return node;
  }

  AdjacencyMatrix read_matrix(const json& j, const char* key, const std::string& path,
                              std::size_t n) {
    const std::string field = path + "." + key;
    const auto& m = member(j, key, field);
    if (!m.is_array()) throw SchemaError(field, "expected an array of rows");
    if (m.size() != n) {
      throw SchemaError(field, "expected " + std::to_string(n) + " rows, got " +
                                   std::to_string(m.size()));
    }
    AdjacencyMatrix out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = m[i];
      if (!row.is_array() || row.size() != n) {
        throw SchemaError(field, "row " + std::to_string(i) + " must be an array of " +
                                     std::to_string(n) + " integers");
      }
      out[i].reserve(n);
      for (const auto& cell : row) {
        if (!cell.is_number_integer()) {
          throw SchemaError(field, "row " + std::to_string(i) + " contains a non-integer entry");
        }
        out[i].push_back(cell.get<int>());
      }
    }
    return out;
  }

  static const json& member(const json& j, const char* key, const std::string& field) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(field, "missing required field");
    return *it;
  }

  static std::string str(const json& j, const char* key, const std::string& field) {
    const auto& v = member(j, key, field);
    if (!v.is_string()) throw SchemaError(field, "expected a string");
    return v.get<std::string>();
  }

  static std::int64_t non_negative(const json& j, const char* key, const std::string& field) {
    const auto& v = member(j, key, field);
    if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
    if (!v.is_number_integer()) throw SchemaError(field, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < 0) throw SchemaError(field, "must be non-negative");
    return x;
  }

  void warn_unknown(const json& j, const std::string& path,
                    std::initializer_list<std::string_view> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
        warnings_.push_back("ignoring unknown field '" + (path.empty() ? "" : path + ".") +
                            it.key() + "'");
      }
    }
  }

  std::vector<std::string>& warnings_;
};

}  // namespace detail

// Parses one run document. Every graph is validated before returning.
inline ParsedRun parse_run(std::string_view text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text.begin(), text.end());
  } catch (const detail::json::parse_error& e) {
    // nlohmann reports the 1-based offset of the offending byte.
    const auto offset = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, column] = detail::line_column(text, offset);
    throw SyntaxError("malformed JSON", line, column);
  }
  ParsedRun out;
  detail::RunReader reader(out.warnings);
  out.run = reader.read(doc);
  return out;
}

inline nlohmann::ordered_json to_json(const RunRecord& run) {
  using oj = nlohmann::ordered_json;
  oj doc;
  doc["method"] = run.method;
  doc["model"] = run.model;
  doc["benchmark"] = run.benchmark;
  doc["answer_kind"] = to_string(run.answer_kind);
  oj traces = oj::array();
  for (const auto& t : run.traces) {
    oj jt;
    jt["problem_id"] = t.problem_id;
    jt["question"] = t.question;
    jt["gold_answer"] = format_answer(t.gold_answer);
    oj nodes = oj::array();
    for (const auto& n : t.graph.nodes) {
      oj jn;
      jn["id"] = n.node_id;
      jn["role"] = n.role;
      jn["prompt"] = n.prompt;
      jn["response"] = n.response;
      jn["prompt_tokens"] = n.prompt_tokens;
      jn["completion_tokens"] = n.completion_tokens;
      jn["is_final"] = n.is_final;
      nodes.push_back(std::move(jn));
    }
    jt["nodes"] = std::move(nodes);
    jt["spatial"] = t.graph.spatial;
    jt["temporal"] = t.graph.temporal;
    traces.push_back(std::move(jt));
  }
  doc["traces"] = std::move(traces);
  return doc;
}

inline std::string serialize_run(const RunRecord& run) {
  return to_json(run).dump(2, ' ', false) + "\n";
}

// ---------------------------------------------------------------------------
// Synthetic runs

struct GenSpec {
  int num_agents = 4;
  int num_problems = 10;
  double edge_density = 0.5;
  double correctness_rate = 0.5;
  int vocabulary_size = 50;
  std::uint64_t seed = 0;
  AnswerKind answer_kind = AnswerKind::numeric;
  std::string method = "synthetic";
};

inline void check_gen_spec(const GenSpec& spec) {
  auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (spec.num_agents < 2) throw Error("num_agents must be >= 2");
  if (spec.num_problems < 1) throw Error("num_problems must be >= 1");
  if (!fraction(spec.edge_density)) throw Error("edge_density must be in [0,1]");
  if (!fraction(spec.correctness_rate)) throw Error("correctness_rate must be in [0,1]");
  if (spec.vocabulary_size < 10) throw Error("vocabulary_size must be >= 10");
}

namespace detail {

// Platform-independent draws on top of mt19937_64 (the standard
// distributions are not specified bit-exactly).
class SeededDraws {
 public:
  explicit SeededDraws(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

inline std::string vocabulary_word(std::uint64_t index) {
  static constexpr std::string_view syllables[] = {"ba", "ke", "li", "mo", "nu", "ra", "se",
                                                   "ti", "vo", "zu", "da", "fe", "gi", "po"};
  constexpr std::uint64_t base = std::size(syllables);
  std::string word;
  std::uint64_t k = index;
  for (int s = 0; s < 2 || k > 0; ++s) {
    word += syllables[k % base];
    k /= base;
  }
  return word;
}

}  // namespace detail

// Edges only run from lower to higher node id. Node N-1 is the aggregator.
inline RunRecord generate_synthetic_run(const GenSpec& spec) {
  check_gen_spec(spec);
  static constexpr std::string_view roles[] = {"MathSolver", "MathAnalyst", "Programmer",
                                               "Inspector"};
  detail::SeededDraws draws(spec.seed);
  const auto n = static_cast<std::size_t>(spec.num_agents);

  RunRecord run;
  run.method = spec.method;
  run.model = "synthetic";
  run.benchmark = "synthetic";
  run.answer_kind = spec.answer_kind;

  for (int p = 0; p < spec.num_problems; ++p) {
    ProblemTrace trace;
    trace.problem_id = "synthetic-" + std::to_string(p);

    std::string gold_text;
    std::string question = "Combine the quantities of problem " + std::to_string(p);
    if (spec.answer_kind == AnswerKind::numeric) {
      const auto gold = 1 + draws.below(999);
      trace.gold_answer = Answer::numeric(static_cast<double>(gold));
      gold_text = std::to_string(gold);
    } else {
      const char gold = static_cast<char>('A' + draws.below(5));
      trace.gold_answer = Answer::choice(gold);
      gold_text = std::string("(") + gold + ")";
      question += " and select one of the options A to E";
    }
    trace.question = question + ".";

    trace.graph.spatial = zero_matrix(n);
    trace.graph.temporal = zero_matrix(n);
    for (std::size_t i = 0; i < n; ++i) {
      AgentNode node;
      node.node_id = i;
      node.is_final = i + 1 == n;
      node.role = node.is_final ? "FinalRefer" : std::string(roles[i % std::size(roles)]);
      node.prompt = "You are " + node.role + ". " + trace.question;

      std::string response;
      const auto words = 6 + draws.below(9);
      for (std::uint64_t w = 0; w < words; ++w) {
        response += detail::vocabulary_word(draws.below(static_cast<std::uint64_t>(spec.vocabulary_size)));
        response += ' ';
      }
      std::string stated = gold_text;
      if (!draws.chance(spec.correctness_rate)) {
        if (spec.answer_kind == AnswerKind::numeric) {
          stated = format_decimal(*trace.gold_answer.numeric_value +
                                  static_cast<double>(1 + draws.below(50)));
        } else {
          const char gold = *trace.gold_answer.choice_label;
          stated = std::string("(") + static_cast<char>('A' + (gold - 'A' + 1 + draws.below(4)) % 5) + ")";
        }
      }
      response += "so the answer is " + stated + ".";
      node.response = std::move(response);
      node.prompt_tokens = static_cast<std::int64_t>(200 + draws.below(800));
      node.completion_tokens = static_cast<std::int64_t>(20 + draws.below(280));
      trace.graph.nodes.push_back(std::move(node));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        trace.graph.spatial[i][j] = draws.chance(spec.edge_density) ? 1 : 0;
        trace.graph.temporal[i][j] = draws.chance(spec.edge_density) ? 1 : 0;
      }
    }
    run.traces.push_back(std::move(trace));
  }
  return run;
}

}  // namespace gemmas
