#pragma once

// Cross-run comparison tables, baseline-vs-candidate deltas, lambda1
// sensitivity sweeps, and their markdown/CSV renderings.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gemmas/answer.hpp"
#include "gemmas/error.hpp"
#include "gemmas/metrics.hpp"

namespace gemmas {

enum class Format { markdown, csv, json };

// (b - a) / a * 100.
inline double relative_delta(double a, double b) {
  if (a == 0.0) throw ZeroBaselineError("relative delta undefined for a zero baseline");
  return (b - a) / a * 100.0;
}

// ---------------------------------------------------------------------------
// Formatting helpers

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

inline std::string format_signed(double v, int decimals) {
  auto s = format_fixed(v, decimals);
  if (s.front() != '-' && s.find_first_not_of("0.") != std::string::npos) s.insert(0, "+");
  return s;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string markdown_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison tables

enum class Metric { accuracy, ptok, ctok, ids, upr };
inline constexpr std::array<Metric, 5> kMetrics = {Metric::accuracy, Metric::ptok, Metric::ctok,
                                                   Metric::ids, Metric::upr};

inline const char* metric_key(Metric m) {
  switch (m) {
    case Metric::accuracy: return "accuracy";
    case Metric::ptok: return "ptok";
    case Metric::ctok: return "ctok";
    case Metric::ids: return "ids";
    case Metric::upr: return "upr";
  }
  return "?";
}

inline const char* metric_title(Metric m) {
  switch (m) {
    case Metric::accuracy: return "Accuracy ↑";
    case Metric::ptok: return "Ptok ↓";
    case Metric::ctok: return "Ctok ↓";
    case Metric::ids: return "IDS ↑";
    case Metric::upr: return "UPR ↓";
  }
  return "?";
}

inline bool higher_is_better(Metric m) { return m == Metric::accuracy || m == Metric::ids; }
inline int display_decimals(Metric m) { return m == Metric::accuracy ? 4 : 2; }

struct RunMetadata {
  std::string benchmark;
  std::string model;
  std::string method;

  static RunMetadata of(const RunRecord& run) { return {run.benchmark, run.model, run.method}; }
  friend auto operator<=>(const RunMetadata&, const RunMetadata&) = default;
};

inline std::optional<double> metric_value(const MetricsReport& r, Metric m) {
  switch (m) {
    case Metric::accuracy: return r.accuracy;
    case Metric::ptok: return r.ptok;
    case Metric::ctok: return r.ctok;
    case Metric::ids: return r.ids;
    case Metric::upr: return r.upr;
  }
  return std::nullopt;
}

// Value as displayed in the table (rounded to the column's precision).
inline std::optional<double> displayed_value(const MetricsReport& r, Metric m) {
  const auto v = metric_value(r, m);
  if (!v) return std::nullopt;
  return std::stod(format_fixed(*v, display_decimals(m)));
}

struct ComparisonRow {
  RunMetadata meta;
  MetricsReport metrics;
  std::array<bool, kMetrics.size()> best{};

  bool is_best(Metric m) const { return best[static_cast<std::size_t>(m)]; }
};

struct ComparisonTable {
  // Grouped by (benchmark, model) in order of first appearance; rows keep
  // input order within a group.
  std::vector<ComparisonRow> rows;
};

// One row per run. In each (benchmark, model) group every column marks one
// best row, comparing displayed values; ties go to the earliest input.
// Columns where no row has a defined value get no marker.
inline ComparisonTable aggregate(const std::vector<std::pair<RunMetadata, MetricsReport>>& reports) {
  if (reports.empty()) throw Error("cannot aggregate an empty list of reports");

  std::vector<std::pair<std::string, std::string>> group_order;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  std::map<RunMetadata, std::size_t> seen;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& meta = reports[k].first;
    if (!seen.emplace(meta, k).second) {
      throw DuplicateKeyError("duplicate run key (" + meta.benchmark + ", " + meta.model + ", " +
                              meta.method + ")");
    }
    const auto key = std::make_pair(meta.benchmark, meta.model);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) group_order.push_back(key);
    it->second.push_back(k);
  }

  // Keep all groups of one benchmark together.
  std::map<std::string, std::size_t> benchmark_rank;
  for (const auto& [bench, _] : group_order) benchmark_rank.try_emplace(bench, benchmark_rank.size());
  std::stable_sort(group_order.begin(), group_order.end(), [&](const auto& a, const auto& b) {
    return benchmark_rank[a.first] < benchmark_rank[b.first];
  });

  ComparisonTable table;
  for (const auto& key : group_order) {
    const auto& members = groups[key];
    const std::size_t first_row = table.rows.size();
    for (std::size_t k : members) table.rows.push_back({reports[k].first, reports[k].second, {}});

    for (Metric m : kMetrics) {
      std::optional<std::size_t> best;
      std::optional<double> best_value;
      for (std::size_t r = first_row; r < table.rows.size(); ++r) {
        const auto v = displayed_value(table.rows[r].metrics, m);
        if (!v) continue;
        const bool better = !best_value || (higher_is_better(m) ? *v > *best_value : *v < *best_value);
        if (better) {
          best = r;
          best_value = v;
        }
      }
      if (best) table.rows[*best].best[static_cast<std::size_t>(m)] = true;
    }
  }
  return table;
}

inline std::string render(const ComparisonTable& table, Format format, bool raw = false) {
  auto cell = [raw](const MetricsReport& r, Metric m) -> std::string {
    const auto v = metric_value(r, m);
    if (!v) return {};
    return raw ? format_decimal(*v) : format_fixed(*v, display_decimals(m));
  };

  std::string out;
  if (format == Format::csv) {
    out = "benchmark,model,method";
    for (Metric m : kMetrics) out += std::string(",") + metric_key(m);
    for (Metric m : kMetrics) out += std::string(",best_") + metric_key(m);
    out += "\n";
    for (const auto& row : table.rows) {
      out += csv_field(row.meta.benchmark) + "," + csv_field(row.meta.model) + "," +
             csv_field(row.meta.method);
      for (Metric m : kMetrics) out += "," + cell(row.metrics, m);
      for (Metric m : kMetrics) out += row.is_best(m) ? ",true" : ",false";
      out += "\n";
    }
    return out;
  }

  std::optional<std::string> benchmark;
  std::optional<std::string> model;
  for (const auto& row : table.rows) {
    const bool new_benchmark = !benchmark || row.meta.benchmark != *benchmark;
    const bool new_model = new_benchmark || row.meta.model != *model;
    if (new_benchmark) {
      if (!out.empty()) out += "\n";
      benchmark = row.meta.benchmark;
      out += "## " + markdown_cell(*benchmark) + "\n\n";
    } else if (new_model) {
      out += "\n";
    }
    if (new_model) {
      model = row.meta.model;
      out += "### " + markdown_cell(*model) + "\n\n| Method |";
      for (Metric m : kMetrics) out += std::string(" ") + metric_title(m) + " |";
      out += "\n|---|---:|---:|---:|---:|---:|\n";
    }
    out += "| " + markdown_cell(row.meta.method) + " |";
    for (Metric m : kMetrics) {
      auto c = cell(row.metrics, m);
      if (c.empty()) c = "n/a";
      else if (row.is_best(m)) c = "**" + c + "**";
      out += " " + c + " |";
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline vs candidate

struct DeltaRow {
  Metric metric;
  std::optional<double> baseline;
  std::optional<double> candidate;
  std::optional<double> delta_pct;  // relative change from baseline, percent
  std::optional<double> ratio;      // baseline / candidate
};

inline std::vector<DeltaRow> compare_reports(const MetricsReport& baseline,
                                             const MetricsReport& candidate) {
  std::vector<DeltaRow> rows;
  for (Metric m : kMetrics) {
    DeltaRow row{m, metric_value(baseline, m), metric_value(candidate, m), {}, {}};
    if (row.baseline && row.candidate) {
      if (*row.baseline != 0.0) row.delta_pct = relative_delta(*row.baseline, *row.candidate);
      if (*row.candidate != 0.0) row.ratio = *row.baseline / *row.candidate;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string render_deltas(const std::vector<DeltaRow>& rows, Format format,
                                 bool raw = false) {
  auto num = [](const std::optional<double>& v) { return v ? format_decimal(*v) : std::string(); };
  auto pct = [raw](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    return raw ? format_decimal(*v) : format_signed(*v, 1);
  };
  auto ratio = [raw](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    return raw ? format_decimal(*v) : format_fixed(*v, 2);
  };

  std::string out;
  if (format == Format::csv) {
    out = "metric,baseline,candidate,delta_pct,ratio\n";
    for (const auto& r : rows) {
      out += std::string(metric_key(r.metric)) + "," + num(r.baseline) + "," + num(r.candidate) +
             "," + pct(r.delta_pct) + "," + ratio(r.ratio) + "\n";
    }
    return out;
  }
  out = "| Metric | Baseline | Candidate | Delta (%) | Baseline/Candidate |\n"
        "|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    auto b = num(r.baseline);
    auto c = num(r.candidate);
    out += std::string("| ") + metric_title(r.metric) + " | " + (b.empty() ? "n/a" : b) + " | " +
           (c.empty() ? "n/a" : c) + " | " + pct(r.delta_pct) + " | " + ratio(r.ratio) + " |\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// lambda1 sweep

struct SweepTable {
  std::string method;
  std::vector<double> grid;                  // strictly ascending, in [0,1]
  std::vector<std::optional<double>> mean_ids;  // one per grid point
};

inline std::vector<double> default_sweep_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(k / 10.0);
  return g;
}

// Inclusive START:END:STEP. Points are start + k*step rounded to 12 decimals
// so that 0:1:0.1 yields 0.3 rather than 0.30000000000000004.
inline std::vector<double> parse_grid(std::string_view spec) {
  const auto c1 = spec.find(':');
  const auto c2 = c1 == std::string_view::npos ? c1 : spec.find(':', c1 + 1);
  std::optional<double> start, end, step;
  if (c1 == std::string_view::npos) {
    start = parse_decimal_literal(spec);
    end = start;
    step = 1.0;
  } else if (c2 != std::string_view::npos) {
    start = parse_decimal_literal(spec.substr(0, c1));
    end = parse_decimal_literal(spec.substr(c1 + 1, c2 - c1 - 1));
    step = parse_decimal_literal(spec.substr(c2 + 1));
  }
  if (!start || !end || !step || *step <= 0.0 || *end < *start) {
    throw Error("invalid grid '" + std::string(spec) + "' (expected START:END:STEP)");
  }
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    const double x = std::round((*start + static_cast<double>(k) * *step) * 1e12) / 1e12;
    if (x > *end + 1e-12) break;
    grid.push_back(x);
  }
  return grid;
}

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw Error("sweep grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0 && grid[k] <= 1.0)) throw Error("sweep grid values must lie in [0,1]");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw Error("sweep grid must be strictly ascending");
  }
}

// Mean IDS over defined traces at each lambda1. Both similarity channels are
// computed once per trace and recombined per grid point.
inline SweepTable lambda_sweep(const RunRecord& run, const std::vector<double>& grid,
                               const AnalysisConfig& config, EmbeddingProvider& provider) {
  check_grid(grid);
  std::vector<TraceChannels> channels(run.traces.size());
  detail::parallel_for(run.traces.size(), config.workers, [&](std::size_t k) {
    channels[k] = compute_channels(run.traces[k].graph, provider);
  });

  SweepTable table{run.method, grid, {}};
  for (double lambda1 : grid) {
    const auto weights = LambdaWeights::from_syntactic(lambda1);
    std::vector<std::optional<double>> ids(run.traces.size());
    for (std::size_t k = 0; k < run.traces.size(); ++k) {
      ids[k] = information_diversity_score(
          run.traces[k].graph,
          combine_similarity(channels[k].syntactic, channels[k].semantic, weights));
    }
    table.mean_ids.push_back(mean_defined(ids, [](const auto& v) { return v; }));
  }
  return table;
}

inline std::string render(const SweepTable& table, Format format, bool raw = false) {
  auto value = [raw](const std::optional<double>& v) {
    if (!v) return std::string();
    return raw ? format_decimal(*v) : format_fixed(*v, 6);
  };
  std::string out;
  if (format == Format::csv) {
    out = "lambda1,mean_ids\n";
    for (std::size_t k = 0; k < table.grid.size(); ++k)
      out += format_decimal(table.grid[k]) + "," + value(table.mean_ids[k]) + "\n";
    return out;
  }
  out = "| λ1 | Mean IDS (" + markdown_cell(table.method) + ") |\n|---:|---:|\n";
  for (std::size_t k = 0; k < table.grid.size(); ++k) {
    auto v = value(table.mean_ids[k]);
    out += "| " + format_decimal(table.grid[k]) + " | " + (v.empty() ? "n/a" : v) + " |\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report documents (JSON)

inline nlohmann::ordered_json report_to_json(const RunMetadata& meta, const MetricsReport& r) {
  using oj = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? oj(*v) : oj(nullptr); };
  oj doc;
  doc["benchmark"] = meta.benchmark;
  doc["model"] = meta.model;
  doc["method"] = meta.method;
  doc["metrics"] = {{"accuracy", r.accuracy}, {"ptok", r.ptok}, {"ctok", r.ctok},
                    {"ids", opt(r.ids)},      {"upr", opt(r.upr)}};
  oj problems = oj::array();
  for (const auto& p : r.per_problem) {
    problems.push_back({{"problem_id", p.problem_id},
                        {"ids", opt(p.ids)},
                        {"upr", opt(p.upr)},
                        {"necessary_paths", p.paths.necessary},
                        {"total_paths", p.paths.all},
                        {"correct", p.correct}});
  }
  doc["per_problem"] = std::move(problems);
  return doc;
}

// Reads the document written by report_to_json. per_problem is optional so
// that published table rows can be written by hand.
inline std::pair<RunMetadata, MetricsReport> report_from_json(const nlohmann::json& doc) {
  auto text = [&](const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) throw SchemaError(key, "expected a string");
    return it->get<std::string>();
  };
  auto metrics = doc.find("metrics");
  if (metrics == doc.end() || !metrics->is_object()) throw SchemaError("metrics", "expected an object");
  auto number = [&](const char* key, bool nullable) -> std::optional<double> {
    const std::string field = std::string("metrics.") + key;
    auto it = metrics->find(key);
    if (it == metrics->end()) throw SchemaError(field, "missing required field");
    if (it->is_null() && nullable) return std::nullopt;
    if (!it->is_number()) throw SchemaError(field, "expected a number");
    return it->get<double>();
  };
  RunMetadata meta{text("benchmark"), text("model"), text("method")};
  MetricsReport r;
  r.accuracy = *number("accuracy", false);
  r.ptok = *number("ptok", false);
  r.ctok = *number("ctok", false);
  r.ids = number("ids", true);
  r.upr = number("upr", true);
  if (auto pp = doc.find("per_problem"); pp != doc.end() && pp->is_array()) {
    for (const auto& p : *pp) {
      ProblemMetrics m;
      m.problem_id = p.value("problem_id", std::string());
      if (auto v = p.find("ids"); v != p.end() && v->is_number()) m.ids = v->get<double>();
      if (auto v = p.find("upr"); v != p.end() && v->is_number()) m.upr = v->get<double>();
      m.paths.necessary = p.value("necessary_paths", std::size_t{0});
      m.paths.all = p.value("total_paths", std::size_t{0});
      m.correct = p.value("correct", false);
      r.per_problem.push_back(std::move(m));
    }
  }
  return {std::move(meta), std::move(r)};
}

}  // namespace gemmas
