#pragma once

// The `gemmas` command line: validate, analyze, sweep, generate, compare.
// Exit codes: 0 success, 1 validation or metric failure, 2 I/O or usage.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gemmas/error.hpp"
#include "gemmas/metrics.hpp"
#include "gemmas/report.hpp"
#include "gemmas/trace_io.hpp"

namespace gemmas::cli {

inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kIoError = 2;

struct IoError : Error {
  using Error::Error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

struct Options {
  AnalysisConfig analysis;
  std::string format;
  std::string output;
  bool keep_partial = false;
  bool raw = false;
};

inline Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  return Format::markdown;
}

// A run file is analysed; a report file (one report or {"reports": [...]})
// is taken as already computed.
struct Input {
  std::optional<RunRecord> run;
  std::vector<std::pair<RunMetadata, MetricsReport>> reports;
};

inline Input load_input(const std::string& path, std::ostream& err) {
  const auto text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    parse_run(text);  // raises SyntaxError with line/column
  }
  Input in;
  if (doc.is_object() && doc.contains("metrics")) {
    in.reports.push_back(report_from_json(doc));
  } else if (doc.is_object() && doc.contains("reports")) {
    const auto& reports = doc["reports"];
    if (!reports.is_array()) throw SchemaError("reports", "expected an array");
    for (const auto& r : reports) in.reports.push_back(report_from_json(r));
  } else {
    auto parsed = parse_run(text);
    for (const auto& w : parsed.warnings) err << path << ": warning: " << w << "\n";
    in.run = std::move(parsed.run);
  }
  return in;
}

inline void emit(const Options& opts, const std::string& content, std::ostream& out) {
  if (opts.output.empty() || opts.output == "-") {
    out << content;
  } else {
    write_file(opts.output, content);
  }
}

inline std::string reports_json(const std::vector<std::pair<RunMetadata, MetricsReport>>& reports) {
  nlohmann::ordered_json doc;
  doc["reports"] = nlohmann::ordered_json::array();
  for (const auto& [meta, r] : reports) doc["reports"].push_back(report_to_json(meta, r));
  return doc.dump(2) + "\n";
}

// Maps library errors onto the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    err << context << e.what() << "\n";
    return kIoError;
  } catch (const ProviderUnavailableError& e) {
    err << context << "embedding provider unavailable: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << context << e.what() << "\n";
    return kFailure;
  } catch (const nlohmann::json::exception& e) {
    err << context << e.what() << "\n";
    return kFailure;
  }
}

inline int cmd_validate(const std::vector<std::string>& paths, std::ostream& out,
                        std::ostream& err) {
  int status = kOk;
  for (const auto& path : paths) {
    const int rc = guarded(err, path + ": ", [&] {
      auto parsed = parse_run(read_file(path));
      for (const auto& w : parsed.warnings) err << path << ": warning: " << w << "\n";
      out << path << ": ok (" << parsed.run.traces.size() << " traces)\n";
      return kOk;
    });
    status = std::max(status, rc);
  }
  return status;
}

inline int cmd_analyze(const std::vector<std::string>& paths, const Options& opts,
                       std::ostream& out, std::ostream& err) {
  std::vector<std::pair<RunMetadata, MetricsReport>> reports;
  std::unique_ptr<EmbeddingProvider> provider;
  const int rc = guarded(err, "", [&] {
    for (const auto& path : paths) {
      auto in = load_input(path, err);
      if (in.run) {
        if (!provider) provider = make_provider(opts.analysis);
        reports.emplace_back(RunMetadata::of(*in.run), analyze_run(*in.run, opts.analysis, *provider));
      }
      for (auto& r : in.reports) reports.push_back(std::move(r));
    }
    return kOk;
  });
  if (rc != kOk) {
    if (opts.keep_partial && !reports.empty()) {
      const auto partial = (opts.output.empty() || opts.output == "-" ? std::string("gemmas")
                                                                       : opts.output) +
                           ".partial.json";
      guarded(err, "", [&] {
        write_file(partial, reports_json(reports));
        err << "wrote partial results for " << reports.size() << " run(s) to " << partial << "\n";
        return kOk;
      });
    }
    return rc;
  }
  return guarded(err, "", [&] {
    const auto format = parse_format(opts.format);
    if (format == Format::json) {
      emit(opts, reports_json(reports), out);
    } else {
      emit(opts, render(aggregate(reports), format, opts.raw), out);
    }
    return kOk;
  });
}

inline int cmd_sweep(const std::string& path, const std::string& grid_spec, const Options& opts,
                     std::ostream& out, std::ostream& err) {
  return guarded(err, "", [&] {
    const auto grid = grid_spec.empty() ? default_sweep_grid() : parse_grid(grid_spec);
    auto parsed = parse_run(read_file(path));
    for (const auto& w : parsed.warnings) err << path << ": warning: " << w << "\n";
    auto provider = make_provider(opts.analysis);
    const auto table = lambda_sweep(parsed.run, grid, opts.analysis, *provider);
    emit(opts, render(table, opts.format == "markdown" ? Format::markdown : Format::csv, opts.raw),
         out);
    return kOk;
  });
}

inline int cmd_generate(const GenSpec& spec, const Options& opts, std::ostream& out,
                        std::ostream& err) {
  return guarded(err, "", [&] {
    emit(opts, serialize_run(generate_synthetic_run(spec)), out);
    return kOk;
  });
}

inline int cmd_compare(const std::string& baseline_path, const std::string& candidate_path,
                       const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "", [&] {
    auto load_one = [&](const std::string& path) {
      auto in = load_input(path, err);
      if (in.run) return analyze_run(*in.run, opts.analysis);
      if (in.reports.size() != 1) {
        throw SchemaError("reports", path + " must hold exactly one report to compare");
      }
      return in.reports.front().second;
    };
    const auto baseline = load_one(baseline_path);
    const auto candidate = load_one(candidate_path);
    const auto format = parse_format(opts.format);
    emit(opts, render_deltas(compare_reports(baseline, candidate),
                             format == Format::csv ? Format::csv : Format::markdown, opts.raw),
         out);
    return kOk;
  });
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Process-level evaluation of multi-agent LLM traces", "gemmas"};
  app.require_subcommand(1);

  Options opts;
  std::string provider = "local";

  auto add_analysis_flags = [&](CLI::App* cmd) {
    cmd->add_option("--lambda1", opts.analysis.lambda1, "Syntactic similarity weight")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--threshold", opts.analysis.upr_threshold, "Path contribution threshold")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--provider", provider, "Embedding provider")
        ->check(CLI::IsMember({"local", "remote"}));
    cmd->add_option("--remote-url", opts.analysis.remote_url, "Embeddings endpoint URL");
    cmd->add_option("--workers", opts.analysis.workers, "Concurrent traces")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--token-scale", opts.analysis.token_scale, "Divisor for token means")
        ->check(CLI::PositiveNumber);
  };
  auto add_output_flags = [&](CLI::App* cmd, std::vector<std::string> formats) {
    cmd->add_option("--format", opts.format, "Output format")->check(CLI::IsMember(formats));
    cmd->add_option("--output,-o", opts.output, "Write to PATH instead of stdout");
    cmd->add_flag("--raw", opts.raw, "Print unrounded values");
  };

  std::vector<std::string> paths;
  auto* validate = app.add_subcommand("validate", "Check trace files against the schema");
  validate->add_option("paths", paths, "Trace files")->required();

  auto* analyze = app.add_subcommand("analyze", "Compute metrics and render a comparison table");
  analyze->add_option("paths", paths, "Trace or report files")->required();
  add_analysis_flags(analyze);
  add_output_flags(analyze, {"markdown", "csv", "json"});
  analyze->add_flag("--keep-partial", opts.keep_partial,
                    "On provider failure, keep reports of finished runs");

  std::string sweep_path;
  std::string grid = "0:1:0.1";
  auto* sweep = app.add_subcommand("sweep", "Mean IDS across lambda1 values");
  sweep->add_option("path", sweep_path, "Trace file")->required();
  sweep->add_option("--grid", grid, "START:END:STEP (inclusive)");
  add_analysis_flags(sweep);
  add_output_flags(sweep, {"csv", "markdown"});

  GenSpec gen;
  std::string answer_kind = "numeric";
  auto* generate = app.add_subcommand("generate", "Write a synthetic trace file");
  generate->add_option("--agents", gen.num_agents, "Agents per trace")->check(CLI::Range(2, 1000));
  generate->add_option("--problems", gen.num_problems, "Number of traces")
      ->check(CLI::PositiveNumber);
  generate->add_option("--density", gen.edge_density, "Edge probability per matrix")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--correctness", gen.correctness_rate, "Probability a node is correct")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--vocab", gen.vocabulary_size, "Vocabulary size")
      ->check(CLI::Range(10, 1000000));
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--answer-kind", answer_kind, "numeric or choice")
      ->check(CLI::IsMember({"numeric", "choice"}));
  generate->add_option("--method", gen.method, "Method name recorded in the file");
  generate->add_option("--output,-o", opts.output, "Write to PATH instead of stdout");

  std::string baseline_path;
  std::string candidate_path;
  auto* compare = app.add_subcommand("compare", "Relative deltas between two runs or reports");
  compare->add_option("baseline", baseline_path, "Baseline trace or report file")->required();
  compare->add_option("candidate", candidate_path, "Candidate trace or report file")->required();
  add_analysis_flags(compare);
  add_output_flags(compare, {"markdown", "csv"});

  std::vector<const char*> argv{"gemmas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kIoError;
  }

  opts.analysis.provider = provider == "remote" ? ProviderKind::remote : ProviderKind::local;
  gen.answer_kind = answer_kind == "choice" ? AnswerKind::choice : AnswerKind::numeric;

  if (*validate) return cmd_validate(paths, out, err);
  if (*analyze) return cmd_analyze(paths, opts, out, err);
  if (*sweep) return cmd_sweep(sweep_path, grid, opts, out, err);
  if (*generate) return cmd_generate(gen, opts, out, err);
  if (*compare) return cmd_compare(baseline_path, candidate_path, opts, out, err);
  return kIoError;
}

}  // namespace gemmas::cli
