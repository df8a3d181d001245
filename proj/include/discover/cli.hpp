#pragma once

// The `discover` command: run | bench | report.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 data error
// (missing or malformed data, schema mismatch), 4 pipeline error (the
// analysis itself failed, including degenerate targets).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "discover/bench.hpp"
#include "discover/config.hpp"
#include "discover/error.hpp"
#include "discover/parallel.hpp"
#include "discover/pipeline.hpp"
#include "discover/report.hpp"

namespace discover {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_config = 2,
  exit_data = 3,
  exit_pipeline = 4,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return exit_config;
    case ErrorKind::data:
    case ErrorKind::schema: return exit_data;
    default: return exit_pipeline;
  }
}

struct CliOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  std::vector<std::string> only;
  std::string out;
  bool quiet = false;
  std::string report_path;
};

namespace detail {

inline void say(const CliOptions& o, const std::string& line) {
  if (!o.quiet) std::cerr << line << "\n";
}

inline int cmd_run(const CliOptions& o, std::ostream& out) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  say(o, "discover: running " + o.config + " (config " + config_hash(c) + ")");
  const auto result = run_pipeline(c);
  const auto report = build_report(result);
  const std::filesystem::path root = o.out.empty() ? std::filesystem::path(c.out) : std::filesystem::path(o.out);
  const auto dir = write_run_directory(result, report, root);
  out << "run directory: " << dir.string() << "\n";
  out << "best model: " << spec_key(report.best_model) << "\n";
  out << "holdout " << to_string(report.primary) << ": " << result.holdout_metrics.at(report.primary) << "\n";
  out << "discoveries: " << report.discoveries.size() << ", hypotheses: " << report.hypotheses.size() << "\n";
  for (const auto& w : report.warnings) say(o, "warning: " + w);
  return exit_ok;
}

inline bool is_suite(const std::string& path) {
  const auto root = parse_toml(read_text(path, ErrorKind::config), path);
  return root.contains("datasets");
}

inline int cmd_bench(const CliOptions& o, std::ostream& out) {
  const std::vector<std::string> files = is_suite(o.config) ? load_suite(o.config) : std::vector{o.config};
  std::vector<BenchmarkConfig> configs;
  for (const auto& f : files) configs.push_back(load_benchmark_config(f));
  if (!o.only.empty()) {
    std::set<std::string> known;
    for (const auto& b : configs) known.insert(b.id);
    for (const auto& id : o.only)
      if (!known.count(id)) fail(ErrorKind::config, "--only: no benchmark named '" + id + "'");
    std::erase_if(configs, [&](const BenchmarkConfig& b) {
      return std::find(o.only.begin(), o.only.end(), b.id) == o.only.end();
    });
  }

  BenchOptions options;
  options.seed = o.seed;
  if (!o.out.empty()) options.out = o.out;
  std::vector<ComparisonRow> rows;
  std::vector<std::pair<std::string, std::string>> notes;
  for (const auto& b : configs) {
    say(o, "discover: benchmark " + b.id + " (" + std::to_string(b.targets.size()) + " target(s))");
    auto part = run_benchmark(b, options);
    for (const auto& r : part) {
      if (r.status == RowStatus::ok)
        say(o, "  " + r.target + ": " + std::string(to_string(r.metric)) + " = " + detail::num(r.ours, "%.4f"));
      else
        say(o, "  " + r.target + ": " + std::string(to_string(r.status)) + " (" + r.reason + ")");
    }
    rows.insert(rows.end(), part.begin(), part.end());
    if (!b.note.empty()) notes.emplace_back(b.id, b.note);
  }
  const auto means = aggregate(rows);
  const auto md = comparison_markdown(rows, means, notes);
  std::filesystem::create_directories(options.out);
  write_text(std::filesystem::path(options.out) / "comparison.csv", comparison_csv(rows));
  write_text(std::filesystem::path(options.out) / "comparison.md", md);
  out << md;
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.status == RowStatus::failed; });
  return failed ? exit_pipeline : exit_ok;
}

inline int cmd_report(const CliOptions& o, std::ostream& out) {
  std::filesystem::path path = o.report_path;
  if (std::filesystem::is_directory(path)) path /= "report.json";
  if (!std::filesystem::exists(path)) fail(ErrorKind::data, "no report at '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text(path.string(), ErrorKind::data));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, path.string() + ": " + e.what());
  }
  RunReport report;
  try {
    report = report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, path.string() + ": not a run report (" + e.what() + ")");
  }
  if (config_hash(report.config) != report.config_hash)
    fail(ErrorKind::data, path.string() + ": config hash does not match the embedded config");
  const auto md = render_markdown(report);
  if (o.out.empty()) out << md;
  else write_text(o.out, md);
  return exit_ok;
}

}  // namespace detail

// Parses argv and runs one subcommand. Errors are reported on stderr and
// mapped to exit codes; nothing is thrown.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout) {
  CLI::App app{"Automated tabular discovery: model search, pattern mining and evidence reports"};
  app.require_subcommand(1);
  CliOptions o;

  auto* run = app.add_subcommand("run", "Run the pipeline for one config and write a run directory");
  run->add_option("--config", o.config, "Run config (TOML)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", o.seed, "Override the config's seed");
  run->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  run->add_option("--out", o.out, "Output root (default: the config's `out`)");
  run->add_flag("--quiet", o.quiet, "Only print the result summary");

  auto* bench = app.add_subcommand("bench", "Run benchmarks and compare with the published values");
  bench->add_option("--config", o.config, "Suite or single benchmark config (TOML)")->required()->check(CLI::ExistingFile);
  bench->add_option("--only", o.only, "Benchmark ids to run")->delimiter(',');
  bench->add_option("--seed", o.seed, "Override every benchmark's seed");
  bench->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  bench->add_option("--out", o.out, "Output directory (default: runs/bench)");
  bench->add_flag("--quiet", o.quiet, "Only print the comparison table");

  auto* report = app.add_subcommand("report", "Re-render report.md from a run directory's report.json");
  report->add_option("run", o.report_path, "Run directory or report.json")->required();
  report->add_option("--out", o.out, "Write the Markdown here instead of standard output");
  report->add_flag("--quiet", o.quiet, "Accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  const std::size_t previous_jobs = worker_limit();
  worker_limit() = o.jobs;
  int code = exit_ok;
  try {
    if (*run) code = detail::cmd_run(o, out);
    else if (*bench) code = detail::cmd_bench(o, out);
    else code = detail::cmd_report(o, out);
  } catch (const Error& e) {
    std::cerr << "discover: error: " << e.what() << "\n";
    code = exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "discover: error: " << e.what() << "\n";
    code = exit_pipeline;
  }
  worker_limit() = previous_jobs;
  return code;
}

}  // namespace discover
