#pragma once

// Command front end: solve, sweep, picone and report.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "plap/config.hpp"

namespace plap::cli {

enum ExitCode : int { kOk = 0, kPropertyFailure = 1, kConfigError = 2, kNotConverged = 3 };

/// Shortest round-trip decimal form; identical across runs and platforms
/// with IEEE doubles.
std::string format_number(double v);

int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, int jobs, std::ostream& log);
int cmd_picone(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
/// Rebuilds sweep.csv and summary.json from out/records.json.
int cmd_report(const std::filesystem::path& out, std::ostream& log);

/// Sweep table and summary derived from a stored records document.
std::string sweep_csv(const nlohmann::json& records_doc);
nlohmann::json sweep_summary(const nlohmann::json& records_doc);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace plap::cli
