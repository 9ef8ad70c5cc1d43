#pragma once

// Subcommand implementations shared by the command-line tool and tests.

#include <exception>
#include <string>
#include <vector>

#include "sqz/config.hpp"

namespace sqz::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  PipelineConfig config;
  std::string out_dir = "out";
  std::vector<std::string> inputs;
};

struct RunResult {
  std::vector<std::string> outputs;  // relative to out_dir, sorted
};

RunResult cmd_kerr(const RunOptions& opts);
RunResult cmd_twa(const RunOptions& opts);
RunResult cmd_synth(const RunOptions& opts);
RunResult cmd_filter(const RunOptions& opts);
RunResult cmd_reconstruct(const RunOptions& opts);
RunResult cmd_fit(const RunOptions& opts);
RunResult cmd_corr(const RunOptions& opts);
RunResult cmd_rin(const RunOptions& opts);
RunResult cmd_pipeline(const RunOptions& opts);

const std::vector<std::string>& command_names();
RunResult run_command(const std::string& name, const RunOptions& opts);

/// 2 config, 3 data, 4 numerical, 5 I/O, 6 internal defect, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace sqz::cli
