#pragma once

#include "r2i/cli/config.hpp"

namespace r2i::cli {

/// Runs the selected stage. Returns 0 on success; any exception is logged
/// with the stage name and mapped to exit status 1. Every stage writes
/// config_snapshot.toml next to its outputs.
int run_pipeline(const RunConfig& config);

/// argv entry point: parse, configure logging, run.
int main_entry(int argc, const char* const* argv);

}  // namespace r2i::cli
