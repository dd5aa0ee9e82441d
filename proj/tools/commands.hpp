#pragma once

#include <string>
#include <vector>

#include "run_config.hpp"

namespace framerepeat::cli {

inline const std::vector<std::string> kCommands = {"synth", "scan", "train", "plan", "eval"};

// Declares every setting `command` reads, with its default.
void declare_settings(const std::string& command, RunConfig& config);

// Runs the command; artifacts and run.json go under io.out.
void run_command(const std::string& command, const RunConfig& config,
                 const std::vector<std::string>& argv);

}  // namespace framerepeat::cli
