#pragma once

#include <CLI11.hpp>

#include <functional>
#include <string>

namespace rebalance::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kInput = 2,
    kMethod = 3,
    kPartialSweep = 4,
};

using Handler = std::function<int()>;

/// Registers every subcommand on `app`. The handler for the selected
/// subcommand is stored in `selected` during parsing.
void register_commands(CLI::App& app, Handler& selected);

}  // namespace rebalance::cli
