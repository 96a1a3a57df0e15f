#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace graphflow {

// Entry point of the `graphflow` tool. Subcommands: gen, train, retrieve,
// eval, oracle, gradcheck, baseline-dense. Returns the process exit code;
// failures print {"error": {...}} to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace graphflow
