#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scenediff::serve {

/// Subcommands: gen-data, train, eval, synth, edit, verify, ablate, serve.
/// Returns 0 on success, 1 for usage errors and 2 for runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenediff::serve
