#pragma once

#include <ostream>

namespace qdf {

/// Entry point behind the `qdf` executable. Subcommands: gen-data, render,
/// train, eval, ablate, grad-check.
///
/// Returns 0 on success (and for --help), 1 for usage errors, 2 for runtime
/// failures including a failed gradient check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qdf
