#pragma once

namespace cbdi {

/// Entry point behind the `cbdi` binary. Exit codes: 0 success, 2 config
/// error, 3 numerical-certification failure, 4 internal-consistency failure.
/// Errors are also printed as a JSON object on the error stream.
int run_cli(int argc, const char* const* argv);

} // namespace cbdi
