#pragma once

namespace rwmcv {

/// Entry point behind the rwmcv binary; exposed so tests can drive the CLI
/// in-process. Exit codes: 0 success, 1 config or solver error, 2 the
/// experiment finished with some failed cells.
int cli_main(int argc, const char* const* argv);

}  // namespace rwmcv
