#pragma once

namespace lexnorm {

// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 runtime failure.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitRuntime = 3 };

int run_cli(int argc, char** argv);

}  // namespace lexnorm
