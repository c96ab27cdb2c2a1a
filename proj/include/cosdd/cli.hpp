#pragma once

namespace cosdd {

// Exit codes: 0 success, 1 runtime failure, 2 bad command line.
int run_cli(int argc, char** argv);

}  // namespace cosdd
