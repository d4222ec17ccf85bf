#pragma once

#include <string>
#include <vector>

namespace warpconv {

// Command-line entry point. Exit code 0 on pass/success, 1 on check failure,
// 2 on usage or format errors.
int cli_dispatch(int argc, const char* const* argv);
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace warpconv
