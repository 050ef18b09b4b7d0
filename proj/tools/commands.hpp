#pragma once

#include <string>
#include <vector>

namespace heavyhail::cli {

// Returns the process exit code: 0 ok, 1 usage/IO, 2 model assumption, 3 numerical.
int run(int argc, char** argv);

}  // namespace heavyhail::cli
