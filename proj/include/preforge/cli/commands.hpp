#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace preforge::cli {

// Exit codes: 0 ok, 1 not found or failed check, 2 usage, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace preforge::cli
