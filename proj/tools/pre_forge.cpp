#include "preforge/cli/commands.hpp"

int main(int argc, char** argv) { return preforge::cli::run(argc, argv); }
