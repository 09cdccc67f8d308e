#include "anonet/cli/commands.hpp"

int main(int argc, char** argv) { return anonet::cli::run_cli(argc, argv); }
