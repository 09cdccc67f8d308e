#pragma once

#include <stdexcept>
#include <string>

namespace anonet::cli {

/// A referenced input does not exist.
class MissingFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  ok = 0,
  bad_config = 2,
  missing_file = 3,
  shape_mismatch = 4,
  numeric_abort = 5,
  bad_file = 6,
  internal = 70,
};

/// Parses and executes one command line. Diagnostics go to stderr as a
/// single "anonet: <class>: <message>" line.
int run_cli(int argc, const char* const* argv);

}  // namespace anonet::cli
