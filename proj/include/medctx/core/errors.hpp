#pragma once

#include <stdexcept>
#include <string>

namespace medctx {

// Error taxonomy shared by every module. Each maps to one failure class so
// callers (notably the CLI) can translate them to exit codes.

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace medctx
