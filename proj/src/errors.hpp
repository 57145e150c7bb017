#pragma once
#include <stdexcept>
#include <string>

namespace altlab {

// Error taxonomy shared across the library. Internal code throws; the C API
// boundary maps these onto ALTLAB_ERR_* codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace altlab
