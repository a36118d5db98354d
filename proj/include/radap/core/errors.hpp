#pragma once

#include <stdexcept>
#include <string>

namespace radap {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct CatalogError : Error {
  using Error::Error;
};
struct DependencyError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
// Thrown when a gradient is requested through a non-differentiable defense
// stage and no surrogate was configured.
struct SurrogateRequiredError : Error {
  using Error::Error;
};

}  // namespace radap
