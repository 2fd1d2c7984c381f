#pragma once

#include <stdexcept>
#include <string>

namespace vsgmn {

// Root of the library's error hierarchy. Everything we throw on purpose
// derives from this, so callers can catch one type at the boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor shapes disagree (matmul inner dimensions, elementwise mismatch, ...).
// Messages always name both shapes.
class DimensionError : public Error {
  using Error::Error;
};

// A user-supplied configuration value is out of range or unknown.
class ConfigError : public Error {
  using Error::Error;
};

// A call contract between modules was violated (wrong tape, non-scalar
// backward root, label outside the candidate pool, ...). These indicate
// bugs in calling code, not bad user input.
class ContractError : public Error {
  using Error::Error;
};

// A row has no admissible entries: fully masked softmax row or a graph node
// with an empty neighborhood.
class DegenerateRowError : public Error {
  using Error::Error;
};

// A dataset directory is missing a required file or a file cannot be opened.
class IngestionError : public Error {
  using Error::Error;
};

// Dataset contents violate a structural invariant; the message lists the
// offending rows or class ids.
class ValidationError : public Error {
  using Error::Error;
};

// Malformed numeric text. The message carries file and line number.
class ParseError : public Error {
  using Error::Error;
};

// A structurally valid dataset that cannot be trained on (e.g. a seen class
// with no training instances).
class DatasetError : public Error {
  using Error::Error;
};

// A loss term became non-finite during training; the message names the term.
class DivergenceError : public Error {
  using Error::Error;
};

}  // namespace vsgmn
