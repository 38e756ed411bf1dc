#pragma once

#include <stdexcept>
#include <string>

namespace iupm {

// Input that violates the assay data model (bad counts, misaligned DVLs, ...).
class InvalidAssay : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed bytes handed to one of the parsers.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fisher/observed information that cannot be inverted reliably.
class SingularInformation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The model cannot be fit to the data as given (e.g. a single dilution level
// for the negative binomial model).
class NotIdentifiable : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace iupm
