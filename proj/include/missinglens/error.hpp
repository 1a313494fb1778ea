#pragma once

#include <stdexcept>
#include <string>

namespace missinglens {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (CSV, model JSON, edit scripts).
class ParseError : public Error {
public:
  using Error::Error;
};

// Structural problems: duplicate headers, unknown columns, layout mismatches.
class SchemaError : public Error {
public:
  using Error::Error;
};

// Violated preconditions or out-of-domain arguments.
class ValueError : public Error {
public:
  using Error::Error;
};

// Requested diagnostic has no subject (e.g. MCAR test on a feature without a
// missing bin). Surfaced as a distinct CLI exit code.
class NothingToTest : public Error {
public:
  using Error::Error;
};

}  // namespace missinglens
