// SPDX-License-Identifier: Apache-2.0
//
// Error categories shared by every module. Each error carries a kind so the
// command-line front end can map it to a stable exit code.

#ifndef IGPOSE_ERROR_HPP_
#define IGPOSE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace igpose {

enum class ErrorKind {
  parse,       // malformed input text or binary file
  validation,  // domain invariant violated (roles, annotations, ranges)
  dimension,   // shape mismatch between tensors or files
  data,        // non-finite or out-of-range values in input data
  numeric,     // non-finite intermediate during computation
  empty_set,   // empty seed/pool/selection set
  config,      // invalid configuration value
  io,          // file system failure
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

} // namespace igpose

#endif
