// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every subcommand writes its outputs plus a
// resolved config snapshot (config.json) into the output directory.

#ifndef IGPOSE_CLI_HPP_
#define IGPOSE_CLI_HPP_

#include "igpose/error.hpp"

namespace igpose::cli {

int run(int argc, const char* const* argv);

// 0 success, 1 unexpected failure, 2 usage error, 3.. per error kind.
int exit_code(ErrorKind kind);

} // namespace igpose::cli

#endif
