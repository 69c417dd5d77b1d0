// SPDX-License-Identifier: Apache-2.0

#include "igpose/cli.hpp"

int main(int argc, char** argv) { return igpose::cli::run(argc, argv); }
