// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cli.hpp
 * @brief  Experiment harness behind the `synctva` executable.
 *
 * Subcommands: synth, train, eval, ablate. Every command writes a run.json
 * manifest next to its outputs holding the resolved configuration, the
 * dataset fingerprint, the list of files written and timings.
 */
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace synctva {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1, // anything not covered below
  kExitUsage = 2,   // bad flags or invalid configuration
  kExitIo = 3,
  kExitNumeric = 4, // non-finite value during training
  kExitData = 5,    // malformed data, dimension or class-count mismatch
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int run_cli(int argc, const char *const *argv);

} // namespace synctva
