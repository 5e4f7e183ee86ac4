#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace ts {

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides mc.seed
  std::optional<std::string> out;     // overrides output.dir
  bool quick = false;
  int jobs = 1;
};

inline constexpr const char* kCommands[] = {"solve", "rates", "hjb-check", "couple", "verify"};

/// Runs one subcommand, writing artifacts into the output directory.
/// Returns 0 when every in-run contract passes, 1 when one fails and 2 on
/// errors (a failure.json record is written when the directory is usable).
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log);

}  // namespace ts
