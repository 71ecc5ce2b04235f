#pragma once

#include <string>
#include <vector>

namespace cbench {

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

// fork/execvp with stdout captured; no shell involved.
CommandResult run_command(const std::vector<std::string>& argv);

}  // namespace cbench
