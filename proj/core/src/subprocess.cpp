#include "cbench/subprocess.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cbench/error.hpp"

namespace cbench {

CommandResult run_command(const std::vector<std::string>& argv) {
  require(!argv.empty(), "DomainError", "run_command needs a program name");

  int fds[2];
  require(pipe(fds) == 0, "IoError", "pipe() failed");

  const pid_t pid = fork();
  require(pid >= 0, "IoError", "fork() failed");

  if (pid == 0) {
    // Child: stdout to the pipe, argv to execvp.
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }

  close(fds[1]);
  CommandResult result;
  char buf[4096];
  for (;;) {
    const ssize_t got = read(fds[0], buf, sizeof(buf));
    if (got > 0) {
      result.stdout_text.append(buf, static_cast<std::size_t>(got));
    } else if (got == 0) {
      break;
    } else if (errno != EINTR) {
      break;
    }
  }
  close(fds[0]);

  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = -1;
  }
  return result;
}

}  // namespace cbench
