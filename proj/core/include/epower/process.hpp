#pragma once

#include <string>
#include <vector>

#include <sys/types.h>

namespace epower::process {

/// Runs `command` through /bin/sh and waits. Returns the exit status, or
/// 128+signal when the child was killed. Throws Error{backend} if the
/// shell cannot be spawned.
int run_shell(const std::string& command);

/// A shell command whose stdout is read incrementally without blocking.
/// The child is terminated when the object is destroyed.
class StreamingProcess {
 public:
  explicit StreamingProcess(const std::string& command);
  ~StreamingProcess();

  StreamingProcess(const StreamingProcess&) = delete;
  StreamingProcess& operator=(const StreamingProcess&) = delete;

  /// Complete lines that arrived since the last call.
  std::vector<std::string> read_lines();

  bool running();
  void terminate();

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string pending_;
};

}  // namespace epower::process
