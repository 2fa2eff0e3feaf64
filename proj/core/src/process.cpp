#include "epower/process.hpp"

#include <array>
#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "epower/error.hpp"

extern char** environ;

namespace epower::process {

namespace {

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

pid_t spawn_shell(const std::string& command, posix_spawn_file_actions_t* actions) {
  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  std::string cmd = command;
  std::array<char*, 4> argv{sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/bin/sh", actions, nullptr, argv.data(), environ);
  if (rc != 0) {
    fail(ErrorKind::backend, "cannot spawn '" + command + "': " + std::strerror(rc));
  }
  return pid;
}

}  // namespace

int run_shell(const std::string& command) {
  const pid_t pid = spawn_shell(command, nullptr);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) fail(ErrorKind::backend, "waitpid failed for '" + command + "'");
  }
  return decode_status(status);
}

StreamingProcess::StreamingProcess(const std::string& command) {
  std::array<int, 2> fds{};
  if (pipe(fds.data()) != 0) fail(ErrorKind::source, "pipe() failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);
  try {
    pid_ = spawn_shell(command, &actions);
  } catch (...) {
    posix_spawn_file_actions_destroy(&actions);
    close(fds[0]);
    close(fds[1]);
    throw;
  }
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  fd_ = fds[0];
  fcntl(fd_, F_SETFL, fcntl(fd_, F_GETFL) | O_NONBLOCK);
}

StreamingProcess::~StreamingProcess() {
  terminate();
}

std::vector<std::string> StreamingProcess::read_lines() {
  std::vector<std::string> out;
  if (fd_ < 0) return out;
  std::array<char, 4096> buf{};
  while (true) {
    const ssize_t n = read(fd_, buf.data(), buf.size());
    if (n > 0) {
      pending_.append(buf.data(), static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    break;  // EAGAIN or EOF
  }
  std::size_t start = 0;
  for (auto pos = pending_.find('\n'); pos != std::string::npos;
       pos = pending_.find('\n', start)) {
    out.emplace_back(pending_.substr(start, pos - start));
    start = pos + 1;
  }
  pending_.erase(0, start);
  return out;
}

bool StreamingProcess::running() {
  if (pid_ < 0) return false;
  int status = 0;
  const pid_t r = waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    pid_ = -1;
    return false;
  }
  return true;
}

void StreamingProcess::terminate() {
  if (pid_ > 0) {
    kill(pid_, SIGTERM);
    int status = 0;
    while (waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
  }
  if (fd_ >= 0) {
    close(fd_);
    fd_ = -1;
  }
}

}  // namespace epower::process
