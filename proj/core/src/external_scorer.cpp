#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "launderscope/scorer.hpp"

namespace launderscope {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
  const auto left =
      std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

}  // namespace

ExternalScorer::ExternalScorer(ExternalScorerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.command.empty() || cfg_.command.front().empty()) {
    throw ScorerLaunchError("empty command");
  }
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2], status_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw ScorerLaunchError(std::strerror(errno));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ScorerLaunchError(std::strerror(errno));
  }
  if (::pipe2(status_pipe, O_CLOEXEC) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw ScorerLaunchError(std::strerror(errno));
  }

  std::vector<char*> argv;
  for (auto& a : cfg_.command) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], status_pipe[0],
                   status_pipe[1]}) {
      ::close(fd);
    }
    throw ScorerLaunchError(std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(status_pipe[1], &err, sizeof err);
    ::_exit(127);
  }
  pid_ = pid;
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(status_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  // The status pipe closes on a successful exec; otherwise it carries errno.
  int err = 0;
  ssize_t got;
  do {
    got = ::read(status_pipe[0], &err, sizeof err);
  } while (got < 0 && errno == EINTR);
  ::close(status_pipe[0]);
  if (got == static_cast<ssize_t>(sizeof err)) {
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
    close_fd(to_child_);
    close_fd(from_child_);
    throw ScorerLaunchError("cannot execute \"" + cfg_.command.front() +
                            "\": " + std::strerror(err));
  }

  std::string hello;
  try {
    hello = read_line("handshake");
  } catch (...) {
    shutdown();
    throw;
  }
  if (hello != kScorerHello) {
    shutdown();
    throw ScorerHandshakeError("expected \"" + std::string(kScorerHello) +
                               "\", got \"" + hello + "\"");
  }
}

ExternalScorer::~ExternalScorer() { shutdown(); }

int ExternalScorer::shutdown() {
  close_fd(to_child_);
  int status = -1;
  if (pid_ > 0) {
    const auto deadline = Clock::now() + std::chrono::seconds(1);
    bool reaped = false;
    while (Clock::now() < deadline) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        reaped = true;
        break;
      }
      if (r < 0) break;
      ::usleep(2000);
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      status = -1;
    } else {
      status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    pid_ = -1;
  }
  close_fd(from_child_);
  return status;
}

std::string ExternalScorer::read_line(const std::string& phase) {
  const auto deadline = Clock::now() + cfg_.timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (from_child_ < 0) throw ScorerError(phase, "scorer is not running");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(phase, std::strerror(errno));
    }
    if (rc == 0) throw ScorerTimeoutError(phase, cfg_.timeout);
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ScorerError(phase, std::strerror(errno));
    }
    if (n == 0) {
      if (phase == "handshake") {
        throw ScorerHandshakeError("scorer exited before sending its greeting");
      }
      throw ScorerError(phase, "scorer closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void ExternalScorer::write_all(const std::uint8_t* data, std::size_t n) {
  const auto deadline = Clock::now() + cfg_.timeout;
  while (n > 0) {
    pollfd pfd{to_child_, POLLOUT, 0};
    const int rc = ::poll(&pfd, 1, remaining_ms(deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ScorerError("request", std::strerror(errno));
    }
    if (rc == 0) throw ScorerTimeoutError("request", cfg_.timeout);
    const ssize_t w = ::write(to_child_, data, n);
    if (w < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ScorerError("request", std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

double ExternalScorer::do_score(const Patch& patch) {
  if (to_child_ < 0) throw ScorerError("request", "scorer is not running");
  const auto& px = patch.pixels;
  const std::string header = "PATCH " + std::to_string(px.width()) + " " +
                             std::to_string(px.height()) + " " +
                             std::to_string(px.channels()) + "\n";
  write_all(reinterpret_cast<const std::uint8_t*>(header.data()), header.size());
  const auto bytes = px.to_bytes();
  write_all(bytes.data(), bytes.size());

  const std::string line = read_line("response");
  const char* first = line.data();
  const char* last = first + line.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  double value = 0.0;
  const auto [end, ec] = std::from_chars(first, last, value);
  if (first == last || ec != std::errc() || end != last) {
    throw ScorerParseError(line, "not a decimal number");
  }
  if (!std::isfinite(value)) throw ScorerParseError(line, "score is not finite");
  return value;
}

double external_score(const ExternalScorerConfig& cfg, const Patch& patch) {
  ExternalScorer scorer(cfg);
  return scorer.score(patch);
}

}  // namespace launderscope
