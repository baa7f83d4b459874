#include "valmon/external_model.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>

namespace valmon {

const char *to_string(ModelProtocolError::Kind kind) {
  switch (kind) {
    case ModelProtocolError::Kind::exit_code: return "exit_code";
    case ModelProtocolError::Kind::parse: return "parse";
    case ModelProtocolError::Kind::count: return "count";
    case ModelProtocolError::Kind::timeout: return "timeout";
    case ModelProtocolError::Kind::spawn: return "spawn";
  }
  return "spawn";
}

namespace {

using Kind = ModelProtocolError::Kind;

// Writes to a pipe whose reader exited must surface as EPIPE, not a signal.
void ignore_sigpipe() {
  static const bool done = [] {
    struct sigaction current {};
    sigaction(SIGPIPE, nullptr, &current);
    if (current.sa_handler == SIG_DFL) {
      struct sigaction ignore {};
      ignore.sa_handler = SIG_IGN;
      sigemptyset(&ignore.sa_mask);
      sigaction(SIGPIPE, &ignore, nullptr);
    }
    return true;
  }();
  (void)done;
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd &) = delete;
  Fd &operator=(const Fd &) = delete;
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<double> parse_predictions(const std::string &out, std::size_t expected) {
  std::vector<double> values;
  std::size_t start = 0, line = 1;
  while (start < out.size()) {
    auto stop = out.find('\n', start);
    if (stop == std::string::npos) stop = out.size();
    const auto token = trim(std::string_view(out).substr(start, stop - start));
    double v = 0.0;
    const auto *end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (token.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
      throw ModelProtocolError(Kind::parse, "model output line " + std::to_string(line) + " is not a decimal number: '" +
                                                token + "'");
    values.push_back(v);
    start = stop + 1;
    ++line;
  }
  if (values.size() != expected)
    throw ModelProtocolError(Kind::count, "model returned " + std::to_string(values.size()) + " predictions for " +
                                              std::to_string(expected) + " rows");
  return values;
}

}  // namespace

std::vector<double> score_external(const ExternalModelSpec &spec, const FeatureFrame &frame) {
  if (spec.command.empty()) throw ModelProtocolError(Kind::spawn, "empty model command");
  ignore_sigpipe();
  const std::string input = to_csv(frame);

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw ModelProtocolError(Kind::spawn, std::strerror(errno));
  Fd in_read(in_pipe[0]), in_write(in_pipe[1]);
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw ModelProtocolError(Kind::spawn, std::strerror(errno));
  Fd out_read(out_pipe[0]), out_write(out_pipe[1]);

  const pid_t pid = ::fork();
  if (pid < 0) throw ModelProtocolError(Kind::spawn, std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", spec.command.c_str(), static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  in_read.reset();
  out_write.reset();
  ::fcntl(in_write.get(), F_SETFL, O_NONBLOCK);
  ::fcntl(out_read.get(), F_SETFL, O_NONBLOCK);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(spec.timeout_seconds);
  std::string output;
  std::size_t written = 0;
  if (input.empty()) in_write.reset();
  bool timed_out = false;
  char buffer[65536];

  while (out_read.get() >= 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t nfds = 0;
    fds[nfds++] = {out_read.get(), POLLIN, 0};
    if (in_write.get() >= 0) fds[nfds++] = {in_write.get(), POLLOUT, 0};
    const int ready = ::poll(fds, nfds, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (nfds == 2 && fds[1].revents) {
      const auto n = ::write(in_write.get(), input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if ((n < 0 && errno != EAGAIN && errno != EINTR) || written == input.size()) in_write.reset();
    }
    if (fds[0].revents) {
      const auto n = ::read(out_read.get(), buffer, sizeof buffer);
      if (n > 0) {
        output.append(buffer, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        out_read.reset();
      }
    }
  }

  int status = 0;
  if (!timed_out) {
    // stdout is closed; give the process the rest of the budget to exit.
    while (true) {
      const pid_t r = ::waitpid(pid, &status, WNOHANG);
      if (r == pid) break;
      if (r < 0 && errno != EINTR) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        timed_out = true;
        break;
      }
      ::usleep(2000);
    }
  }
  if (timed_out) {
    ::kill(-pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    throw ModelProtocolError(Kind::timeout, "model command exceeded " + format_number(spec.timeout_seconds) + " s");
  }
  if (WIFSIGNALED(status))
    throw ModelProtocolError(Kind::exit_code, "model command killed by signal " + std::to_string(WTERMSIG(status)));
  if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
    throw ModelProtocolError(Kind::exit_code, "model command exited with status " + std::to_string(WEXITSTATUS(status)));
  return parse_predictions(output, frame.n_rows());
}

}  // namespace valmon
