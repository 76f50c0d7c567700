#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <string>
#include <system_error>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pacverify/error.hpp"
#include "pacverify/model_runtime.hpp"

extern char** environ;

namespace pacverify {

struct ProcessOracle::Channel {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;  // bytes read but not yet consumed

  ~Channel() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid > 0) {
      int status = 0;
      ::waitpid(pid, &status, 0);
    }
  }

  void write_all(const std::string& data) {
    std::size_t done = 0;
    while (done < data.size()) {
      ssize_t n = ::write(to_child, data.data() + done, data.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw OracleError(std::string("write to oracle failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      auto pos = buffer.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer.substr(0, pos);
        buffer.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[65536];
      ssize_t n = ::read(from_child, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw OracleError(std::string("read from oracle failed: ") + std::strerror(errno));
      }
      if (n == 0) throw OracleError("oracle closed its output unexpectedly");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

namespace {

// Parses exactly `count` whitespace-separated finite doubles.
bool parse_row(const std::string& line, int count, double* out) {
  const char* p = line.data();
  const char* end = p + line.size();
  for (int i = 0; i < count; ++i) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    if (p == end) return false;
    if (*p == '+') ++p;
    auto [next, ec] = std::from_chars(p, end, out[i]);
    if (ec != std::errc() || !std::isfinite(out[i])) return false;
    p = next;
    if (p < end && *p != ' ' && *p != '\t') return false;
  }
  while (p < end && (*p == ' ' || *p == '\t')) ++p;
  return p == end;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::unique_ptr<ProcessOracle> ProcessOracle::spawn(const std::string& command) {
  // A dead child must surface as an OracleError, not a SIGPIPE.
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw OracleError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw OracleError("pipe() failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::string cmd = command;
  char sh[] = "/bin/sh";
  char dash_c[] = "-c";
  char* argv[] = {sh, dash_c, cmd.data(), nullptr};
  pid_t pid = -1;
  int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw OracleError("failed to spawn oracle command: " + command);
  }

  auto channel = std::make_unique<Channel>();
  channel->pid = pid;
  channel->to_child = in_pipe[1];
  channel->from_child = out_pipe[0];

  channel->write_all("DIM\n");
  std::string reply = channel->read_line();
  double dims[2];
  if (!parse_row(reply, 2, dims) || dims[0] < 1 || dims[1] < 1 ||
      dims[0] != static_cast<int>(dims[0]) || dims[1] != static_cast<int>(dims[1])) {
    throw OracleError("malformed DIM reply: '" + reply + "'");
  }
  return std::unique_ptr<ProcessOracle>(new ProcessOracle(
      std::move(channel), static_cast<int>(dims[0]), static_cast<int>(dims[1])));
}

ProcessOracle::ProcessOracle(std::unique_ptr<Channel> channel, int m, int n)
    : Oracle(m, n), channel_(std::move(channel)) {}

ProcessOracle::~ProcessOracle() = default;

Eigen::MatrixXd ProcessOracle::evaluate_rows(const Eigen::MatrixXd& points) {
  std::lock_guard<std::mutex> lock(io_mutex_);
  const Eigen::Index k = points.rows();
  std::string request = "EVAL " + std::to_string(k) + "\n";
  request.reserve(static_cast<std::size_t>(k * points.cols() * 24));
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (c > 0) request.push_back(' ');
      append_double(request, points(r, c));
    }
    request.push_back('\n');
  }
  channel_->write_all(request);

  const int n = output_dim();
  Eigen::MatrixXd out(k, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < k; ++r) {
    std::string line = channel_->read_line();
    if (!parse_row(line, n, row.data())) {
      throw OracleError("malformed EVAL reply line " + std::to_string(r) + ": '" +
                        line.substr(0, 80) + "'");
    }
    for (int c = 0; c < n; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  if (!channel_->buffer.empty()) throw OracleError("oracle replied with more lines than requested");
  return out;
}

}  // namespace pacverify
