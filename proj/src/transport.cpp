#include "avshap/transport.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "avshap/error.hpp"

extern char** environ;

namespace avshap {
namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

FdLineChannel::~FdLineChannel() { close_all(); }

void FdLineChannel::reset(int read_fd, int write_fd, bool socket) {
  close_all();
  read_fd_ = read_fd;
  write_fd_ = write_fd;
  socket_ = socket;
  buffer_.clear();
}

void FdLineChannel::close_all() {
  close_write();
  if (read_fd_ >= 0) ::close(read_fd_);
  read_fd_ = -1;
}

void FdLineChannel::close_write() {
  if (write_fd_ < 0) return;
  if (socket_) {
    ::shutdown(write_fd_, SHUT_WR);
    // read_fd_ and write_fd_ are the same socket; closed with read_fd_.
  } else {
    ::close(write_fd_);
  }
  write_fd_ = -1;
}

void FdLineChannel::send_line(std::string_view line, const std::string& peer) {
  if (write_fd_ < 0) throw BridgeError("write side to " + peer + " is closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                              : ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BridgeError("write to " + peer + " failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdLineChannel::read_line(std::chrono::milliseconds timeout,
                                                    const std::string& peer) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BridgeError("poll on " + peer + " failed: " + errno_text());
    }
    if (rc == 0) return std::nullopt;
    char buf[65536];
    const ssize_t n = ::read(read_fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw BridgeError("read from " + peer + " failed: " + errno_text());
    }
    if (n == 0) throw BridgeError(peer + " closed the connection");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

ChildProcessTransport::ChildProcessTransport(std::string command, std::vector<std::string> args)
    : command_(std::move(command)), args_(std::move(args)) {
  ignore_sigpipe();
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw BridgeError("pipe failed: " + errno_text());
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BridgeError("pipe failed: " + errno_text());
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::vector<char*> argv;
  argv.push_back(command_.data());
  for (auto& a : args_) argv.push_back(a.data());
  argv.push_back(nullptr);

  const int rc = ::posix_spawnp(&pid_, command_.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    pid_ = -1;
    throw BridgeError("cannot spawn adapter '" + command_ + "': " + std::strerror(rc));
  }
  channel_.reset(from_child[0], to_child[1], false);
}

ChildProcessTransport::~ChildProcessTransport() {
  channel_.close_write();
  if (pid_ <= 0) return;
  // Give the adapter a moment to exit on end of input, then kill it.
  for (int i = 0; i < 50; ++i) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_ || r < 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  int status = 0;
  ::waitpid(pid_, &status, 0);
}

std::string ChildProcessTransport::describe() const {
  std::string s = "adapter process '" + command_;
  for (const auto& a : args_) s += " " + a;
  return s + "'";
}

TcpTransport::TcpTransport(std::string host, std::uint16_t port,
                           std::chrono::milliseconds connect_timeout)
    : host_(std::move(host)), port_(port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port_);
  if (const int rc = ::getaddrinfo(host_.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
    throw BridgeError("cannot resolve " + describe() + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text();
      continue;
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(connect_timeout.count()));
      if (rc == 0) {
        last_error = "connect timed out";
        rc = -1;
      } else if (rc > 0) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
          last_error = std::strerror(err);
          rc = -1;
        } else {
          rc = 0;
        }
      } else {
        last_error = errno_text();
      }
    } else if (rc != 0) {
      last_error = errno_text();
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      break;
    }
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BridgeError("cannot connect to " + describe() + ": " + last_error);
  channel_.reset(fd, fd, true);
}

std::string TcpTransport::describe() const {
  return "tcp endpoint " + host_ + ":" + std::to_string(port_);
}

}  // namespace avshap
