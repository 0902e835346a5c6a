#pragma once

// Line-oriented byte transports for the scorer bridge: a spawned child
// process talking over its standard streams, or a TCP connection.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <sys/types.h>

namespace avshap {

class LineTransport {
 public:
  virtual ~LineTransport() = default;

  // Writes `line` followed by '\n'. Throws BridgeError on failure.
  virtual void send_line(std::string_view line) = 0;
  // Next line without its terminator, or nullopt if nothing complete arrived
  // within `timeout`. Throws BridgeError when the peer has closed.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

// Buffered reads and whole-buffer writes on one pair of descriptors.
class FdLineChannel {
 public:
  FdLineChannel() = default;
  FdLineChannel(const FdLineChannel&) = delete;
  FdLineChannel& operator=(const FdLineChannel&) = delete;
  ~FdLineChannel();

  void send_line(std::string_view line, const std::string& peer);
  std::optional<std::string> read_line(std::chrono::milliseconds timeout, const std::string& peer);
  // Takes ownership of the descriptors; for sockets both are the same fd.
  void reset(int read_fd, int write_fd, bool socket);
  void close_write();

 private:
  void close_all();

  int read_fd_ = -1;
  int write_fd_ = -1;
  bool socket_ = false;
  std::string buffer_;
};

class ChildProcessTransport final : public LineTransport {
 public:
  ChildProcessTransport(std::string command, std::vector<std::string> args);
  ~ChildProcessTransport() override;

  void send_line(std::string_view line) override { channel_.send_line(line, describe()); }
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    return channel_.read_line(timeout, describe());
  }
  std::string describe() const override;
  pid_t pid() const { return pid_; }

 private:
  std::string command_;
  std::vector<std::string> args_;
  pid_t pid_ = -1;
  FdLineChannel channel_;
};

class TcpTransport final : public LineTransport {
 public:
  TcpTransport(std::string host, std::uint16_t port, std::chrono::milliseconds connect_timeout);

  void send_line(std::string_view line) override { channel_.send_line(line, describe()); }
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    return channel_.read_line(timeout, describe());
  }
  std::string describe() const override;

 private:
  std::string host_;
  std::uint16_t port_;
  FdLineChannel channel_;
};

}  // namespace avshap
