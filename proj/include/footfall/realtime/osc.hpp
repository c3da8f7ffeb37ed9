#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/udp.hpp>

#include "footfall/error.hpp"

namespace footfall {

inline constexpr std::size_t kOscMessageSize = 24;
using OscMessage = std::array<std::uint8_t, kOscMessageSize>;

// "/footfall" (padded to 12 bytes), ",h" (padded to 4), then the timestamp as
// a big-endian int64.
inline OscMessage encode_osc(std::int64_t timestamp_ms) {
  OscMessage m{};
  constexpr std::string_view address = "/footfall";
  constexpr std::string_view tags = ",h";
  std::copy(address.begin(), address.end(), m.begin());
  std::copy(tags.begin(), tags.end(), m.begin() + 12);
  const auto u = static_cast<std::uint64_t>(timestamp_ms);
  for (int i = 0; i < 8; ++i) m[16 + i] = static_cast<std::uint8_t>(u >> (56 - 8 * i));
  return m;
}

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port"; the host may be empty (meaning any/localhost, by context) or a
// bracketed IPv6 literal.
inline HostPort parse_host_port(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ValidationError("expected host:port, got '" + std::string(text) + "'");
  std::string host(text.substr(0, colon));
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  const std::string_view port_text = text.substr(colon + 1);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(std::string(port_text), &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ValidationError("invalid port in '" + std::string(text) + "'");
  }
  if (port > 65535) throw ValidationError("port out of range in '" + std::string(text) + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

// Fire-and-forget UDP sender for detection messages.
class OscSender {
 public:
  explicit OscSender(const HostPort& dest) : socket_(io_) {
    boost::asio::ip::udp::resolver resolver(io_);
    const std::string host = dest.host.empty() ? "127.0.0.1" : dest.host;
    endpoint_ = *resolver.resolve(boost::asio::ip::udp::v4(), host, std::to_string(dest.port)).begin();
    socket_.open(endpoint_.protocol());
  }

  // Returns false (and counts the failure) instead of throwing.
  bool send(std::int64_t timestamp_ms) {
    const OscMessage m = encode_osc(timestamp_ms);
    boost::system::error_code ec;
    socket_.send_to(boost::asio::buffer(m), endpoint_, 0, ec);
    if (ec) {
      ++failures_;
      return false;
    }
    ++sent_;
    return true;
  }

  std::size_t sent() const { return sent_; }
  std::size_t failures() const { return failures_; }

 private:
  boost::asio::io_context io_;
  boost::asio::ip::udp::socket socket_;
  boost::asio::ip::udp::endpoint endpoint_;
  std::size_t sent_ = 0;
  std::size_t failures_ = 0;
};

}  // namespace footfall
