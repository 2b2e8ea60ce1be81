#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "handjog/error.hpp"
#include "handjog/messages.hpp"
#include "handjog/ur5.hpp"

namespace handjog::wire {

inline constexpr int kProtocolVersion = 1;

/// Protocol-level rejection; `code` is sent back to the client.
class WireError : public ValidationError {
public:
    WireError(std::string code, const std::string& detail) : ValidationError(detail), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct Hello {
    int proto = kProtocolVersion;
};

struct FrameIn {
    LandmarkFrame frame;
};

struct GestureHold {
    int label = 0;
    std::int64_t t = 0;
};

using Inbound = std::variant<Hello, FrameIn, GestureHold>;

/// Parses one client line. Error codes: bad_json, bad_message, bad_frame,
/// bad_gesture, bad_hello.
Inbound parse_inbound(std::string_view line);

std::string encode_server_hello(const DHTable& dh);
std::string encode_client_hello(int proto = kProtocolVersion);
std::string encode_error(std::string_view code, std::string_view detail);

std::string encode(const GestureMsg& m);
std::string encode(const JogCommand& cmd);
std::string encode(const StateMsg& m);
std::string encode(const SafetyMsg& m);

std::string encode_frame(const LandmarkFrame& frame);
std::string encode_gesture_hold(int label, std::int64_t t);

/// Wire line for an outbound bus message; nullopt for inbound-only topics.
std::optional<std::string> encode_outbound(const Envelope& env);

StateMsg make_state_msg(const SimState& s, std::int64_t t_ms, std::uint64_t jog_seq);

}  // namespace handjog::wire
