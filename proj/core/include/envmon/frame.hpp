#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace envmon::frame {

inline constexpr std::uint8_t kStartByte = 0x7E;
inline constexpr std::size_t kMaxPayload = 255;

// 0x7E | length | payload | crc8(length ++ payload). Length-prefixed, so no
// byte stuffing is needed.
std::vector<std::uint8_t> encode(std::span<const std::uint8_t> payload);

enum class DecodeStatus { Ok, NeedMore, BadStart, BadCrc };

struct DecodeResult {
    DecodeStatus status = DecodeStatus::NeedMore;
    std::vector<std::uint8_t> payload;
    std::size_t consumed = 0;
};

// Decode one frame from the front of the buffer. On BadStart/BadCrc the
// caller should drop `consumed` bytes and count the event.
DecodeResult decode(std::span<const std::uint8_t> buffer);

// Incremental decoder for a serial byte stream; bad frames are dropped and
// counted, good payloads are returned in order.
class StreamDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    std::optional<std::vector<std::uint8_t>> next();
    std::uint64_t dropped_frames() const { return dropped_; }

private:
    std::vector<std::uint8_t> buf_;
    std::uint64_t dropped_ = 0;
};

}  // namespace envmon::frame
