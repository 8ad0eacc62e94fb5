#include "envmon/frame.hpp"

#include <cassert>

#include "envmon/onewire.hpp"

namespace envmon::frame {

std::vector<std::uint8_t> encode(std::span<const std::uint8_t> payload) {
    assert(payload.size() <= kMaxPayload);
    std::vector<std::uint8_t> out;
    out.reserve(payload.size() + 3);
    out.push_back(kStartByte);
    out.push_back((std::uint8_t)payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
    out.push_back(onewire::crc8(std::span(out.data() + 1, payload.size() + 1)));
    return out;
}

DecodeResult decode(std::span<const std::uint8_t> buffer) {
    DecodeResult r;
    if (buffer.empty()) return r;
    if (buffer[0] != kStartByte) {
        r.status = DecodeStatus::BadStart;
        r.consumed = 1;
        return r;
    }
    if (buffer.size() < 2) return r;
    const std::size_t len = buffer[1];
    if (buffer.size() < len + 3) return r;
    const std::uint8_t want = onewire::crc8(buffer.subspan(1, len + 1));
    r.consumed = len + 3;
    if (want != buffer[len + 2]) {
        r.status = DecodeStatus::BadCrc;
        return r;
    }
    r.status = DecodeStatus::Ok;
    r.payload.assign(buffer.begin() + 2, buffer.begin() + 2 + (long)len);
    return r;
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> StreamDecoder::next() {
    while (!buf_.empty()) {
        DecodeResult r = decode(buf_);
        switch (r.status) {
            case DecodeStatus::NeedMore:
                return std::nullopt;
            case DecodeStatus::BadStart:
                buf_.erase(buf_.begin(), buf_.begin() + (long)r.consumed);
                break;  // resync, not a counted frame drop
            case DecodeStatus::BadCrc:
                buf_.erase(buf_.begin(), buf_.begin() + (long)r.consumed);
                ++dropped_;
                break;
            case DecodeStatus::Ok:
                buf_.erase(buf_.begin(), buf_.begin() + (long)r.consumed);
                return r.payload;
        }
    }
    return std::nullopt;
}

}  // namespace envmon::frame
