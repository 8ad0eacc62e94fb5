#include <vector>

#include "doctest.h"
#include "envmon/frame.hpp"
#include "envmon/rng.hpp"

using namespace envmon;
using namespace envmon::frame;

TEST_CASE("frames round-trip arbitrary payloads") {
    Rng rng(0xf2a);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint8_t> payload(rng.next_u64() % (kMaxPayload + 1));
        for (auto& b : payload) b = (std::uint8_t)rng.next_u64();
        const auto wire = encode(payload);
        REQUIRE(wire.size() == payload.size() + 3);
        CHECK(wire[0] == kStartByte);
        const auto result = decode(wire);
        REQUIRE(result.status == DecodeStatus::Ok);
        CHECK(result.payload == payload);
        CHECK(result.consumed == wire.size());
    }
}

TEST_CASE("every single-bit flip is detected") {
    const std::vector<std::uint8_t> payload = {0x01, 0x02, 0xfe, 0x10, 0x80};
    const auto wire = encode(payload);
    for (std::size_t byte = 0; byte < wire.size(); ++byte) {
        for (int bit = 0; bit < 8; ++bit) {
            auto damaged = wire;
            damaged[byte] ^= (std::uint8_t)(1u << bit);
            const auto result = decode(damaged);
            // A flip either breaks the start byte, the CRC, or (for the
            // length byte) leaves the decoder waiting for more input.
            const bool clean_decode = result.status == DecodeStatus::Ok &&
                                      result.payload == payload;
            CHECK_FALSE(clean_decode);
        }
    }
}

TEST_CASE("decoder reports partial input") {
    const auto wire = encode(std::vector<std::uint8_t>{1, 2, 3});
    for (std::size_t n = 0; n < wire.size(); ++n) {
        const auto result =
            decode(std::span<const std::uint8_t>(wire.data(), n));
        CHECK(result.status == DecodeStatus::NeedMore);
    }
}

TEST_CASE("stream decoder resynchronizes after garbage and counts bad CRCs") {
    StreamDecoder dec;
    const std::vector<std::uint8_t> a = {0xaa, 0xbb};
    const std::vector<std::uint8_t> b = {0x01};
    auto wire_a = encode(a);
    wire_a[3] ^= 0x40;  // corrupt payload -> CRC failure
    const auto wire_b = encode(b);

    std::vector<std::uint8_t> stream = {0x00, 0x13};  // line noise
    stream.insert(stream.end(), wire_a.begin(), wire_a.end());
    stream.insert(stream.end(), wire_b.begin(), wire_b.end());

    dec.feed(stream);
    const auto first = dec.next();
    REQUIRE(first.has_value());
    CHECK(*first == b);
    CHECK_FALSE(dec.next().has_value());
    CHECK(dec.dropped_frames() == 1);  // noise resync is not a dropped frame
}

TEST_CASE("stream decoder handles byte-at-a-time delivery") {
    StreamDecoder dec;
    const std::vector<std::uint8_t> payload = {9, 8, 7, 6};
    const auto wire = encode(payload);
    for (const auto byte : wire) {
        dec.feed(std::span<const std::uint8_t>(&byte, 1));
    }
    const auto got = dec.next();
    REQUIRE(got.has_value());
    CHECK(*got == payload);
}
