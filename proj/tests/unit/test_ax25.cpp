#include "doctest.h"

#include "viper/ax25.hpp"
#include "viper/error.hpp"

#include <random>
#include <string>

using namespace viper;
using namespace viper::ax25;

namespace {

// Bit-at-a-time CRC-16/X.25 shift register, LSB first.
std::uint16_t lfsr_fcs(std::span<const std::uint8_t> bytes)
{
    std::uint16_t reg = 0xFFFF;
    for (std::uint8_t byte : bytes) {
        for (int i = 0; i < 8; ++i) {
            const int in = (byte >> i) & 1;
            const int out = reg & 1;
            reg >>= 1;
            if (in ^ out)
                reg ^= 0x8408;
        }
    }
    return static_cast<std::uint16_t>(reg ^ 0xFFFF);
}

Bytes ascii(std::string_view s) { return Bytes(s.begin(), s.end()); }

Callsign random_callsign(std::mt19937_64& rng)
{
    static const std::string alnum = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    Callsign c;
    const int len = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < len; ++i)
        c.base += alnum[rng() % alnum.size()];
    c.ssid = static_cast<int>(rng() % 16);
    return c;
}

Ax25Frame random_frame(std::mt19937_64& rng)
{
    std::vector<Callsign> path;
    const int hops = static_cast<int>(rng() % 3);
    for (int i = 0; i < hops; ++i)
        path.push_back(random_callsign(rng));
    std::string info(rng() % 200, '\0');
    for (auto& ch : info)
        ch = static_cast<char>(rng() & 0xFF);
    return Ax25Frame::ui(random_callsign(rng), random_callsign(rng), path, info);
}

// Longest run of identical bits equal to 1.
int longest_ones(std::span<const std::uint8_t> bits)
{
    int best = 0, run = 0;
    for (auto b : bits) {
        run = b ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

LineBits nrzi_decode(std::span<const std::uint8_t> line, std::uint8_t level)
{
    LineBits out;
    for (auto l : line) {
        out.push_back(l == level ? 1 : 0);
        level = l;
    }
    return out;
}

} // namespace

TEST_CASE("FCS matches the shift-register oracle")
{
    CHECK(lfsr_fcs(ascii("123456789")) == 0x906E);
    CHECK(compute_fcs(ascii("123456789")) == 0x906E);
    // Empty input leaves init 0xFFFF, then the final XOR.
    CHECK(lfsr_fcs({}) == 0x0000);
    CHECK(compute_fcs({}) == 0x0000);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        Bytes b(rng() % 300);
        for (auto& x : b)
            x = static_cast<std::uint8_t>(rng());
        REQUIRE(compute_fcs(b) == lfsr_fcs(b));
    }
}

TEST_CASE("FCS detects every single-bit error")
{
    const Bytes msg = ascii("W3EAX-12>APZVPR:=3859.11N/07656.88W-");
    const auto good = compute_fcs(msg);
    for (std::size_t i = 0; i < msg.size() * 8; ++i) {
        Bytes m = msg;
        m[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8));
        REQUIRE(compute_fcs(m) != good);
    }
}

TEST_CASE("callsign parsing and validation")
{
    CHECK(Callsign::parse("W3EAX-12").base == "W3EAX");
    CHECK(Callsign::parse("W3EAX-12").ssid == 12);
    CHECK(Callsign::parse("w3eax").to_string() == "W3EAX");
    CHECK(Callsign::parse("APRS-0").to_string() == "APRS");
    CHECK_THROWS_AS(Callsign::parse(""), ValidationError);
    CHECK_THROWS_AS(Callsign::parse("TOOLONG1"), ValidationError);
    CHECK_THROWS_AS(Callsign::parse("W3EAX-16"), ValidationError);
    CHECK_THROWS_AS(Callsign::parse("W3-EAX"), ValidationError);
    CHECK_THROWS_AS(Callsign::parse("W3EAX-"), ValidationError);
}

TEST_CASE("address field encoding")
{
    const auto f = encode_address(Callsign::parse("W3EAX-12"), false, false);
    CHECK(f[0] == 0xAE); // 'W' << 1
    CHECK(f[5] == (' ' << 1));
    CHECK(((f[6] & 0x1E) >> 1) == 12);
    CHECK((f[6] & 0x01) == 0);

    const auto a = encode_address(Callsign::parse("A"), true, false);
    CHECK(a[0] == ('A' << 1));
    for (int i = 1; i < 6; ++i)
        CHECK(a[static_cast<std::size_t>(i)] == (' ' << 1));
    CHECK((a[6] & 0x01) == 1);

    for (int ssid = 0; ssid <= 15; ++ssid) {
        for (bool last : {false, true}) {
            for (bool rep : {false, true}) {
                const Callsign cs{"N0CALL", ssid};
                const auto d = decode_address(encode_address(cs, last, rep));
                REQUIRE(d.callsign == cs);
                REQUIRE(d.last == last);
                REQUIRE(d.repeated == rep);
            }
        }
    }
}

TEST_CASE("frame bytes round trip and validation")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto f = random_frame(rng);
        REQUIRE(decode_frame(encode_frame(f)) == f);
    }
    Ax25Frame big = Ax25Frame::ui(Callsign::parse("N0CALL"), Callsign::parse("APRS"), {}, "");
    big.info.assign(kMaxInfo + 1, 'x');
    CHECK_THROWS_AS(encode_frame(big), ValidationError);
    CHECK_THROWS_AS(decode_frame(Bytes(10, 0x40)), ParseError);
}

TEST_CASE("bit stuffing")
{
    SUBCASE("256 bytes of 0xFF gain one zero per five ones")
    {
        const Bytes ones(256, 0xFF);
        const auto stuffed = stuff_bits(ones);
        // Counting oracle: every completed run of five ones inserts a zero.
        std::size_t inserted = 0;
        int run = 0;
        for (std::size_t i = 0; i < 256 * 8; ++i) {
            if (++run == 5) {
                ++inserted;
                run = 0;
            }
        }
        CHECK(inserted == (256 * 8) / 5);
        CHECK(stuffed.size() == 256 * 8 + inserted);
        CHECK(longest_ones(stuffed) == 5);
    }
    SUBCASE("random payloads never carry six ones")
    {
        std::mt19937_64 rng(8);
        for (int i = 0; i < 200; ++i) {
            Bytes b(rng() % 100 + 1);
            for (auto& x : b)
                x = static_cast<std::uint8_t>(rng());
            REQUIRE(longest_ones(stuff_bits(b)) <= 5);
        }
    }
    SUBCASE("LSB first")
    {
        const auto bits = stuff_bits(Bytes{0x01});
        CHECK(bits == LineBits{1, 0, 0, 0, 0, 0, 0, 0});
    }
}

TEST_CASE("NRZI: zero toggles, one holds")
{
    std::uint8_t level = 0;
    const auto line = nrzi_encode(LineBits{0, 1, 1, 0, 0}, level);
    CHECK(line == LineBits{1, 1, 1, 0, 1});
    CHECK(level == 1);
    CHECK(nrzi_decode(line, 0) == LineBits{0, 1, 1, 0, 0});
}

TEST_CASE("line-bit round trip over random frames")
{
    std::mt19937_64 rng(21);
    for (int i = 0; i < 1000; ++i) {
        const auto f = random_frame(rng);
        TxOptions opts;
        opts.preamble_flags = 1 + static_cast<int>(rng() % 4);
        opts.tail_flags = 1;
        const auto frames = linebits_to_frames(frame_to_linebits(f, opts));
        REQUIRE(frames.size() == 1);
        REQUIRE(frames[0].frame == f);
        REQUIRE(frames[0].fcs_ok);
        REQUIRE(frames[0].raw == encode_frame(f));
    }
}

TEST_CASE("back-to-back frames sharing one flag")
{
    std::mt19937_64 rng(3);
    const std::vector<Ax25Frame> fs{random_frame(rng), random_frame(rng), random_frame(rng)};
    const auto bits = frames_to_linebits(fs);
    const auto out = linebits_to_frames(bits);
    REQUIRE(out.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(out[i].frame == fs[i]);
}

TEST_CASE("corrupted frame is rejected once")
{
    const auto f = Ax25Frame::ui(Callsign::parse("W3EAX-13"), Callsign::parse("APRS"), {}, "hello world");
    Bytes body = with_fcs(encode_frame(f));
    body[18] ^= 0x04;
    const std::vector<Bytes> one{body};
    std::uint64_t rejected = 0;
    CHECK(linebits_to_frames(hdlc_linebits(one), {}, 1200, &rejected).empty());
    CHECK(rejected == 1);
}

TEST_CASE("seeded random line noise yields no frames")
{
    std::mt19937_64 rng(99);
    LineBits noise(200000);
    for (auto& b : noise)
        b = static_cast<std::uint8_t>(rng() & 1);
    std::uint64_t rejected = 0;
    CHECK(linebits_to_frames(noise, {}, 1200, &rejected).empty());
}

TEST_CASE("streaming decoder carries partial frames and stamps times")
{
    std::mt19937_64 rng(17);
    const std::vector<Ax25Frame> fs{random_frame(rng), random_frame(rng)};
    const auto bits = frames_to_linebits(fs);
    const Timestamp base = from_millis(1'700'000'000'000);
    HdlcDecoder dec(base);
    std::vector<FrameEvent> out;
    std::size_t pos = 0;
    while (pos < bits.size()) {
        const std::size_t n = std::min<std::size_t>(rng() % 50 + 1, bits.size() - pos);
        dec.push(std::span<const std::uint8_t>(bits).subspan(pos, n), out);
        pos += n;
    }
    REQUIRE(out.size() == 2);
    CHECK(out[0].frame == fs[0]);
    CHECK(out[1].frame == fs[1]);
    CHECK(out[0].received_at > base);
    CHECK(out[1].received_at > out[0].received_at);
    // Stamped at the closing flag: never later than the whole stream.
    CHECK(out[1].received_at <= base + Duration{static_cast<std::int64_t>(bits.size() * 1000 / 1200 + 1)});
}

TEST_CASE("TNC2 text")
{
    auto f = Ax25Frame::ui(Callsign::parse("W3EAX-12"), Callsign::parse("APZVPR"),
                           {Callsign::parse("N3XYZ-1"), Callsign::parse("WIDE2-1")}, "=3859.11N/07656.88W-test");
    f.digipeaters[0].flag = true;
    CHECK(to_tnc2(f) == "W3EAX-12>APZVPR,N3XYZ-1*,WIDE2-1:=3859.11N/07656.88W-test");
    CHECK(parse_tnc2(to_tnc2(f)) == f);

    const auto bin = Ax25Frame::ui(Callsign::parse("A1"), Callsign::parse("B2"), {}, std::string("a\x01\xff", 3));
    CHECK(to_tnc2(bin) == "A1>B2:a<0x01><0xff>");
    CHECK(parse_tnc2(to_tnc2(bin)) == bin);

    CHECK_THROWS_AS(parse_tnc2("no separator"), ParseError);
    CHECK_THROWS_AS(parse_tnc2("W3EAX>:x"), ParseError);
}
