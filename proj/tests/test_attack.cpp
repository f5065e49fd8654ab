#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "stegozoo/rng.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/tensorstore.hpp"
#include "support/oracles.hpp"

using namespace stegozoo;
using attack::AttackMode;
using attack::AttackSpec;
using attack::Payload;

namespace {

std::vector<std::uint32_t> raw_words(const store::ModelRecord& m) {
    std::vector<std::uint32_t> words;
    for (float f : store::flatten(m)) words.push_back(std::bit_cast<std::uint32_t>(f));
    return words;
}

}  // namespace

TEST_CASE("payload bit order is MSB-first within each byte") {
    const Payload p = Payload::from_bytes({0b10110000, 0b00000001});
    REQUIRE(p.bit_count() == 16);
    CHECK(p.to_bit_string() == "1011000000000001");
    CHECK(p.bit(0) == 1);
    CHECK(p.bit(1) == 0);
    CHECK(p.bit(2) == 1);
    CHECK(p.bit(15) == 1);
}

TEST_CASE("payload bit-string round trip pads the tail byte with zeros") {
    const Payload p = Payload::from_bit_string("10101");
    CHECK(p.bit_count() == 5);
    CHECK(p.to_bit_string() == "10101");
    REQUIRE(p.bytes().size() == 1);
    CHECK(p.bytes()[0] == 0b10101000);
    CHECK_THROWS_AS(Payload::from_bit_string("10102"), ConfigError);
}

TEST_CASE("random payloads are deterministic per seed") {
    const Payload a = Payload::random(11, 1000);
    const Payload b = Payload::random(11, 1000);
    const Payload c = Payload::random(12, 1000);
    CHECK(a == b);
    CHECK(a.bit_count() == 1000);
    CHECK_FALSE(a == c);
}

TEST_CASE("digest is FNV-1a over packed bytes plus the bit length") {
    const Payload p = Payload::from_bit_string("1011000000000001");
    // Independent FNV-1a over the same byte stream the digest documents:
    // packed payload bytes, then the bit count's significant bytes, low first.
    std::vector<std::uint8_t> stream = p.bytes();
    for (std::size_t n = p.bit_count(); n != 0; n >>= 8) {
        stream.push_back(static_cast<std::uint8_t>(n & 0xffu));
    }
    char want[17];
    std::snprintf(want, sizeof(want), "%016llx",
                  static_cast<unsigned long long>(oracle::fnv1a(stream)));
    CHECK(p.digest() == want);
    // Same bytes, different bit count -> different digest.
    CHECK(Payload::from_bit_string("101100000000000100").digest() != p.digest());
}

TEST_CASE("capacity is n_W * X") {
    const store::ModelRecord m = oracle::random_model("2-4-3", 5);  // n_W = 27
    CHECK(m.weight_count() == 27);
    CHECK(attack::capacity_bits(m, 1) == 27);
    CHECK(attack::capacity_bits(m, 23) == 27 * 23);
}

TEST_CASE("attack width is range guarded") {
    CHECK_THROWS_AS(AttackSpec(0, AttackMode::Exact), ConfigError);
    CHECK_THROWS_AS(AttackSpec(24, AttackMode::Exact), ConfigError);
    CHECK_NOTHROW(AttackSpec(1, AttackMode::Fill));
    CHECK_NOTHROW(AttackSpec(23, AttackMode::Exact));
}

TEST_CASE("hand-worked embed layout: X=3, five payload bits over two weights") {
    const store::ModelRecord m = oracle::random_model("1-1", 3);  // n_W = 2
    REQUIRE(m.weight_count() == 2);
    const store::ModelRecord a = attack::embed(m, AttackSpec(3, AttackMode::Exact),
                                               Payload::from_bit_string("10110"));
    const auto before = raw_words(m);
    const auto after = raw_words(a);
    // Weight 1 carries segment "101" at b3 b2 b1.
    CHECK(oracle::word_bit(after[0], 3) == 1);
    CHECK(oracle::word_bit(after[0], 2) == 0);
    CHECK(oracle::word_bit(after[0], 1) == 1);
    // Weight 2 carries the 2-bit tail "10" left-aligned: b3 b2; b1 untouched.
    CHECK(oracle::word_bit(after[1], 3) == 1);
    CHECK(oracle::word_bit(after[1], 2) == 0);
    CHECK(oracle::word_bit(after[1], 1) == oracle::word_bit(before[1], 1));
    // Everything above b3 is untouched in both weights.
    for (int i = 4; i <= 32; ++i) {
        CHECK(oracle::word_bit(after[0], i) == oracle::word_bit(before[0], i));
        CHECK(oracle::word_bit(after[1], i) == oracle::word_bit(before[1], i));
    }
}

TEST_CASE("embed matches the reference layout on fuzzed inputs") {
    Rng rng(0xe3bed);
    for (int t = 0; t < 300; ++t) {
        const store::ModelRecord m = oracle::random_model("2-4-3", 1000 + t);
        const int x = 1 + static_cast<int>(rng.below(23));
        const std::size_t cap = attack::capacity_bits(m, x);
        const std::size_t n_s = 1 + rng.below(cap);
        const Payload s = Payload::random(rng.next_u64(), n_s);

        const store::ModelRecord got = attack::embed(m, AttackSpec(x, AttackMode::Exact), s);
        const auto want = oracle::ref_embed(raw_words(m), x, s.to_bit_string());
        CAPTURE(x);
        CAPTURE(n_s);
        CHECK(raw_words(got) == want);
        CHECK(got.arch() == m.arch());
    }
}

TEST_CASE("weights beyond the payload keep their exact bit patterns") {
    const store::ModelRecord m = oracle::random_model("2-8-8-2", 9);  // n_W = 114
    const store::ModelRecord a =
        attack::embed(m, AttackSpec(8, AttackMode::Exact), Payload::random(1, 8 * 10));
    const auto before = raw_words(m);
    const auto after = raw_words(a);
    for (std::size_t i = 10; i < before.size(); ++i) CHECK(after[i] == before[i]);
}

TEST_CASE("capacity law: n_s = n_W*X fits, one more bit does not") {
    const store::ModelRecord m = oracle::random_model("2-4-3", 77);  // n_W = 27
    for (int x = 1; x <= 23; ++x) {
        const std::size_t cap = attack::capacity_bits(m, x);
        CHECK_NOTHROW(attack::embed(m, AttackSpec(x, AttackMode::Exact),
                                    Payload::random(3, cap)));
        try {
            attack::embed(m, AttackSpec(x, AttackMode::Exact), Payload::random(3, cap + 1));
            FAIL_CHECK("embed accepted an oversized payload at x=" << x);
        } catch (const CapacityError& e) {
            CHECK(e.requested == cap + 1);
            CHECK(e.capacity == cap);
        }
    }
}

TEST_CASE("embed_fill repeats the payload across the whole capacity") {
    const store::ModelRecord m = oracle::random_model("1-3", 21);  // n_W = 6
    const store::ModelRecord a =
        attack::embed_fill(m, AttackSpec(1, AttackMode::Fill), Payload::from_bit_string("101"));
    // Capacity 6 at X=1: bits 101101 land on b1 of the six weights.
    const auto after = raw_words(a);
    std::string got;
    for (std::uint32_t w : after) got += static_cast<char>('0' + oracle::word_bit(w, 1));
    CHECK(got == "101101");
    CHECK(attack::extract(a, 1, 6).to_bit_string() == "101101");
}

TEST_CASE("embed_fill truncates payloads longer than the capacity") {
    const store::ModelRecord m = oracle::random_model("1-3", 22);  // n_W = 6
    const Payload longer = Payload::from_bit_string("110010111");  // 9 bits, capacity 6
    const store::ModelRecord a =
        attack::embed_fill(m, AttackSpec(1, AttackMode::Fill), longer);
    CHECK(attack::extract(a, 1, 6).to_bit_string() == "110010");
}

TEST_CASE("embed_fill wants a non-empty payload and a fill-mode spec") {
    const store::ModelRecord m = oracle::random_model("1-3", 23);
    CHECK_THROWS_AS(attack::embed_fill(m, AttackSpec(1, AttackMode::Fill), Payload()),
                    ConfigError);
    CHECK_THROWS_AS(attack::embed_fill(m, AttackSpec(1, AttackMode::Exact),
                                       Payload::from_bit_string("1")),
                    ConfigError);
    CHECK_THROWS_AS(attack::embed(m, AttackSpec(1, AttackMode::Fill),
                                  Payload::from_bit_string("1")),
                    ConfigError);
}

TEST_CASE("extract is the inverse of embed and honors the bit budget") {
    Rng rng(0xec5);
    for (int t = 0; t < 200; ++t) {
        const store::ModelRecord m = oracle::random_model("2-4-3", 2000 + t);
        const int x = 1 + static_cast<int>(rng.below(23));
        const std::size_t n_s = 1 + rng.below(attack::capacity_bits(m, x));
        const Payload s = Payload::random(rng.next_u64(), n_s);
        const store::ModelRecord a = attack::embed(m, AttackSpec(x, AttackMode::Exact), s);
        CHECK(attack::extract(a, x, n_s) == s);
        // The reference reader sees the same stream.
        CHECK(attack::extract(a, x, n_s).to_bit_string() ==
              oracle::ref_extract(raw_words(a), x, n_s));
    }
    const store::ModelRecord m = oracle::random_model("1-3", 1);
    CHECK_THROWS_AS(attack::extract(m, 2, attack::capacity_bits(m, 2) + 1), CapacityError);
}

TEST_CASE("count_unchanged compares full 32-bit patterns") {
    const store::ModelRecord m = oracle::random_model("2-4-3", 8);
    CHECK(attack::count_unchanged(m, m) == m.weight_count());
    store::WeightVector w = store::flatten(m);
    w[5] = std::bit_cast<float>(std::bit_cast<std::uint32_t>(w[5]) ^ 1u);
    CHECK(attack::count_unchanged(m, store::unflatten(m, w)) == m.weight_count() - 1);
    const store::ModelRecord other = oracle::random_model("2-4-4", 8);
    CHECK_THROWS_AS(attack::count_unchanged(m, other), ShapeError);
}

TEST_CASE("X=1 random payload leaves about half the weights unchanged") {
    // 40 carriers x 114 weights; the match probability per weight is 1/2, so
    // the pooled fraction sits within 5 sigma = 5*sqrt(.25/4560) of one half.
    std::size_t unchanged = 0, total = 0;
    for (int t = 0; t < 40; ++t) {
        const store::ModelRecord m = oracle::random_model("2-8-8-2", 3000 + t);
        const store::ModelRecord a = attack::embed_fill(
            m, AttackSpec(1, AttackMode::Fill),
            Payload::random(9000 + static_cast<std::uint64_t>(t), m.weight_count()));
        unchanged += attack::count_unchanged(m, a);
        total += m.weight_count();
    }
    const double frac = static_cast<double>(unchanged) / static_cast<double>(total);
    CHECK(frac > 0.5 - 5.0 * 0.0074);
    CHECK(frac < 0.5 + 5.0 * 0.0074);
}
