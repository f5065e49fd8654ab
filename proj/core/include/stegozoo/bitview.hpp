#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "stegozoo/errors.hpp"

namespace stegozoo::bits {

// A float32 word viewed as the bit string b32...b1: b32 is the sign bit,
// b31..b24 the exponent field E and b23..b1 the mantissa. b1 is the least
// significant bit of the stored word; the indexing is independent of the
// platform's byte order.
class Float32Word {
public:
    Float32Word() = default;
    explicit constexpr Float32Word(std::uint32_t raw) : raw_(raw) {}

    static Float32Word from_value(float v) {
        return Float32Word(std::bit_cast<std::uint32_t>(v));
    }

    constexpr std::uint32_t raw() const { return raw_; }
    float value() const { return std::bit_cast<float>(raw_); }

    // b(i), i in [1, 32].
    constexpr int bit(int i) const { return static_cast<int>((raw_ >> (i - 1)) & 1u); }

    constexpr Float32Word with_bit(int i, int v) const {
        const std::uint32_t mask = 1u << (i - 1);
        return Float32Word(v ? (raw_ | mask) : (raw_ & ~mask));
    }

    constexpr Float32Word flipped(int i) const { return Float32Word(raw_ ^ (1u << (i - 1))); }

    constexpr int sign() const { return bit(32); }
    constexpr std::uint32_t exponent() const { return (raw_ >> 23) & 0xffu; }
    constexpr std::uint32_t mantissa() const { return raw_ & 0x7fffffu; }

    constexpr bool is_normalized() const { return exponent() >= 1 && exponent() <= 254; }

    friend constexpr bool operator==(Float32Word a, Float32Word b) { return a.raw_ == b.raw_; }

private:
    std::uint32_t raw_ = 0;
};

enum class RegionKind { XLSB, XMSB };

inline constexpr int kMaxXlsbWidth = 23;
inline constexpr int kMaxXmsbWidth = 8;

// XLSB of width X covers b_X..b_1 (mantissa only, 1 <= X <= 23).
// XMSB of width X covers b_31..b_(32-X) (exponent only, 1 <= X <= 8).
// The sign bit b32 belongs to neither region.
class BitRegion {
public:
    BitRegion(RegionKind kind, int width);

    RegionKind kind() const { return kind_; }
    int width() const { return width_; }

    // One-based index (b1 = least significant) of the region's edge bits.
    int high_bit() const { return kind_ == RegionKind::XLSB ? width_ : 31; }
    int low_bit() const { return kind_ == RegionKind::XLSB ? 1 : 32 - width_; }

private:
    RegionKind kind_;
    int width_;
};

// IEEE-754 value of the word, widened to double (exact for every float32).
double decode_value(Float32Word w);

// The region's bits as a '0'/'1' string, most significant region bit first
// (b_X first for XLSB, b_31 first for XMSB).
std::string read_region(Float32Word w, const BitRegion& r);

// Replaces the |bits| most significant positions of an XLSB region (b_X
// downward) and leaves every other bit of the word untouched. Only XLSB
// regions are writable; the attack never reaches sign or exponent bits.
Float32Word write_region(Float32Word w, const BitRegion& r, std::string_view bits);

}  // namespace stegozoo::bits
