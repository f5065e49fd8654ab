#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stegozoo/errors.hpp"
#include "stegozoo/tensorstore.hpp"

namespace stegozoo::attack {

// An ordered bit sequence. Bits come from bytes most-significant-bit first;
// the trailing byte is zero-padded when the length is not a multiple of 8.
class Payload {
public:
    Payload() = default;

    static Payload from_bytes(std::vector<std::uint8_t> bytes);
    static Payload from_bit_string(std::string_view bits01);
    static Payload from_file(const std::filesystem::path& path);
    static Payload random(std::uint64_t seed, std::size_t n_bits);

    std::size_t bit_count() const { return n_bits_; }
    bool empty() const { return n_bits_ == 0; }

    int bit(std::size_t i) const {
        return (bytes_[i >> 3] >> (7 - (i & 7))) & 1;
    }

    std::string to_bit_string() const;
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    // FNV-1a over the packed bytes plus the bit length; hex string.
    std::string digest() const;

    bool operator==(const Payload&) const = default;

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t n_bits_ = 0;
};

enum class AttackMode { Exact, Fill };

struct AttackSpec {
    int x = 1;
    AttackMode mode = AttackMode::Exact;

    AttackSpec(int x_bits, AttackMode m);
};

// n_W * X, the number of payload bits the carrier can hold.
std::size_t capacity_bits(const store::ModelRecord& m, int x);

// Splits s into X-bit segments and writes them into the XLSB regions of the
// weights in flatten order: segment bit 1 lands on b_X, the final partial
// segment of r = n_s mod X bits occupies b_X..b_(X-r+1) of weight q+1.
// Weights beyond the payload, and the sign/exponent bits of every weight,
// are untouched. Fails when n_s > n_W * X.
store::ModelRecord embed(const store::ModelRecord& m, const AttackSpec& spec, const Payload& s);

// Repeats s until all n_W * X capacity bits are used (the last repetition
// may be cut off); when s is longer than the capacity only its first
// n_W * X bits are used.
store::ModelRecord embed_fill(const store::ModelRecord& m, const AttackSpec& spec,
                              const Payload& s);

// First n_bits of the concatenated XLSB regions in weight order; the exact
// inverse of embed's layout.
Payload extract(const store::ModelRecord& m, int x, std::size_t n_bits);

// Number of weight positions whose full 32-bit patterns agree.
std::size_t count_unchanged(const store::ModelRecord& original,
                            const store::ModelRecord& attacked);

}  // namespace stegozoo::attack
