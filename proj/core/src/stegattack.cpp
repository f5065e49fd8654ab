#include "stegozoo/stegattack.hpp"

#include <fstream>

#include "stegozoo/bitview.hpp"
#include "stegozoo/rng.hpp"

namespace stegozoo::attack {

Payload Payload::from_bytes(std::vector<std::uint8_t> bytes) {
    Payload p;
    p.n_bits_ = bytes.size() * 8;
    p.bytes_ = std::move(bytes);
    return p;
}

Payload Payload::from_bit_string(std::string_view bits01) {
    Payload p;
    p.n_bits_ = bits01.size();
    p.bytes_.assign((bits01.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits01.size(); ++i) {
        const char c = bits01[i];
        if (c != '0' && c != '1') throw ConfigError("payload bit string must contain only '0'/'1'");
        if (c == '1') p.bytes_[i >> 3] |= static_cast<std::uint8_t>(1u << (7 - (i & 7)));
    }
    return p;
}

Payload Payload::from_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open payload file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(std::move(bytes));
}

Payload Payload::random(std::uint64_t seed, std::size_t n_bits) {
    Rng rng(derive_seed(seed, 0xba9));
    Payload p;
    p.n_bits_ = n_bits;
    p.bytes_.assign((n_bits + 7) / 8, 0);
    for (auto& b : p.bytes_) b = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    // Zero the padding so equal payloads compare equal bytewise.
    if (n_bits % 8 != 0 && !p.bytes_.empty()) {
        const unsigned keep = static_cast<unsigned>(n_bits % 8);
        p.bytes_.back() &= static_cast<std::uint8_t>(0xffu << (8 - keep));
    }
    return p;
}

std::string Payload::to_bit_string() const {
    std::string s;
    s.reserve(n_bits_);
    for (std::size_t i = 0; i < n_bits_; ++i) s.push_back(bit(i) ? '1' : '0');
    return s;
}

std::string Payload::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001b3ull;
    };
    for (std::uint8_t b : bytes_) mix(b);
    for (std::size_t n = n_bits_; n; n >>= 8) mix(static_cast<std::uint8_t>(n & 0xff));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

AttackSpec::AttackSpec(int x_bits, AttackMode m) : x(x_bits), mode(m) {
    if (x < 1 || x > bits::kMaxXlsbWidth) {
        throw ConfigError("attack requires 1 <= X <= 23, got " + std::to_string(x));
    }
}

std::size_t capacity_bits(const store::ModelRecord& m, int x) {
    if (x < 1 || x > bits::kMaxXlsbWidth) {
        throw ConfigError("attack requires 1 <= X <= 23, got " + std::to_string(x));
    }
    return m.weight_count() * static_cast<std::size_t>(x);
}

namespace {

// Writes payload bits [0, n_bits) into the XLSB regions of bm, X bits per
// row, final partial segment left-aligned at b_X.
void splice_bits(store::BitMatrix& bm, const Payload& s, std::size_t n_bits, int x) {
    const bits::BitRegion region(bits::RegionKind::XLSB, x);
    const std::size_t q = n_bits / static_cast<std::size_t>(x);
    const std::size_t r = n_bits % static_cast<std::size_t>(x);
    std::string seg(static_cast<std::size_t>(x), '0');
    for (std::size_t row = 0; row < q; ++row) {
        for (int k = 0; k < x; ++k) {
            seg[static_cast<std::size_t>(k)] =
                s.bit(row * static_cast<std::size_t>(x) + static_cast<std::size_t>(k)) ? '1' : '0';
        }
        bm.set_row(row, bits::write_region(bm.row(row), region, seg));
    }
    if (r > 0) {
        std::string tail(r, '0');
        for (std::size_t k = 0; k < r; ++k) {
            tail[k] = s.bit(q * static_cast<std::size_t>(x) + k) ? '1' : '0';
        }
        bm.set_row(q, bits::write_region(bm.row(q), region, tail));
    }
}

}  // namespace

store::ModelRecord embed(const store::ModelRecord& m, const AttackSpec& spec, const Payload& s) {
    if (spec.mode != AttackMode::Exact) {
        throw ConfigError("embed expects an exact-mode AttackSpec");
    }
    const std::size_t cap = capacity_bits(m, spec.x);
    if (s.bit_count() > cap) throw CapacityError(s.bit_count(), cap);
    if (s.empty()) return m;

    store::WeightVector w = store::flatten(m);
    store::BitMatrix bm = store::to_bitmatrix(w);
    splice_bits(bm, s, s.bit_count(), spec.x);
    return store::unflatten(m, store::from_bitmatrix(bm));
}

store::ModelRecord embed_fill(const store::ModelRecord& m, const AttackSpec& spec,
                              const Payload& s) {
    if (spec.mode != AttackMode::Fill) {
        throw ConfigError("embed_fill expects a fill-mode AttackSpec");
    }
    if (s.empty()) throw ConfigError("embed_fill: payload must be non-empty");

    const std::size_t cap = capacity_bits(m, spec.x);
    std::string filled;
    filled.reserve(cap);
    const std::string one = s.to_bit_string();
    while (filled.size() < cap) {
        const std::size_t take = std::min(one.size(), cap - filled.size());
        filled.append(one, 0, take);
    }
    return embed(m, AttackSpec(spec.x, AttackMode::Exact), Payload::from_bit_string(filled));
}

Payload extract(const store::ModelRecord& m, int x, std::size_t n_bits) {
    const std::size_t cap = capacity_bits(m, x);
    if (n_bits > cap) throw CapacityError(n_bits, cap);
    if (n_bits == 0) return Payload();

    const bits::BitRegion region(bits::RegionKind::XLSB, x);
    const store::WeightVector w = store::flatten(m);
    std::string bits01;
    bits01.reserve(n_bits);
    for (std::size_t i = 0; i < w.size() && bits01.size() < n_bits; ++i) {
        const std::string seg = bits::read_region(bits::Float32Word::from_value(w[i]), region);
        const std::size_t take = std::min(seg.size(), n_bits - bits01.size());
        bits01.append(seg, 0, take);
    }
    return Payload::from_bit_string(bits01);
}

std::size_t count_unchanged(const store::ModelRecord& original,
                            const store::ModelRecord& attacked) {
    if (original.arch() != attacked.arch()) {
        throw ShapeError("count_unchanged: models have different architectures");
    }
    const store::BitMatrix a = store::to_bitmatrix(store::flatten(original));
    const store::BitMatrix b = store::to_bitmatrix(store::flatten(attacked));
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.row_count(); ++i) {
        if (a.row(i) == b.row(i)) ++same;
    }
    return same;
}

}  // namespace stegozoo::attack
