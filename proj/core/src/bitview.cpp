#include "stegozoo/bitview.hpp"

namespace stegozoo::bits {

BitRegion::BitRegion(RegionKind kind, int width) : kind_(kind), width_(width) {
    const int max = kind == RegionKind::XLSB ? kMaxXlsbWidth : kMaxXmsbWidth;
    if (width < 1 || width > max) {
        throw RegionError("region width " + std::to_string(width) + " out of range [1," +
                          std::to_string(max) + "] for " +
                          (kind == RegionKind::XLSB ? std::string("XLSB") : std::string("XMSB")));
    }
}

double decode_value(Float32Word w) { return static_cast<double>(w.value()); }

std::string read_region(Float32Word w, const BitRegion& r) {
    std::string out;
    out.reserve(static_cast<std::size_t>(r.width()));
    for (int i = r.high_bit(); i >= r.low_bit(); --i) {
        out.push_back(w.bit(i) ? '1' : '0');
    }
    return out;
}

Float32Word write_region(Float32Word w, const BitRegion& r, std::string_view bits) {
    if (r.kind() != RegionKind::XLSB) {
        throw RegionError("write_region: only XLSB regions are writable");
    }
    if (bits.size() > static_cast<std::size_t>(r.width())) {
        throw RegionError("write_region: " + std::to_string(bits.size()) +
                          " bits do not fit a width-" + std::to_string(r.width()) + " region");
    }
    Float32Word out = w;
    int pos = r.high_bit();
    for (char c : bits) {
        if (c != '0' && c != '1') {
            throw ConfigError("write_region: bit string must contain only '0' and '1'");
        }
        out = out.with_bit(pos, c == '1');
        --pos;
    }
    return out;
}

}  // namespace stegozoo::bits
