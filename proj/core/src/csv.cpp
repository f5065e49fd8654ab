#include "stegozoo/csv.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace stegozoo::csv {

namespace {

template <class T>
std::string format_shortest(T v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string format_double(double v) {
    // Decimal text cannot carry NaN payload bits, so NaNs get a tagged hex
    // form that parse_double restores bit-for-bit. Infinities are a single
    // bit pattern per sign and stay as plain "inf"/"-inf".
    if (std::isnan(v)) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "nan#%016llx",
                      static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
        return buf;
    }
    return format_shortest(v);
}

std::string format_float(float v) { return format_shortest(v); }

double parse_double(const std::string& s) {
    if (s.rfind("nan#", 0) == 0) {
        std::uint64_t bits = 0;
        const char* first = s.data() + 4;
        const char* last = s.data() + s.size();
        auto res = std::from_chars(first, last, bits, 16);
        if (s.size() == 20 && res.ec == std::errc() && res.ptr == last) {
            const double v = std::bit_cast<double>(bits);
            if (std::isnan(v)) return v;
        }
        throw FormatError("not a number: '" + s + "'");
    }
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw FormatError("not a number: '" + s + "'");
    }
    return v;
}

long long parse_int(const std::string& s) {
    long long v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw FormatError("not an integer: '" + s + "'");
    }
    return v;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::string join(const std::vector<std::string>& fields, char delim) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delim);
        out += fields[i];
    }
    return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, char delim) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_line(line, delim));
    }
    return rows;
}

void write_rows(const std::filesystem::path& path,
                const std::vector<std::vector<std::string>>& rows, char delim) {
    std::ostringstream out;
    for (const auto& row : rows) out << join(row, delim) << '\n';
    write_text_file(path, out.str());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace stegozoo::csv
