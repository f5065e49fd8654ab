#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stegozoo/errors.hpp"

namespace stegozoo::csv {

// Shortest decimal string that round-trips to exactly the same value.
// NaNs are written as "nan#<16 hex digits>" so their payload bits survive
// the text round trip; infinities print as "inf"/"-inf".
std::string format_double(double v);
std::string format_float(float v);

// Inverse of format_double; also accepts plain "nan" (quiet NaN).
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

std::vector<std::string> split_line(const std::string& line, char delim = ',');
std::string join(const std::vector<std::string>& fields, char delim = ',');

// Whole-file helpers; rows keep their field strings untouched. Empty lines
// are skipped. Throws FormatError when the file cannot be read.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                char delim = ',');
void write_rows(const std::filesystem::path& path,
                const std::vector<std::vector<std::string>>& rows, char delim = ',');

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace stegozoo::csv
