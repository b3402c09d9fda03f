#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cwa {

// Shortest round-trip decimal form of a double ('.' separator, no
// locale). Parsing the result and formatting it again is the identity,
// which is what keeps emitted CSV files byte-stable.
std::string format_double(double value);

double parse_double(std::string_view text); // throws FormatError

long parse_long(std::string_view text);     // throws FormatError

std::vector<std::string> split_csv_line(std::string_view line);

// Reads a whole file; throws Error when it cannot be opened.
std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, std::string_view content);

// mkdir -p equivalent; throws Error on failure.
void ensure_directory(const std::string& path);

} // namespace cwa
