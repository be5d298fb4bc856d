#pragma once

#include <string>
#include <vector>

namespace gfmlab {

// Comma split without quoting; '\r' is dropped.
std::vector<std::string> split_csv(const std::string& line);
std::string trim(const std::string& s);
// Strict parse of a whole token; throws FormatError naming `where`.
long long parse_int(const std::string& token, const std::string& where);
// Shortest decimal that parses back to the same double.
std::string format_shortest(double v);

}  // namespace gfmlab
