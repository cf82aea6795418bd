#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace netsample::csv {

/// Splits one line on commas. No quoting: none of our files need it.
std::vector<std::string> split(std::string_view line);

/// Reads the next non-empty line (CR stripped). Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

/// Parses a full-field double; throws UsageError naming `what` otherwise.
double parse_double(std::string_view field, std::string_view what);

/// Shortest round-trip decimal representation, `.` separator, locale independent.
std::string format(double value);

}  // namespace netsample::csv
