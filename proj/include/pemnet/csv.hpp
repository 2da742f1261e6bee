// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pemnet::csv
{

// Shortest representation that round-trips exactly.
std::string fmt(double v);

// Writes "# key=value" metadata lines.
void write_comment(std::ostream &os, std::string_view text);

struct Table
{
    std::vector<std::string> comments; // without the leading '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws if absent.
    std::size_t column(std::string_view name) const;
};

Table read(std::istream &is);
Table read_file(const std::string &path);

double to_double(const std::string &s);
long to_long(const std::string &s);

} // namespace pemnet::csv
