// SPDX-License-Identifier: Apache-2.0
#include "pemnet/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pemnet::csv
{

std::string fmt(double v)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

void write_comment(std::ostream &os, std::string_view text)
{
    os << '#' << ' ' << text << '\n';
}

std::size_t Table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw std::runtime_error("missing CSV column: " + std::string(name));
}

namespace
{

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

Table read(std::istream &is)
{
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.front() == '#')
        {
            t.comments.push_back(line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        if (!have_header)
        {
            t.header = split(line);
            have_header = true;
        }
        else
        {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

Table read_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return read(in);
}

double to_double(const std::string &s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("bad number in CSV: '" + s + "'");
    return v;
}

long to_long(const std::string &s)
{
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("bad integer in CSV: '" + s + "'");
    return v;
}

} // namespace pemnet::csv
