#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lvnn/curves.hpp"

namespace lvnn::io {

// Quote files: header `T,K,price`, one put per row.
std::vector<MarketQuote> read_quotes(const std::filesystem::path& path);
void write_quotes(const std::filesystem::path& path, const std::vector<MarketQuote>& quotes);

// Curve files: header `t,rate`, left knots of a piecewise-constant curve.
TermStructure read_curve(const std::filesystem::path& path);
void write_curve(const std::filesystem::path& path, const TermStructure& curve);

// Parses a header + numeric rows CSV; throws std::runtime_error naming the
// file and line on malformed content.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
Table read_table(const std::filesystem::path& path);

// Writes a numeric table with round-trip precision.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

}  // namespace lvnn::io
