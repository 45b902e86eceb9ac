#include "lvnn/csv_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lvnn::io {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    return out;
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                 ": not a number: '" + cell + "'");
    }
    return v;
}

void expect_header(const Table& t, const std::vector<std::string>& want,
                   const std::filesystem::path& path) {
    if (t.header != want) {
        std::string w;
        for (const auto& h : want) w += (w.empty() ? "" : ",") + h;
        throw std::runtime_error(path.string() + ": expected header '" + w + "'");
    }
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": wrong number of columns");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, path, lineno));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw std::runtime_error(path.string() + ": empty file");
    return t;
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<MarketQuote> read_quotes(const std::filesystem::path& path) {
    const Table t = read_table(path);
    expect_header(t, {"T", "K", "price"}, path);
    std::vector<MarketQuote> quotes;
    quotes.reserve(t.rows.size());
    for (const auto& r : t.rows) quotes.push_back({r[0], r[1], r[2]});
    return quotes;
}

void write_quotes(const std::filesystem::path& path, const std::vector<MarketQuote>& quotes) {
    std::vector<std::vector<double>> rows;
    rows.reserve(quotes.size());
    for (const auto& q : quotes) rows.push_back({q.maturity, q.strike, q.price});
    write_table(path, {"T", "K", "price"}, rows);
}

TermStructure read_curve(const std::filesystem::path& path) {
    const Table t = read_table(path);
    expect_header(t, {"t", "rate"}, path);
    std::vector<double> times, values;
    for (const auto& r : t.rows) {
        times.push_back(r[0]);
        values.push_back(r[1]);
    }
    return TermStructure(std::move(times), std::move(values));
}

void write_curve(const std::filesystem::path& path, const TermStructure& curve) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < curve.values().size(); ++i) {
        rows.push_back({curve.knot_times()[i], curve.values()[i]});
    }
    write_table(path, {"t", "rate"}, rows);
}

}  // namespace lvnn::io
