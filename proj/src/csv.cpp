#include "csv.hpp"

#include "hgdomain/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hgdomain::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(trim(line.substr(start)));
            break;
        }
        out.emplace_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open file '" + path.string() + "'");
    }

    Table table;
    table.path = path;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::vector<std::string>> rows;
    std::size_t pending_blank = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            ++pending_blank;
            continue;
        }
        if (lineno == 1) {
            table.header = split(line);
            continue;
        }
        if (pending_blank) {
            throw DataError(path.string() + ": blank line inside data before line " + std::to_string(lineno));
        }
        auto fields = split(line);
        if (fields.size() != table.header.size()) {
            throw DataError(path.string() + ": line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }

    if (table.header.empty()) {
        throw DataError("'" + path.string() + "' is empty or lacks a header row");
    }
    return table;
}

std::string location(const Table& table, std::size_t row, std::size_t col) {
    return table.path.string() + ": row " + std::to_string(row + 1) + " (line " + std::to_string(row + 2) + "), column " +
           std::to_string(col + 1) + " ('" + table.header[col] + "')";
}

double parse_real(const Table& table, std::size_t row, std::size_t col) {
    const auto& cell = table.rows[row][col];
    double value = 0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw DataError(location(table, row, col) + ": non-numeric value '" + cell + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError(location(table, row, col) + ": non-finite value '" + cell + "'");
    }
    return value;
}

long long parse_integer(const Table& table, std::size_t row, std::size_t col) {
    const auto& cell = table.rows[row][col];
    long long value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw DataError(location(table, row, col) + ": expected an integer, found '" + cell + "'");
    }
    return value;
}

std::string format_real(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

std::string format_fixed(double value, int digits) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, digits);
    std::string out(buf.data(), ptr);
    if (out.find_first_not_of("-0.") == std::string::npos && !out.empty() && out.front() == '-') {
        out.erase(0, 1); // no "-0.00"
    }
    return out;
}

}
