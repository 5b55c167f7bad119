#ifndef HGDOMAIN_CSV_HPP
#define HGDOMAIN_CSV_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hgdomain::csv {

struct Table {
    std::filesystem::path path;
    std::vector<std::string> header;
    // Body rows; row r corresponds to line r + 2 of the file.
    std::vector<std::vector<std::string>> rows;
};

/**
 * Reads a comma-separated file with a header row. Every body row must have
 * as many fields as the header. Blank trailing lines are ignored.
 */
Table read(const std::filesystem::path& path);

/**
 * Parses a finite real. `row` and `col` are 0-based body coordinates and are only used in messages.
 */
double parse_real(const Table& table, std::size_t row, std::size_t col);

long long parse_integer(const Table& table, std::size_t row, std::size_t col);

/**
 * Shortest representation that reads back to the same double.
 */
std::string format_real(double value);

/**
 * Fixed-point representation with `digits` decimals.
 */
std::string format_fixed(double value, int digits);

std::string location(const Table& table, std::size_t row, std::size_t col);

}

#endif
