#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spotbot/types.hpp"

namespace spotbot::io {

/// Shortest round-trip formatting of a double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Writes `rows` of a matrix as raw little-endian float64.
void write_f64(const std::filesystem::path& path, std::span<const double> data);
std::vector<double> read_f64(const std::filesystem::path& path);

/// Minimal CSV: comma separated, no quoting (fields never contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws ValidationError naming the column when it is missing.
  std::size_t column(std::string_view name) const;
  std::vector<double> numeric_column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable read_csv_string(std::string_view text, std::string_view source = "csv");
std::string to_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// FNV-1a 64-bit, hex encoded.
std::string content_hash(std::string_view data);
std::string file_hash(const std::filesystem::path& path);

/// Parses "a,b,c" or a range "lo..hi" of unsigned integers.
std::vector<std::size_t> parse_size_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

}  // namespace spotbot::io
