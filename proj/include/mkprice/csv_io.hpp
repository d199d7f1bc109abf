#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mkprice {

using CsvRows = std::vector<std::vector<std::string>>;

/// Reads a plain comma-separated file (no quoting). Blank lines are skipped,
/// surrounding whitespace is trimmed from every field.
CsvRows read_csv(const std::filesystem::path& path);

/// Decimal text with 17 significant digits; round-trips doubles exactly.
std::string format_double(double value);

/// Strict decimal parse; `context` names the field in the error message.
double parse_double(std::string_view text, std::string_view context);

/// Matrix file format: one matrix row per line, comma-separated values,
/// no header, 17 significant digits.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mkprice
