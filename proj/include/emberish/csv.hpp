#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emberish {

struct CsvRow {
    std::size_t line = 0;  ///< 1-based physical line on which the row starts
    std::vector<std::string> cells;
};

/// RFC-4180 reader: comma separated, double-quote quoting with "" escapes,
/// quoted cells may span lines. CRLF and LF line endings are both accepted.
/// Blank lines are skipped. Throws ValidationError on an unterminated quote
/// or stray characters after a closing quote.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a cell when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view cell);

/// Joins cells into one CSV line terminated by '\n'.
std::string csv_line(const std::vector<std::string>& cells);

std::string read_text_file(const std::filesystem::path& path);

/// Writes bytes to path, replacing any existing file.
void write_text_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace emberish
