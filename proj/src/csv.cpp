#include "emberish/csv.hpp"

#include <fstream>
#include <sstream>

#include "emberish/error.hpp"

namespace emberish {

std::vector<CsvRow> parse_csv(std::string_view text)
{
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string cell;
    std::size_t line = 1;
    std::size_t i = 0;
    bool row_started = false;
    row.line = line;

    auto end_cell = [&] {
        row.cells.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&] {
        if (row_started) {
            end_cell();
            rows.push_back(std::move(row));
        }
        row = CsvRow{};
        row_started = false;
    };

    // Skip a UTF-8 byte order mark.
    if (text.substr(0, 3) == "\xEF\xBB\xBF") {
        i = 3;
    }

    while (i < text.size()) {
        char c = text[i];
        if (!row_started) {
            row.line = line;
        }
        if (c == '"' && cell.empty()) {
            row_started = true;
            const std::size_t quote_line = line;
            ++i;
            bool closed = false;
            while (i < text.size()) {
                char q = text[i];
                if (q == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        cell.push_back('"');
                        i += 2;
                        continue;
                    }
                    closed = true;
                    ++i;
                    break;
                }
                if (q == '\n') {
                    ++line;
                }
                cell.push_back(q);
                ++i;
            }
            if (!closed) {
                throw ValidationError("unterminated quoted field starting on line "
                                      + std::to_string(quote_line));
            }
            if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                throw ValidationError("unexpected character after closing quote on line "
                                      + std::to_string(line));
            }
            continue;
        }
        if (c == ',') {
            row_started = true;
            end_cell();
            ++i;
            continue;
        }
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            ++i;
            continue;
        }
        if (c == '\n') {
            end_row();
            ++line;
            ++i;
            continue;
        }
        row_started = true;
        cell.push_back(c);
        ++i;
    }
    end_row();
    return rows;
}

std::string csv_escape(std::string_view cell)
{
    if (cell.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(cell);
    }
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_line(const std::vector<std::string>& cells)
{
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out.push_back(',');
        }
        out += csv_escape(cells[i]);
    }
    out.push_back('\n');
    return out;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw RuntimeFailure("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw RuntimeFailure("short write to " + path.string());
    }
}

}  // namespace emberish
