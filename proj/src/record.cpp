#include "emberish/record.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "emberish/csv.hpp"
#include "emberish/error.hpp"

namespace emberish {

const std::string* Record::find(std::string_view key) const
{
    for (const auto& f : fields) {
        if (f.key == key) {
            return &f.value;
        }
    }
    return nullptr;
}

Dataset::Dataset(std::string name, Role role, std::vector<Record> records,
                 std::vector<std::string> column_names)
    : name_(std::move(name)), role_(role), records_(std::move(records)),
      columns_(std::move(column_names))
{
    const bool declared = !columns_.empty();
    std::unordered_set<std::string> known(columns_.begin(), columns_.end());
    by_id_.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const Record& r = records_[i];
        if (!by_id_.emplace(r.id, i).second) {
            throw ValidationError("duplicate id " + r.id);
        }
        for (const auto& f : r.fields) {
            if (f.key.empty()) {
                throw ValidationError("record " + r.id + " has an empty field key");
            }
            if (!known.contains(f.key)) {
                if (declared) {
                    throw ValidationError("record " + r.id + " has undeclared column " + f.key);
                }
                known.insert(f.key);
                columns_.push_back(f.key);
            }
        }
    }
}

std::optional<std::size_t> Dataset::index_of(const std::string& id) const
{
    auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Dataset Dataset::with_role(Role role) const
{
    Dataset copy = *this;
    copy.role_ = role;
    return copy;
}

Dataset parse_csv_dataset(std::string_view text, std::string name, Role role)
{
    auto rows = parse_csv(text);
    if (rows.empty()) {
        throw ValidationError(name + ": missing header row");
    }
    const auto& header = rows.front().cells;
    std::optional<std::size_t> id_col;
    std::vector<std::string> columns;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "id" && !id_col) {
            id_col = c;
        } else {
            if (header[c].empty()) {
                throw ValidationError(name + ": empty column name in header");
            }
            columns.push_back(header[c]);
        }
    }

    std::vector<Record> records;
    records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.cells.size() != header.size()) {
            throw ValidationError(name + ": malformed row on line " + std::to_string(row.line)
                                  + " (expected " + std::to_string(header.size())
                                  + " fields, found " + std::to_string(row.cells.size()) + ")");
        }
        Record rec;
        rec.id = id_col ? row.cells[*id_col] : std::to_string(r - 1);
        rec.fields.reserve(columns.size());
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (id_col && c == *id_col) {
                continue;
            }
            rec.fields.push_back({header[c], row.cells[c]});
        }
        records.push_back(std::move(rec));
    }
    return Dataset(std::move(name), role, std::move(records), std::move(columns));
}

namespace {

std::string scalar_to_string(const nlohmann::json& v, const std::string& where)
{
    switch (v.type()) {
    case nlohmann::json::value_t::string:
        return v.get<std::string>();
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned:
    case nlohmann::json::value_t::number_float:
    case nlohmann::json::value_t::boolean:
        return v.dump();
    case nlohmann::json::value_t::null:
        return {};
    default:
        throw ValidationError(where + ": values must be scalars");
    }
}

}  // namespace

Dataset parse_jsonl_dataset(std::string_view text, std::string name, Role role)
{
    std::vector<Record> records;
    std::size_t line_no = 0;
    std::size_t ordinal = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        const std::string where = name + ": line " + std::to_string(line_no);
        nlohmann::ordered_json obj;
        try {
            obj = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ValidationError(where + " is not valid JSON");
        }
        if (!obj.is_object()) {
            throw ValidationError(where + " is not a JSON object");
        }
        Record rec;
        bool has_id = false;
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            std::string value = scalar_to_string(it.value(), where);
            if (it.key() == "id" && !has_id) {
                rec.id = std::move(value);
                has_id = true;
            } else {
                rec.fields.push_back({it.key(), std::move(value)});
            }
        }
        if (!has_id) {
            rec.id = std::to_string(ordinal);
        }
        ++ordinal;
        records.push_back(std::move(rec));
        if (end == text.size()) {
            break;
        }
    }
    return Dataset(std::move(name), role, std::move(records));
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, Role role)
{
    const std::string text = read_text_file(path);
    std::string name = path.stem().string();
    if (format == FileFormat::jsonl) {
        return parse_jsonl_dataset(text, std::move(name), role);
    }
    return parse_csv_dataset(text, std::move(name), role);
}

Dataset load_dataset(const std::filesystem::path& path, Role role)
{
    const auto ext = path.extension().string();
    const bool jsonl = ext == ".jsonl" || ext == ".json";
    return load_dataset(path, jsonl ? FileFormat::jsonl : FileFormat::csv, role);
}

std::string render_dataset_csv(const Dataset& dataset)
{
    std::vector<std::string> header{"id"};
    header.insert(header.end(), dataset.column_names().begin(), dataset.column_names().end());
    std::string out = csv_line(header);
    std::vector<std::string> cells;
    for (const auto& rec : dataset.records()) {
        cells.clear();
        cells.push_back(rec.id);
        for (const auto& col : dataset.column_names()) {
            const std::string* v = rec.find(col);
            cells.push_back(v ? *v : std::string{});
        }
        out += csv_line(cells);
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset)
{
    write_text_file(path, render_dataset_csv(dataset));
}

Supervision parse_supervision(std::string_view text)
{
    auto rows = parse_csv(text);
    if (rows.empty()) {
        throw ValidationError("supervision file has no header");
    }
    const auto& header = rows.front().cells;
    Supervision sup;
    if (header.size() == 2) {
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& c = rows[r].cells;
            if (c.size() != 2) {
                throw ValidationError("malformed supervision row on line "
                                      + std::to_string(rows[r].line));
            }
            sup.pairs.push_back({c[0], c[1]});
        }
    } else if (header.size() == 3) {
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& c = rows[r].cells;
            if (c.size() != 3) {
                throw ValidationError("malformed supervision row on line "
                                      + std::to_string(rows[r].line));
            }
            if (c[1] == c[2]) {
                throw ValidationError("supervision triple on line " + std::to_string(rows[r].line)
                                      + " uses " + c[1] + " as both positive and negative");
            }
            sup.triples.push_back({c[0], c[1], c[2]});
        }
    } else {
        throw ValidationError("supervision file must have 2 (pairs) or 3 (triples) columns, found "
                              + std::to_string(header.size()));
    }
    return sup;
}

void validate_supervision(const Supervision& supervision, const Dataset& base, const Dataset& aux)
{
    std::vector<std::string> bad;
    if (supervision.is_triples()) {
        for (std::size_t i = 0; i < supervision.triples.size(); ++i) {
            const auto& t = supervision.triples[i];
            if (!base.contains(t.anchor_id) || !aux.contains(t.positive_id)
                || !aux.contains(t.negative_id)) {
                bad.push_back("row " + std::to_string(i + 1) + " (" + t.anchor_id + ","
                              + t.positive_id + "," + t.negative_id + ")");
            }
        }
    } else {
        for (std::size_t i = 0; i < supervision.pairs.size(); ++i) {
            const auto& p = supervision.pairs[i];
            if (!base.contains(p.base_id) || !aux.contains(p.aux_id)) {
                bad.push_back("row " + std::to_string(i + 1) + " (" + p.base_id + "," + p.aux_id + ")");
            }
        }
    }
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << "supervision references unknown ids: ";
        for (std::size_t i = 0; i < bad.size(); ++i) {
            msg << (i ? "; " : "") << bad[i];
        }
        throw ValidationError(msg.str());
    }
}

Supervision load_supervision(const std::filesystem::path& path, const Dataset& base,
                             const Dataset& aux)
{
    Supervision sup = parse_supervision(read_text_file(path));
    validate_supervision(sup, base, aux);
    return sup;
}

std::string render_pairs_csv(const std::vector<SupervisionPair>& pairs)
{
    std::string out = "base_id,aux_id\n";
    for (const auto& p : pairs) {
        out += csv_line({p.base_id, p.aux_id});
    }
    return out;
}

std::string render_triples_csv(const std::vector<SupervisionTriple>& triples)
{
    std::string out = "anchor_id,positive_id,negative_id\n";
    for (const auto& t : triples) {
        out += csv_line({t.anchor_id, t.positive_id, t.negative_id});
    }
    return out;
}

}  // namespace emberish
