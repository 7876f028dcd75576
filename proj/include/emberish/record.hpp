#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace emberish {

struct Field {
    std::string key;
    std::string value;  ///< numbers are kept as their decimal rendering

    bool operator==(const Field&) const = default;
};

/// One row of a dataset: a stable id plus ordered key/value fields.
struct Record {
    std::string id;
    std::vector<Field> fields;

    /// Value of the first field named `key`, or nullptr.
    const std::string* find(std::string_view key) const;

    bool operator==(const Record&) const = default;
};

enum class Role { base, auxiliary };

enum class FileFormat { csv, jsonl };

/// An immutable table of records. Ids are unique; the id->index map is
/// built once on construction.
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::string name, Role role, std::vector<Record> records,
            std::vector<std::string> column_names = {});

    const std::string& name() const noexcept { return name_; }
    Role role() const noexcept { return role_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    const std::vector<std::string>& column_names() const noexcept { return columns_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const Record& operator[](std::size_t i) const { return records_[i]; }

    std::optional<std::size_t> index_of(const std::string& id) const;
    bool contains(const std::string& id) const { return index_of(id).has_value(); }

    /// Same records under a different role; content is untouched.
    Dataset with_role(Role role) const;

  private:
    std::string name_;
    Role role_ = Role::base;
    std::vector<Record> records_;
    std::vector<std::string> columns_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

Dataset load_dataset(const std::filesystem::path& path, FileFormat format,
                     Role role = Role::base);

/// Format chosen from the extension: ".jsonl" or ".json" select JSONL,
/// anything else CSV.
Dataset load_dataset(const std::filesystem::path& path, Role role = Role::base);

Dataset parse_csv_dataset(std::string_view text, std::string name, Role role);
Dataset parse_jsonl_dataset(std::string_view text, std::string name, Role role);

/// CSV rendering with an `id` column first, then the declared columns.
std::string render_dataset_csv(const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

struct SupervisionPair {
    std::string base_id;
    std::string aux_id;

    bool operator==(const SupervisionPair&) const = default;
};

struct SupervisionTriple {
    std::string anchor_id;
    std::string positive_id;
    std::string negative_id;

    bool operator==(const SupervisionTriple&) const = default;
};

/// Labeled relatedness: either pairs or triples, never both.
struct Supervision {
    std::vector<SupervisionPair> pairs;
    std::vector<SupervisionTriple> triples;

    bool is_triples() const noexcept { return !triples.empty(); }
    std::size_t size() const noexcept { return is_triples() ? triples.size() : pairs.size(); }
};

/// Parses a supervision CSV; the kind follows the column count
/// (base_id,aux_id or anchor_id,positive_id,negative_id).
Supervision parse_supervision(std::string_view text);

/// Reads and resolves supervision against the two datasets. Every
/// unresolvable row is listed in the thrown ValidationError.
Supervision load_supervision(const std::filesystem::path& path, const Dataset& base,
                             const Dataset& aux);

void validate_supervision(const Supervision& supervision, const Dataset& base,
                          const Dataset& aux);

std::string render_pairs_csv(const std::vector<SupervisionPair>& pairs);
std::string render_triples_csv(const std::vector<SupervisionTriple>& triples);

}  // namespace emberish
