// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "emberish/random.hpp"
#include "emberish/record.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path()
            / ("emberish-" + tag + "-" + std::to_string(::getpid()) + "-"
               + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

using Row = std::pair<std::string, std::vector<std::pair<std::string, std::string>>>;

inline emberish::Dataset make_dataset(const std::string& name, emberish::Role role,
                                      const std::vector<Row>& rows)
{
    std::vector<emberish::Record> records;
    for (const auto& [id, fields] : rows) {
        emberish::Record r{id, {}};
        for (const auto& [k, v] : fields) r.fields.push_back({k, v});
        records.push_back(std::move(r));
    }
    return emberish::Dataset(name, role, std::move(records));
}

/// Single-column dataset {"text": texts[i]} with ids prefix + i.
inline emberish::Dataset text_dataset(const std::string& prefix, emberish::Role role,
                                      const std::vector<std::string>& texts)
{
    std::vector<Row> rows;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        rows.push_back({prefix + std::to_string(i), {{"text", texts[i]}}});
    }
    return make_dataset(prefix, role, rows);
}

inline std::string random_word(emberish::Rng& rng, std::size_t max_len, const std::string& alphabet)
{
    const std::size_t n = rng.uniform_index(max_len + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.uniform_index(alphabet.size())];
    return s;
}

inline std::vector<double> random_vector(emberish::Rng& rng, std::size_t d)
{
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    return v;
}

inline double relative_error(double a, double b)
{
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / scale;
}

}  // namespace testing
