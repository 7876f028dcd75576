#include "emberish/join_result.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "emberish/csv.hpp"
#include "emberish/error.hpp"

namespace emberish {

std::string_view to_string(MatchDirection direction) noexcept
{
    switch (direction) {
    case MatchDirection::base_to_aux: return "base_to_aux";
    case MatchDirection::aux_to_base: return "aux_to_base";
    case MatchDirection::both: return "both";
    }
    return "base_to_aux";
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        throw RuntimeFailure("cannot format number");
    }
    return std::string(buf, ptr);
}

void rerank_by_base(JoinResult& result)
{
    std::vector<std::vector<Match>> groups;
    std::unordered_map<std::string, std::size_t> group_of;
    std::vector<Match> absent_base;
    for (auto& m : result.matches) {
        if (!m.base_id) {
            absent_base.push_back(std::move(m));
            continue;
        }
        auto [it, fresh] = group_of.emplace(*m.base_id, groups.size());
        if (fresh) {
            groups.emplace_back();
        }
        groups[it->second].push_back(std::move(m));
    }
    const ScoreOrder order = result.order;
    result.matches.clear();
    for (auto& g : groups) {
        std::stable_sort(g.begin(), g.end(), [order](const Match& a, const Match& b) {
            if (a.absent() != b.absent()) {
                return !a.absent();
            }
            if (a.absent()) {
                return false;
            }
            if (a.score != b.score) {
                return better(order, a.score, b.score);
            }
            return *a.aux_id < *b.aux_id;
        });
        std::size_t rank = 0;
        for (auto& m : g) {
            m.rank = m.absent() ? 0 : ++rank;
            result.matches.push_back(std::move(m));
        }
    }
    for (auto& m : absent_base) {
        m.rank = 0;
        result.matches.push_back(std::move(m));
    }
}

std::string render_result_csv(const JoinResult& result)
{
    std::string out = result.bidirectional ? "base_id,aux_id,rank,score,direction\n"
                                           : "base_id,aux_id,rank,score\n";
    std::vector<std::string> cells;
    for (const auto& m : result.matches) {
        cells.clear();
        cells.push_back(m.base_id.value_or(""));
        cells.push_back(m.aux_id.value_or(""));
        cells.push_back(std::to_string(m.rank));
        cells.push_back(m.absent() ? std::string{} : format_double(m.score));
        if (result.bidirectional) {
            cells.emplace_back(to_string(m.direction));
        }
        out += csv_line(cells);
    }
    return out;
}

JoinResult parse_result_csv(std::string_view text)
{
    auto rows = parse_csv(text);
    if (rows.empty()) {
        throw ValidationError("result file has no header");
    }
    const auto& header = rows.front().cells;
    const bool bidir = header.size() == 5;
    if (header.size() < 4 || header.size() > 5 || header[0] != "base_id" || header[1] != "aux_id"
        || header[2] != "rank" || header[3] != "score") {
        throw ValidationError("result file must start with header base_id,aux_id,rank,score");
    }
    JoinResult result;
    result.bidirectional = bidir;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& c = rows[r].cells;
        if (c.size() != header.size()) {
            throw ValidationError("malformed result row on line " + std::to_string(rows[r].line));
        }
        Match m;
        if (!c[0].empty()) m.base_id = c[0];
        if (!c[1].empty()) m.aux_id = c[1];
        auto [p1, e1] = std::from_chars(c[2].data(), c[2].data() + c[2].size(), m.rank);
        if (e1 != std::errc{} || p1 != c[2].data() + c[2].size()) {
            throw ValidationError("bad rank on line " + std::to_string(rows[r].line));
        }
        if (c[3].empty()) {
            m.score = std::numeric_limits<double>::quiet_NaN();
        } else {
            auto [p2, e2] = std::from_chars(c[3].data(), c[3].data() + c[3].size(), m.score);
            if (e2 != std::errc{} || p2 != c[3].data() + c[3].size()) {
                throw ValidationError("bad score on line " + std::to_string(rows[r].line));
            }
        }
        if (bidir) {
            if (c[4] == "aux_to_base") m.direction = MatchDirection::aux_to_base;
            else if (c[4] == "both") m.direction = MatchDirection::both;
        }
        result.matches.push_back(std::move(m));
    }
    return result;
}

}  // namespace emberish
