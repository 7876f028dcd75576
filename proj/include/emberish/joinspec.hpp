#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emberish {

enum class JoinType { inner, left, right, full };

std::string_view to_string(JoinType type) noexcept;

/// Case-insensitive; throws ValidationError for anything else.
JoinType parse_join_type(std::string_view text);

/// A parsed keyless join statement:
///
///   base [INNER|LEFT|RIGHT|FULL] KEYLESS JOIN aux
///     LEFT SIZE <n> RIGHT SIZE <m> USING <supervision>;
///
/// left_size bounds how many base records one aux record may match,
/// right_size how many aux records one base record may match.
struct JoinSpec {
    std::string base_ref;
    std::string aux_ref;
    JoinType join_type = JoinType::inner;
    std::int64_t left_size = 1;
    std::int64_t right_size = 10;
    std::string supervision_ref;

    bool operator==(const JoinSpec&) const = default;
};

/// Parses exactly one statement terminated by ';'. Keywords are
/// case-insensitive, identifiers case-sensitive. Errors are ParseError with
/// the byte offset of the offending token.
JoinSpec parse_join_spec(std::string_view text);

/// Parses a sequence of statements (one chain stage each).
std::vector<JoinSpec> parse_join_specs(std::string_view text);

/// Canonical upper-case rendering; parse_join_spec(render_join_spec(s)) == s.
std::string render_join_spec(const JoinSpec& spec);

}  // namespace emberish
