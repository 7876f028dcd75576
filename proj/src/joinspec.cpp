#include "emberish/joinspec.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>

#include "emberish/error.hpp"

namespace emberish {

std::string_view to_string(JoinType type) noexcept
{
    switch (type) {
    case JoinType::inner: return "INNER";
    case JoinType::left: return "LEFT";
    case JoinType::right: return "RIGHT";
    case JoinType::full: return "FULL";
    }
    return "INNER";
}

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

constexpr std::array<std::string_view, 8> kKeywords{
    "INNER", "LEFT", "RIGHT", "FULL", "KEYLESS", "JOIN", "SIZE", "USING"};

bool is_keyword(std::string_view word)
{
    const std::string u = upper(word);
    return std::find(kKeywords.begin(), kKeywords.end(), u) != kKeywords.end();
}

bool ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

enum class Tok { word, number, semicolon, end };

struct Token {
    Tok kind;
    std::string_view text;
    std::size_t offset;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
        if (pos_ >= src_.size()) {
            return {Tok::end, {}, pos_};
        }
        const std::size_t start = pos_;
        const char c = src_[pos_];
        if (c == ';') {
            ++pos_;
            return {Tok::semicolon, src_.substr(start, 1), start};
        }
        if (ident_start(c)) {
            while (pos_ < src_.size() && ident_char(src_[pos_])) {
                ++pos_;
            }
            return {Tok::word, src_.substr(start, pos_ - start), start};
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (pos_ < src_.size() && ident_char(src_[pos_])) {
                ++pos_;
            }
            return {Tok::number, src_.substr(start, pos_ - start), start};
        }
        throw ParseError(std::string("unexpected character '") + c + "'", start);
    }

  private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

class Parser {
  public:
    explicit Parser(std::string_view src) : lexer_(src) { advance(); }

    bool at_end() const { return cur_.kind == Tok::end; }

    JoinSpec statement()
    {
        JoinSpec spec;
        spec.base_ref = identifier("base table reference");

        if (cur_.kind == Tok::word && !is_kw("KEYLESS")) {
            const std::string u = upper(cur_.text);
            if (u == "INNER" || u == "LEFT" || u == "RIGHT" || u == "FULL") {
                spec.join_type = parse_join_type(u);
                advance();
            } else {
                throw ParseError("unknown keyword '" + std::string(cur_.text)
                                     + "' (expected INNER, LEFT, RIGHT, FULL or KEYLESS)",
                                 cur_.offset);
            }
        }
        keyword("KEYLESS");
        keyword("JOIN");
        spec.aux_ref = identifier("auxiliary table reference");
        keyword("LEFT");
        keyword("SIZE");
        spec.left_size = size();
        keyword("RIGHT");
        keyword("SIZE");
        spec.right_size = size();
        if (cur_.kind != Tok::word || !is_kw("USING")) {
            throw ParseError("missing USING clause", cur_.offset);
        }
        advance();
        spec.supervision_ref = identifier("supervision reference");
        if (cur_.kind != Tok::semicolon) {
            throw ParseError("expected ';'", cur_.offset);
        }
        advance();
        return spec;
    }

    void expect_end()
    {
        if (cur_.kind != Tok::end) {
            throw ParseError("unexpected input after statement", cur_.offset);
        }
    }

  private:
    void advance() { cur_ = lexer_.next(); }

    bool is_kw(std::string_view kw) const { return upper(cur_.text) == kw; }

    void keyword(std::string_view kw)
    {
        if (cur_.kind != Tok::word || !is_kw(kw)) {
            if (cur_.kind == Tok::word && !is_keyword(cur_.text)) {
                throw ParseError("unknown keyword '" + std::string(cur_.text) + "' (expected "
                                     + std::string(kw) + ")",
                                 cur_.offset);
            }
            throw ParseError("expected " + std::string(kw), cur_.offset);
        }
        advance();
    }

    std::string identifier(std::string_view what)
    {
        if (cur_.kind != Tok::word || is_keyword(cur_.text)) {
            throw ParseError("expected " + std::string(what), cur_.offset);
        }
        std::string id(cur_.text);
        advance();
        return id;
    }

    std::int64_t size()
    {
        if (cur_.kind != Tok::number) {
            throw ParseError("expected integer size", cur_.offset);
        }
        std::int64_t v = 0;
        const char* first = cur_.text.data();
        const char* last = first + cur_.text.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec == std::errc::result_out_of_range) {
            throw ParseError("size out of range", cur_.offset);
        }
        if (ec != std::errc{} || ptr != last) {
            throw ParseError("size must be an integer", cur_.offset);
        }
        if (v < 1) {
            throw ParseError("size must be ≥ 1", cur_.offset);
        }
        advance();
        return v;
    }

    Lexer lexer_;
    Token cur_{Tok::end, {}, 0};
};

bool valid_identifier(std::string_view s)
{
    if (s.empty() || !ident_start(s.front()) || is_keyword(s)) {
        return false;
    }
    return std::all_of(s.begin(), s.end(), ident_char);
}

}  // namespace

JoinType parse_join_type(std::string_view text)
{
    const std::string u = upper(text);
    if (u == "INNER") return JoinType::inner;
    if (u == "LEFT") return JoinType::left;
    if (u == "RIGHT") return JoinType::right;
    if (u == "FULL") return JoinType::full;
    throw ValidationError("unknown join type '" + std::string(text) + "'");
}

JoinSpec parse_join_spec(std::string_view text)
{
    Parser p(text);
    JoinSpec spec = p.statement();
    p.expect_end();
    return spec;
}

std::vector<JoinSpec> parse_join_specs(std::string_view text)
{
    Parser p(text);
    std::vector<JoinSpec> specs;
    while (!p.at_end()) {
        specs.push_back(p.statement());
    }
    if (specs.empty()) {
        throw ParseError("expected at least one statement", 0);
    }
    return specs;
}

std::string render_join_spec(const JoinSpec& spec)
{
    for (const auto* id : {&spec.base_ref, &spec.aux_ref, &spec.supervision_ref}) {
        if (!valid_identifier(*id)) {
            throw ValidationError("invalid identifier '" + *id + "'");
        }
    }
    if (spec.left_size < 1 || spec.right_size < 1) {
        throw ValidationError("size must be ≥ 1");
    }
    std::string out = spec.base_ref;
    out += ' ';
    out += to_string(spec.join_type);
    out += " KEYLESS JOIN ";
    out += spec.aux_ref;
    out += " LEFT SIZE " + std::to_string(spec.left_size);
    out += " RIGHT SIZE " + std::to_string(spec.right_size);
    out += " USING " + spec.supervision_ref + ";";
    return out;
}

}  // namespace emberish
