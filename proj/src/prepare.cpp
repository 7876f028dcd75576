#include "emberish/prepare.hpp"

#include <json.hpp>

#include "emberish/error.hpp"

namespace emberish {

std::string_view to_string(TokenizerMode mode) noexcept
{
    return mode == TokenizerMode::char2gram ? "char2gram" : "whitespace";
}

TokenizerMode parse_tokenizer_mode(std::string_view text)
{
    if (text == "whitespace") return TokenizerMode::whitespace;
    if (text == "char2gram") return TokenizerMode::char2gram;
    throw ValidationError("unknown tokenizer '" + std::string(text)
                          + "' (expected whitespace or char2gram)");
}

namespace {

struct CodePoint {
    char32_t value;
    std::size_t offset;
    std::size_t length;
};

// Lenient UTF-8 decoding: invalid bytes become one-byte code points.
std::vector<CodePoint> decode_utf8(std::string_view s)
{
    std::vector<CodePoint> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        char32_t cp = b0;
        if (b0 >= 0xC0 && b0 < 0xE0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if (b0 >= 0xE0 && b0 < 0xF0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if (b0 >= 0xF0 && b0 < 0xF8) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len == 1 || i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            len = 1;
            cp = b0;
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

bool is_unicode_space(char32_t c)
{
    switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

char ascii_lower(char c)
{
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

void append_lower(std::string& out, std::string_view bytes)
{
    for (char c : bytes) {
        out.push_back(ascii_lower(c));
    }
}

}  // namespace

std::string sentence_text(const Record& record, std::string_view separator)
{
    std::string out;
    for (std::size_t i = 0; i < record.fields.size(); ++i) {
        const Field& f = record.fields[i];
        if (i > 0) {
            out += ' ';
            out += separator;
            out += ' ';
        }
        out += f.key;
        if (!f.value.empty()) {
            out += ' ';
            out += f.value;
        }
    }
    return out;
}

Sentence prepare_sentence(const Record& record, TokenizerMode mode, std::string_view separator)
{
    Sentence s;
    s.record_id = record.id;
    s.text = sentence_text(record, separator);
    s.tokens = tokenize(s.text, mode);
    return s;
}

std::vector<Sentence> prepare_dataset(const Dataset& dataset, TokenizerMode mode)
{
    std::vector<Sentence> out;
    out.reserve(dataset.size());
    for (const auto& r : dataset.records()) {
        out.push_back(prepare_sentence(r, mode));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode)
{
    const auto cps = decode_utf8(text);
    std::vector<std::string> tokens;
    if (mode == TokenizerMode::whitespace) {
        std::string cur;
        for (const auto& cp : cps) {
            if (is_unicode_space(cp.value)) {
                if (!cur.empty()) {
                    tokens.push_back(std::move(cur));
                    cur.clear();
                }
            } else {
                append_lower(cur, text.substr(cp.offset, cp.length));
            }
        }
        if (!cur.empty()) {
            tokens.push_back(std::move(cur));
        }
        return tokens;
    }

    std::vector<std::string_view> chars;
    chars.reserve(cps.size());
    for (const auto& cp : cps) {
        if (!is_unicode_space(cp.value)) {
            chars.push_back(text.substr(cp.offset, cp.length));
        }
    }
    if (chars.size() == 1) {
        std::string t;
        append_lower(t, chars[0]);
        tokens.push_back(std::move(t));
        return tokens;
    }
    for (std::size_t i = 0; i + 1 < chars.size(); ++i) {
        std::string t;
        append_lower(t, chars[i]);
        append_lower(t, chars[i + 1]);
        tokens.push_back(std::move(t));
    }
    return tokens;
}

std::string pair_sentences(const Sentence& first, const Sentence& second,
                           std::string_view separator)
{
    std::string out;
    if (!first.text.empty()) {
        out += first.text;
        out += ' ';
    }
    out += separator;
    if (!second.text.empty()) {
        out += ' ';
        out += second.text;
    }
    return out;
}

std::string render_sentences_jsonl(const std::vector<Sentence>& sentences)
{
    std::string out;
    for (const auto& s : sentences) {
        nlohmann::ordered_json j;
        j["record_id"] = s.record_id;
        j["text"] = s.text;
        out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

}  // namespace emberish
