#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "emberish/record.hpp"

namespace emberish {

inline constexpr std::string_view kSeparator = "[SEP]";

enum class TokenizerMode { whitespace, char2gram };

std::string_view to_string(TokenizerMode mode) noexcept;
TokenizerMode parse_tokenizer_mode(std::string_view text);

struct Sentence {
    std::string record_id;
    std::string text;
    std::vector<std::string> tokens;

    bool operator==(const Sentence&) const = default;
};

/// "key value [SEP] key value ..." in stored field order. A field with an
/// empty value contributes its key alone.
std::string sentence_text(const Record& record, std::string_view separator = kSeparator);

/// Sentence with text and tokens filled in.
Sentence prepare_sentence(const Record& record, TokenizerMode mode = TokenizerMode::whitespace,
                          std::string_view separator = kSeparator);

std::vector<Sentence> prepare_dataset(const Dataset& dataset,
                                      TokenizerMode mode = TokenizerMode::whitespace);

/// whitespace: ASCII-lowercase, split on runs of Unicode whitespace.
/// char2gram: ASCII-lowercase, drop whitespace, emit every overlapping pair
/// of code points (a single remaining code point is emitted on its own).
std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode);

/// Two prepared texts joined by one separator; an empty side is dropped
/// together with its padding space.
std::string pair_sentences(const Sentence& first, const Sentence& second,
                           std::string_view separator = kSeparator);

/// JSONL lines {"record_id": ..., "text": ...} for inspection.
std::string render_sentences_jsonl(const std::vector<Sentence>& sentences);

}  // namespace emberish
