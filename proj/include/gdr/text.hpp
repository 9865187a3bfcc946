#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gdr::text {

/// Ordered tokens; no token is empty or contains whitespace.
using TokenList = std::vector<std::string>;

/// A token together with the byte range of the whitespace-delimited piece
/// it was cut from. The piece may carry punctuation the token dropped.
struct TokenSpan {
    std::string token;
    std::size_t piece_begin = 0;
    std::size_t piece_end = 0;
};

/// Lowercase, split on whitespace, strip leading/trailing Unicode
/// punctuation (general category P*) from each piece, drop empties.
/// Used for BM25 terms, window sizes and query budgets.
TokenList index_tokenize(std::string_view text);
std::vector<TokenSpan> index_tokenize_spans(std::string_view text);
std::size_t index_token_count(std::string_view text);

/// Returns the prefix of `text` holding its first `max_tokens` index tokens,
/// cut right after the piece of the last kept token. Text within budget is
/// returned unchanged.
std::string truncate_index_tokens(std::string_view text, std::size_t max_tokens);

/// SQuAD answer normalization: lowercase, remove ASCII punctuation, remove
/// the articles a/an/the as whole words, split on whitespace.
TokenList squad_normalize(std::string_view text);

/// mteval-v13a tokenization as done by SacreBLEU (case preserved).
TokenList tokenize_13a(std::string_view text);

std::string join(const TokenList& tokens, std::string_view sep = " ");

/// Split on whitespace only (Python str.split() semantics).
TokenList split_whitespace(std::string_view text);

/// Python str.lower() semantics.
std::string to_lower(std::string_view text);

/// Python str.rstrip() semantics.
std::string_view rstrip(std::string_view text);
std::string_view strip(std::string_view text);

/// UTF-8 byte offset of the `cp_index`-th code point (clamped to size).
std::size_t utf8_byte_offset(std::string_view text, std::size_t cp_index);

bool is_unicode_whitespace(char32_t cp);
bool is_unicode_punctuation(char32_t cp);

}  // namespace gdr::text
