#include "gdr/text.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>

namespace gdr::text {
namespace {

struct CodepointRange {
    char32_t lo;
    char32_t hi;
};

struct LowerMapping {
    char32_t cp;
    const char* lower;
};

#include "unicode_tables.inc"

constexpr char32_t kInvalid = 0x110000;

template <std::size_t N>
bool in_ranges(const CodepointRange (&table)[N], char32_t cp) {
    auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                               [](char32_t v, const CodepointRange& r) { return v < r.lo; });
    if (it == std::begin(table)) return false;
    --it;
    return cp <= it->hi;
}

struct Decoded {
    char32_t cp;
    std::size_t len;
};

// Invalid sequences decode as a single opaque byte.
Decoded decode(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {kInvalid, 1};
    }
    if (i + len > s.size()) return {kInvalid, 1};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return {kInvalid, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

bool is_word_char(char32_t cp) { return in_ranges(kWordChar, cp); }

const char* lower_of(char32_t cp) {
    auto it = std::lower_bound(std::begin(kLower), std::end(kLower), cp,
                               [](const LowerMapping& m, char32_t v) { return m.cp < v; });
    if (it != std::end(kLower) && it->cp == cp) return it->lower;
    return nullptr;
}

bool is_ascii_punct(unsigned char c) {
    // Python's string.punctuation
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Whitespace-delimited pieces as [begin, end) byte ranges.
template <typename Fn>
void for_each_piece(std::string_view s, Fn&& fn) {
    std::size_t i = 0;
    std::size_t start = 0;
    bool in_piece = false;
    while (i < s.size()) {
        const auto d = decode(s, i);
        const bool ws = is_unicode_whitespace(d.cp);
        if (ws && in_piece) {
            fn(start, i);
            in_piece = false;
        } else if (!ws && !in_piece) {
            start = i;
            in_piece = true;
        }
        i += d.len;
    }
    if (in_piece) fn(start, s.size());
}

// Strip leading/trailing P* code points from a piece.
std::string_view strip_punct(std::string_view piece) {
    std::size_t b = 0;
    while (b < piece.size()) {
        const auto d = decode(piece, b);
        if (!is_unicode_punctuation(d.cp)) break;
        b += d.len;
    }
    std::size_t e = piece.size();
    while (e > b) {
        // Walk back to the lead byte of the last code point.
        std::size_t lead = e - 1;
        while (lead > b && (static_cast<unsigned char>(piece[lead]) & 0xC0) == 0x80) --lead;
        const auto d = decode(piece, lead);
        if (d.len != e - lead || !is_unicode_punctuation(d.cp)) break;
        e = lead;
    }
    return piece.substr(b, e - b);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    if (from.empty()) return;
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (true) {
        const auto hit = s.find(from, pos);
        if (hit == std::string::npos) break;
        out.append(s, pos, hit - pos);
        out.append(to);
        pos = hit + from.size();
    }
    out.append(s, pos, std::string::npos);
    s = std::move(out);
}

bool in_13a_symbol_class(char c) {
    // [\{-\~\[-\` -\&\(-\+\:-\@\/]
    return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') ||
           (c >= '(' && c <= '+') || (c >= ':' && c <= '@') || c == '/';
}

// The four substitutions below reproduce Python re.sub's left-to-right,
// non-overlapping scan for each pattern of SacreBLEU's regexp tokenizer.
// Working on bytes is equivalent: every pattern anchors on ASCII bytes and
// "[^0-9]" never needs to see past the first byte of a multi-byte char.
std::string pad_symbols(std::string_view s) {
    std::string out;
    out.reserve(s.size() * 2);
    for (char c : s) {
        if (in_13a_symbol_class(c)) {
            out.push_back(' ');
            out.push_back(c);
            out.push_back(' ');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

// ([^0-9])([\.,]) -> \1 \2 ; consumes both characters.
std::string split_period_comma_after_nondigit(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && !is_digit(s[i]) && (s[i + 1] == '.' || s[i + 1] == ',')) {
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back(s[i + 1]);
            out.push_back(' ');
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

// ([\.,])([^0-9]) -> " \1 \2"
std::string split_period_comma_before_nondigit(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && (s[i] == '.' || s[i] == ',') && !is_digit(s[i + 1])) {
            out.push_back(' ');
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back(s[i + 1]);
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

// ([0-9])(-) -> "\1 \2 "
std::string split_dash_after_digit(std::string_view s) {
    std::string out;
    out.reserve(s.size() + s.size() / 4);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && is_digit(s[i]) && s[i + 1] == '-') {
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back('-');
            out.push_back(' ');
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

}  // namespace

bool is_unicode_whitespace(char32_t cp) { return in_ranges(kWhitespace, cp); }
bool is_unicode_punctuation(char32_t cp) { return in_ranges(kPunctuation, cp); }

std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
            ++i;
            continue;
        }
        const auto d = decode(s, i);
        if (const char* low = d.cp == kInvalid ? nullptr : lower_of(d.cp)) {
            out.append(low);
        } else {
            out.append(s.substr(i, d.len));
        }
        i += d.len;
    }
    return out;
}

TokenList split_whitespace(std::string_view s) {
    TokenList out;
    for_each_piece(s, [&](std::size_t b, std::size_t e) { out.emplace_back(s.substr(b, e - b)); });
    return out;
}

std::string_view rstrip(std::string_view s) {
    std::size_t e = s.size();
    while (e > 0) {
        std::size_t lead = e - 1;
        while (lead > 0 && (static_cast<unsigned char>(s[lead]) & 0xC0) == 0x80) --lead;
        const auto d = decode(s, lead);
        if (d.len != e - lead || !is_unicode_whitespace(d.cp)) break;
        e = lead;
    }
    return s.substr(0, e);
}

std::string_view strip(std::string_view s) {
    s = rstrip(s);
    std::size_t b = 0;
    while (b < s.size()) {
        const auto d = decode(s, b);
        if (!is_unicode_whitespace(d.cp)) break;
        b += d.len;
    }
    return s.substr(b);
}

std::size_t utf8_byte_offset(std::string_view s, std::size_t cp_index) {
    std::size_t i = 0;
    for (std::size_t n = 0; n < cp_index && i < s.size(); ++n) i += decode(s, i).len;
    return i;
}

std::vector<TokenSpan> index_tokenize_spans(std::string_view s) {
    std::vector<TokenSpan> out;
    for_each_piece(s, [&](std::size_t b, std::size_t e) {
        const auto core = strip_punct(s.substr(b, e - b));
        if (!core.empty()) out.push_back({to_lower(core), b, e});
    });
    return out;
}

TokenList index_tokenize(std::string_view s) {
    TokenList out;
    for_each_piece(s, [&](std::size_t b, std::size_t e) {
        const auto core = strip_punct(s.substr(b, e - b));
        if (!core.empty()) out.push_back(to_lower(core));
    });
    return out;
}

std::size_t index_token_count(std::string_view s) {
    std::size_t n = 0;
    for_each_piece(s, [&](std::size_t b, std::size_t e) {
        if (!strip_punct(s.substr(b, e - b)).empty()) ++n;
    });
    return n;
}

std::string truncate_index_tokens(std::string_view s, std::size_t max_tokens) {
    std::size_t n = 0;
    std::size_t cut = std::string_view::npos;
    for_each_piece(s, [&](std::size_t b, std::size_t e) {
        if (cut != std::string_view::npos) return;
        if (strip_punct(s.substr(b, e - b)).empty()) return;
        if (++n == max_tokens) cut = e;
    });
    if (max_tokens == 0) return {};
    if (cut == std::string_view::npos) return std::string(s);
    // Within budget if nothing but whitespace or token-free pieces follow.
    if (index_token_count(s.substr(cut)) == 0) return std::string(s);
    return std::string(s.substr(0, cut));
}

TokenList squad_normalize(std::string_view s) {
    const std::string lowered = to_lower(s);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (char c : lowered) {
        if (!is_ascii_punct(static_cast<unsigned char>(c))) no_punct.push_back(c);
    }
    // \b(a|an|the)\b: a maximal run of word characters equal to an article.
    std::string no_articles;
    no_articles.reserve(no_punct.size());
    std::size_t i = 0;
    while (i < no_punct.size()) {
        const auto d = decode(no_punct, i);
        if (!is_word_char(d.cp)) {
            no_articles.append(no_punct, i, d.len);
            i += d.len;
            continue;
        }
        std::size_t j = i;
        while (j < no_punct.size()) {
            const auto dj = decode(no_punct, j);
            if (!is_word_char(dj.cp)) break;
            j += dj.len;
        }
        const std::string_view run(no_punct.data() + i, j - i);
        if (run == "a" || run == "an" || run == "the") {
            no_articles.push_back(' ');
        } else {
            no_articles.append(run);
        }
        i = j;
    }
    return split_whitespace(no_articles);
}

TokenList tokenize_13a(std::string_view text) {
    std::string line(text);
    replace_all(line, "<skipped>", "");
    replace_all(line, "-\n", "");
    replace_all(line, "\n", " ");
    if (line.find('&') != std::string::npos) {
        replace_all(line, "&quot;", "\"");
        replace_all(line, "&amp;", "&");
        replace_all(line, "&lt;", "<");
        replace_all(line, "&gt;", ">");
    }
    line = " " + line + " ";
    line = pad_symbols(line);
    line = split_period_comma_after_nondigit(line);
    line = split_period_comma_before_nondigit(line);
    line = split_dash_after_digit(line);
    return split_whitespace(line);
}

std::string join(const TokenList& tokens, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.append(sep);
        out.append(tokens[i]);
    }
    return out;
}

}  // namespace gdr::text
