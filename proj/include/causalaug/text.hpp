#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace causalaug {

using StringSet = std::unordered_set<std::string>;

// Whitespace tokenization; runs of whitespace collapse, no empty tokens.
std::vector<std::string> split_ws(std::string_view s);

// Number of whitespace tokens.
std::size_t word_count(std::string_view s);

std::string trim(std::string_view s);

// ASCII-only case folding; multibyte sequences pass through unchanged.
std::string lower_ascii(std::string_view s);
bool is_ascii_alpha(char c);

// Token with leading and trailing non-alphanumeric characters removed.
std::string strip_token_punct(std::string_view token);

// Removes at most one trailing '.', '!' or '?' (after trimming whitespace).
std::string strip_one_terminal(std::string_view s);

bool ends_with_terminal(std::string_view s);

// Lowercases the first alphabetic character unless the token holding it is an
// all-caps acronym (two or more letters, all uppercase).
std::string decapitalize_first(std::string_view s);

// Uppercases the first alphabetic character.
std::string capitalize_first(std::string_view s);

// Punctuation-stripped, lowercased, purely alphabetic tokens of length >= 2
// that are not stopwords. Duplicates removed, input order kept.
std::vector<std::string> content_words(std::string_view s, const StringSet& stopwords);

// Built-in English stopword list (also shipped as data/stopwords.txt).
const StringSet& default_stopwords();

bool valid_utf8(std::string_view s);

// One entry per non-empty line; '#' starts a comment line; entries lowercased.
StringSet load_word_list(const std::string& path);

std::string read_file(const std::string& path);

}  // namespace causalaug
