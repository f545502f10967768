#include "causalaug/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "causalaug/error.hpp"

namespace causalaug {

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_alnum(char c) {
  return is_ascii_alpha(c) || (c >= '0' && c <= '9');
}

}  // namespace

bool is_ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    while (i < n && is_ws(s[i])) ++i;
    std::size_t start = i;
    while (i < n && !is_ws(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::size_t word_count(std::string_view s) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : s) {
    if (is_ws(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string strip_token_punct(std::string_view token) {
  std::size_t b = 0, e = token.size();
  while (b < e && !is_ascii_alnum(token[b]) && static_cast<unsigned char>(token[b]) < 0x80) ++b;
  while (e > b && !is_ascii_alnum(token[e - 1]) && static_cast<unsigned char>(token[e - 1]) < 0x80) --e;
  return std::string(token.substr(b, e - b));
}

std::string strip_one_terminal(std::string_view s) {
  std::string t = trim(s);
  if (!t.empty()) {
    char last = t.back();
    if (last == '.' || last == '!' || last == '?') t.pop_back();
  }
  return t;
}

bool ends_with_terminal(std::string_view s) {
  if (s.empty()) return false;
  char c = s.back();
  return c == '.' || c == '!' || c == '?';
}

namespace {

// [token_start, token_end) of the whitespace token containing position pos.
void token_bounds(std::string_view s, std::size_t pos, std::size_t& b, std::size_t& e) {
  b = pos;
  while (b > 0 && !is_ws(s[b - 1])) --b;
  e = pos;
  while (e < s.size() && !is_ws(s[e])) ++e;
}

bool is_acronym(std::string_view token) {
  int letters = 0;
  for (char c : token) {
    if (is_ascii_alpha(c)) {
      if (c >= 'a' && c <= 'z') return false;
      ++letters;
    }
  }
  return letters >= 2;
}

}  // namespace

std::string decapitalize_first(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (is_ascii_alpha(out[i])) {
      std::size_t b, e;
      token_bounds(out, i, b, e);
      if (!is_acronym(std::string_view(out).substr(b, e - b)) && out[i] >= 'A' && out[i] <= 'Z') {
        out[i] = static_cast<char>(out[i] - 'A' + 'a');
      }
      break;
    }
  }
  return out;
}

std::string capitalize_first(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (is_ascii_alpha(c)) {
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
      break;
    }
  }
  return out;
}

std::vector<std::string> content_words(std::string_view s, const StringSet& stopwords) {
  std::vector<std::string> out;
  StringSet seen;
  for (const auto& raw : split_ws(s)) {
    std::string tok = lower_ascii(strip_token_punct(raw));
    if (tok.size() < 2) continue;
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'a' && c <= 'z'; })) continue;
    if (stopwords.count(tok)) continue;
    if (seen.insert(tok).second) out.push_back(std::move(tok));
  }
  return out;
}

const StringSet& default_stopwords() {
  static const StringSet kStopwords = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
      "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
      "between", "both", "but", "by", "can", "cannot", "could", "did", "do", "does",
      "doing", "down", "during", "each", "few", "for", "from", "further", "had",
      "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
      "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
      "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
      "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
      "over", "own", "same", "she", "should", "so", "some", "such", "than", "that",
      "the", "their", "theirs", "them", "themselves", "then", "there", "these",
      "they", "this", "those", "through", "to", "too", "under", "until", "up",
      "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
      "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
      "yourselves"};
  return kStopwords;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    unsigned cp_min;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp_min = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp_min = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp_min = 0x10000;
    } else {
      return false;
    }
    if (i + len > n) return false;
    unsigned cp = c & (0xFF >> (len + 1));
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp < cp_min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

StringSet load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open word list: " + path);
  StringSet set;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    set.insert(lower_ascii(t));
  }
  return set;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace causalaug
