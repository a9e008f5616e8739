#include "raggen/text.hpp"

#include <algorithm>
#include <cctype>

namespace raggen::text {

namespace {

bool is_space_codepoint(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 sequence starting at `i`; malformed bytes are passed
// through as single opaque characters so arbitrary input never throws.
uint32_t decode_utf8(std::string_view s, size_t i, size_t* len) {
  const auto byte = [&](size_t j) { return static_cast<unsigned char>(s[j]); };
  unsigned char c = byte(i);
  if (c < 0x80) {
    *len = 1;
    return c;
  }
  size_t need = 0;
  uint32_t cp = 0;
  if ((c & 0xE0) == 0xC0) {
    need = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    need = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    need = 3;
    cp = c & 0x07;
  } else {
    *len = 1;
    return 0xFFFD;
  }
  for (size_t j = 1; j <= need; ++j) {
    if (i + j >= s.size() || (byte(i + j) & 0xC0) != 0x80) {
      *len = 1;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(i + j) & 0x3F);
  }
  *len = need + 1;
  return cp;
}

bool is_ascii_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (c == ' ') {
      pending = !out.empty();
      continue;
    }
    if (pending) {
      out.push_back(' ');
      pending = false;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  size_t i = 0;
  while (i < s.size()) {
    size_t len = 0;
    uint32_t cp = decode_utf8(s, i, &len);
    if (is_space_codepoint(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.append(s.substr(i, len));
    }
    i += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string normalize_light(std::string_view s) {
  std::string mapped;
  mapped.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    size_t len = 0;
    uint32_t cp = decode_utf8(s, i, &len);
    if (len == 1) {
      char c = s[i];
      if (is_ascii_alnum(c)) {
        mapped.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      } else {
        mapped.push_back(' ');
      }
    } else if (is_space_codepoint(cp)) {
      mapped.push_back(' ');
    } else {
      mapped.append(s.substr(i, len));
    }
    i += len;
  }
  return collapse_spaces(mapped);
}

std::vector<std::string> light_tokens(std::string_view s) {
  return split_spaces(normalize_light(s));
}

std::string normalize_qa(std::string_view s) {
  auto tokens = light_tokens(s);
  std::string out;
  for (const auto& t : tokens) {
    if (t == "a" || t == "an" || t == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::vector<std::string> qa_tokens(std::string_view s) {
  return split_spaces(normalize_qa(s));
}

bool contains_normalized(std::string_view hay, std::string_view needle) {
  std::string n = normalize_light(needle);
  if (n.empty()) return false;
  return normalize_light(hay).find(n) != std::string::npos;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  return lower_ascii(hay).find(lower_ascii(needle)) != std::string::npos;
}

std::string trim(std::string_view s) {
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end) {
    size_t len = 0;
    if (!is_space_codepoint(decode_utf8(s, begin, &len))) break;
    begin += len;
  }
  // Trailing trim scans forward from `begin`; UTF-8 cannot be decoded backwards.
  size_t last_non_space_end = begin;
  size_t i = begin;
  while (i < end) {
    size_t len = 0;
    uint32_t cp = decode_utf8(s, i, &len);
    i += len;
    if (!is_space_codepoint(cp)) last_non_space_end = i;
  }
  return std::string(s.substr(begin, last_non_space_end - begin));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace raggen::text
