#include "adafuse/text.hpp"

namespace adafuse::text {

char32_t next_codepoint(std::string_view s, std::size_t& pos) {
  constexpr char32_t kReplacement = 0xFFFD;
  const auto lead = static_cast<unsigned char>(s[pos]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++pos;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + len > s.size()) {
    ++pos;
    return kReplacement;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += len;
  return cp;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::vector<std::string_view> codepoints(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    next_codepoint(s, pos);
    out.push_back(s.substr(start, pos - start));
  }
  return out;
}

bool has_content(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (!is_space(next_codepoint(s, pos))) return true;
  }
  return false;
}

bool is_all_space(std::string_view s) { return !has_content(s); }

std::optional<std::size_t> first_word_end(std::string_view s) {
  std::size_t pos = 0;
  bool seen_content = false;
  while (pos < s.size()) {
    const std::size_t start = pos;
    const bool space = is_space(next_codepoint(s, pos));
    if (!space) {
      seen_content = true;
    } else if (seen_content) {
      return start;
    }
  }
  return std::nullopt;
}

std::string_view word_separator(std::string_view s, std::size_t end) {
  std::size_t pos = end;
  while (pos < s.size()) {
    const char32_t cp = next_codepoint(s, pos);
    if (!is_space(cp)) break;
    if (cp == U'\n') return "\n";
  }
  return " ";
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  std::size_t pos = 0;
  bool pending_space = false;
  while (pos < s.size()) {
    const std::size_t start = pos;
    if (is_space(next_codepoint(s, pos))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(s.substr(start, pos - start));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::string current;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    if (is_space(next_codepoint(s, pos))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.append(s.substr(start, pos - start));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace adafuse::text
