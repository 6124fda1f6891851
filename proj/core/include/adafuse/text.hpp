#pragma once

// UTF-8 helpers shared by the tokenizers and the word segmenter. Word
// boundaries are defined on decoded text with Unicode whitespace as the
// separator class; scripts that do not separate words with whitespace are
// not segmented.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adafuse::text {

// Decodes the code point starting at `pos` and advances `pos`. Invalid or
// truncated sequences yield U+FFFD and consume one byte.
char32_t next_codepoint(std::string_view s, std::size_t& pos);

bool is_space(char32_t cp);

// Splits into per-code-point byte slices (invalid bytes become 1-byte slices).
std::vector<std::string_view> codepoints(std::string_view s);

bool has_content(std::string_view s);
bool is_all_space(std::string_view s);

// Byte offset of the first whitespace code point that follows a
// non-whitespace code point, i.e. the end of the first complete word.
std::optional<std::size_t> first_word_end(std::string_view s);

// Separator kept after a word whose whitespace run starts at `end`: "\n" if
// the run contains a line feed, else " ".
std::string_view word_separator(std::string_view s, std::size_t end);

// Collapses whitespace runs to single spaces and trims both ends.
std::string collapse_spaces(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

}  // namespace adafuse::text
