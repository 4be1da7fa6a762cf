#pragma once

// Minimal UTF-8 decoding plus a fixed character classification table. The
// table is compiled in so cleaning gives the same answer under every locale.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sentiscore::utf8 {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at s[pos] and advances pos. Malformed
// sequences decode to U+FFFD and consume a single byte.
inline char32_t decode(std::string_view s, std::size_t& pos, bool* malformed = nullptr) noexcept {
  if (malformed) *malformed = false;
  auto bad = [&]() noexcept {
    ++pos;
    if (malformed) *malformed = true;
    return kReplacement;
  };
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    return bad();
  }
  if (pos + extra >= s.size()) return bad();
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return bad();
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
  if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return bad();
  pos += extra + 1;
  return cp;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) out.push_back(decode(s, pos));
  return out;
}

inline std::string from_u32(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append(out, cp);
  return out;
}

// Splits a string into its code points, each re-encoded as its own string.
inline std::vector<std::string> characters(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::string ch;
    append(ch, decode(s, pos));
    out.push_back(std::move(ch));
  }
  return out;
}

inline bool is_valid(std::string_view s) noexcept {
  std::size_t pos = 0;
  while (pos < s.size()) {
    bool malformed = false;
    decode(s, pos, &malformed);
    if (malformed) return false;
  }
  return true;
}

// Decimal digits: ASCII and fullwidth forms.
constexpr bool is_digit(char32_t c) noexcept {
  return (c >= U'0' && c <= U'9') || (c >= 0xFF10 && c <= 0xFF19);
}

// Letters of the scripts that appear in review text. Symbols, punctuation,
// emoji and combining marks are not letters.
constexpr bool is_letter(char32_t c) noexcept {
  struct Range {
    char32_t lo, hi;
  };
  constexpr Range kLetters[] = {
      {0x0041, 0x005A}, {0x0061, 0x007A}, {0x00AA, 0x00AA}, {0x00B5, 0x00B5}, {0x00BA, 0x00BA},
      {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x02AF},  // Latin-1, Extended-A/B, IPA
      {0x0370, 0x0373}, {0x0376, 0x0377}, {0x037B, 0x037D}, {0x0386, 0x0386}, {0x0388, 0x03FF},  // Greek
      {0x0400, 0x0481}, {0x048A, 0x052F},                                                          // Cyrillic
      {0x0531, 0x0556}, {0x0561, 0x0587},                                                          // Armenian
      {0x05D0, 0x05EA}, {0x0620, 0x064A},                                                          // Hebrew, Arabic
      {0x0E01, 0x0E30}, {0x1E00, 0x1FFF},                                  // Thai, Latin/Greek extended
      {0x3005, 0x3006}, {0x3041, 0x3096}, {0x30A1, 0x30FA}, {0x30FC, 0x30FF},  // CJK marks, kana
      {0x3105, 0x312F}, {0x31A0, 0x31BF},                                      // Bopomofo
      {0x3400, 0x4DBF}, {0x4E00, 0x9FFF}, {0xF900, 0xFAFF},                    // CJK ideographs
      {0xAC00, 0xD7A3}, {0x1100, 0x11FF}, {0x3131, 0x318E},                    // Hangul
      {0xFF21, 0xFF3A}, {0xFF41, 0xFF5A}, {0xFF66, 0xFF9D},                    // fullwidth/halfwidth
      {0x20000, 0x2FA1F}, {0x30000, 0x3134F},                                  // CJK extensions
  };
  for (const auto& r : kLetters) {
    if (c >= r.lo && c <= r.hi) return true;
  }
  return false;
}

constexpr bool is_alnum(char32_t c) noexcept { return is_letter(c) || is_digit(c); }

}  // namespace sentiscore::utf8
