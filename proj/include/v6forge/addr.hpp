#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "v6forge/errors.hpp"

namespace v6forge::addr {

/// Alphabet for the position half of a word: positions 0..31 map to
/// 0-9 then a-v, so every word is exactly two characters.
inline constexpr char kIndexAlphabet[] = "0123456789abcdefghijklmnopqrstuv";

inline constexpr char kHexDigits[] = "0123456789abcdef";

inline int index_char_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'v') return c - 'a' + 10;
  return -1;
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

/// A 128-bit address stored as 16 octets, most significant first.
class Address {
 public:
  using Bytes = std::array<std::uint8_t, 16>;

  Address() : b_{} {}
  explicit Address(const Bytes& b) : b_(b) {}

  static Address from_halves(std::uint64_t hi, std::uint64_t lo) {
    Bytes b{};
    for (int i = 0; i < 8; ++i) {
      b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
      b[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
    }
    return Address(b);
  }

  const Bytes& bytes() const { return b_; }

  std::uint64_t high64() const {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b_[static_cast<std::size_t>(i)];
    return v;
  }

  std::uint64_t low64() const {
    std::uint64_t v = 0;
    for (int i = 8; i < 16; ++i) v = (v << 8) | b_[static_cast<std::size_t>(i)];
    return v;
  }

  /// Nybble i of 32, most significant first (position 0 is the top nybble).
  int nybble(int i) const {
    if (i < 0 || i > 31) throw IndexError("nybble position out of range: " + std::to_string(i));
    const std::uint8_t byte = b_[static_cast<std::size_t>(i / 2)];
    return (i % 2 == 0) ? (byte >> 4) : (byte & 0x0f);
  }

  void set_nybble(int i, int value) {
    if (i < 0 || i > 31) throw IndexError("nybble position out of range: " + std::to_string(i));
    if (value < 0 || value > 15) throw IndexError("nybble value out of range: " + std::to_string(value));
    std::uint8_t& byte = b_[static_cast<std::size_t>(i / 2)];
    if (i % 2 == 0) {
      byte = static_cast<std::uint8_t>((byte & 0x0f) | (value << 4));
    } else {
      byte = static_cast<std::uint8_t>((byte & 0xf0) | value);
    }
  }

  std::uint16_t group(int g) const {
    return static_cast<std::uint16_t>((b_[static_cast<std::size_t>(2 * g)] << 8) |
                                      b_[static_cast<std::size_t>(2 * g + 1)]);
  }

  auto operator<=>(const Address&) const = default;

 private:
  Bytes b_;
};

struct AddressHash {
  std::size_t operator()(const Address& a) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t byte : a.bytes()) {
      h ^= byte;
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Parses RFC 4291 text (full or ::-compressed, any hex case). Rejects
/// embedded IPv4 dotted forms and zone suffixes.
inline Address parse_address(std::string_view text) {
  const std::string whole(text);
  auto fail = [&](const std::string& why) -> Address {
    throw ParseError("cannot parse \"" + whole + "\": " + why);
  };
  if (text.empty()) return fail("empty string");
  if (text.find('%') != std::string_view::npos) return fail("zone suffix not supported");
  if (text.find('.') != std::string_view::npos) return fail("embedded IPv4 notation not supported");

  // Split on the single optional "::".
  std::size_t gap = text.find("::");
  if (gap != std::string_view::npos && text.find("::", gap + 1) != std::string_view::npos)
    return fail("more than one \"::\"");
  std::string_view left = (gap == std::string_view::npos) ? text : text.substr(0, gap);
  std::string_view right = (gap == std::string_view::npos) ? std::string_view{} : text.substr(gap + 2);

  auto split_groups = [&](std::string_view part, std::vector<std::uint16_t>& out) {
    if (part.empty()) return;
    std::size_t start = 0;
    while (true) {
      const std::size_t colon = part.find(':', start);
      const std::string_view tok =
          part.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
      if (tok.empty()) fail("empty group");
      if (tok.size() > 4) fail("group \"" + std::string(tok) + "\" longer than 4 digits");
      std::uint16_t v = 0;
      for (char c : tok) {
        const int h = hex_value(c);
        if (h < 0) fail("invalid group \"" + std::string(tok) + "\"");
        v = static_cast<std::uint16_t>((v << 4) | h);
      }
      out.push_back(v);
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
  };

  std::vector<std::uint16_t> lg, rg;
  split_groups(left, lg);
  split_groups(right, rg);

  std::array<std::uint16_t, 8> groups{};
  if (gap == std::string_view::npos) {
    if (lg.size() != 8) fail("expected 8 groups, got " + std::to_string(lg.size()));
    for (int i = 0; i < 8; ++i) groups[static_cast<std::size_t>(i)] = lg[static_cast<std::size_t>(i)];
  } else {
    if (lg.size() + rg.size() > 7) fail("\"::\" must replace at least one group");
    for (std::size_t i = 0; i < lg.size(); ++i) groups[i] = lg[i];
    for (std::size_t i = 0; i < rg.size(); ++i) groups[8 - rg.size() + i] = rg[i];
  }

  Address::Bytes b{};
  for (int g = 0; g < 8; ++g) {
    b[static_cast<std::size_t>(2 * g)] = static_cast<std::uint8_t>(groups[static_cast<std::size_t>(g)] >> 8);
    b[static_cast<std::size_t>(2 * g + 1)] = static_cast<std::uint8_t>(groups[static_cast<std::size_t>(g)] & 0xff);
  }
  return Address(b);
}

/// Canonical text per RFC 5952: lowercase, no leading zeros, longest zero
/// run (length >= 2) compressed, leftmost run on ties.
inline std::string format_address(const Address& a) {
  std::array<std::uint16_t, 8> g{};
  for (int i = 0; i < 8; ++i) g[static_cast<std::size_t>(i)] = a.group(i);

  int best_start = -1, best_len = 0;
  for (int i = 0; i < 8;) {
    if (g[static_cast<std::size_t>(i)] != 0) {
      ++i;
      continue;
    }
    int j = i;
    while (j < 8 && g[static_cast<std::size_t>(j)] == 0) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len < 2) best_start = -1;

  std::string out;
  auto append_group = [&](int i) {
    const std::uint16_t v = g[static_cast<std::size_t>(i)];
    char buf[4];
    int n = 0;
    bool started = false;
    for (int shift = 12; shift >= 0; shift -= 4) {
      const int d = (v >> shift) & 0xf;
      if (d != 0 || started || shift == 0) {
        buf[n++] = kHexDigits[d];
        started = true;
      }
    }
    out.append(buf, static_cast<std::size_t>(n));
  };

  if (best_start < 0) {
    for (int i = 0; i < 8; ++i) {
      if (i) out.push_back(':');
      append_group(i);
    }
    return out;
  }
  for (int i = 0; i < best_start; ++i) {
    if (i) out.push_back(':');
    append_group(i);
  }
  out.append("::");
  for (int i = best_start + best_len; i < 8; ++i) {
    if (i > best_start + best_len) out.push_back(':');
    append_group(i);
  }
  return out;
}

/// One nybble tagged with its position: rendered as hex digit + position
/// character, e.g. value 2 at position 10 is "2a".
struct AddressWord {
  std::uint8_t value = 0;  // 0..15
  std::uint8_t index = 0;  // 0..31

  std::string text() const {
    std::string s(2, '0');
    s[0] = kHexDigits[value & 0xf];
    s[1] = kIndexAlphabet[index];
    return s;
  }

  static AddressWord parse(std::string_view s) {
    if (s.size() != 2)
      throw ParseError("word \"" + std::string(s) + "\" must be exactly two characters");
    const int v = hex_value(s[0]);
    const int i = (s[1] >= 'a' && s[1] <= 'z') || (s[1] >= '0' && s[1] <= '9')
                      ? index_char_value(s[1])
                      : -1;
    if (v < 0) throw ParseError("word \"" + std::string(s) + "\" has invalid value digit");
    if (i < 0) throw ParseError("word \"" + std::string(s) + "\" has invalid position character");
    return AddressWord{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(i)};
  }

  auto operator<=>(const AddressWord&) const = default;
};

/// Exactly 32 words; the word at list position i always carries index i.
class WordSequence {
 public:
  WordSequence() : nybbles_{} {}

  static WordSequence from_address(const Address& a) {
    WordSequence s;
    for (int i = 0; i < 32; ++i) s.nybbles_[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(a.nybble(i));
    return s;
  }

  static WordSequence from_words(const std::vector<AddressWord>& words) {
    if (words.size() != 32)
      throw SequenceError("sequence has " + std::to_string(words.size()) + " words, expected 32");
    WordSequence s;
    for (int i = 0; i < 32; ++i) {
      const AddressWord& w = words[static_cast<std::size_t>(i)];
      if (w.index != i)
        throw SequenceError("word at position " + std::to_string(i) + " carries index " +
                            std::to_string(static_cast<int>(w.index)));
      if (w.value > 15)
        throw SequenceError("word at position " + std::to_string(i) + " has value " +
                            std::to_string(static_cast<int>(w.value)));
      s.nybbles_[static_cast<std::size_t>(i)] = w.value;
    }
    return s;
  }

  Address to_address() const {
    Address a;
    for (int i = 0; i < 32; ++i) a.set_nybble(i, nybbles_[static_cast<std::size_t>(i)]);
    return a;
  }

  AddressWord word(int i) const {
    if (i < 0 || i > 31) throw IndexError("word position out of range: " + std::to_string(i));
    return AddressWord{nybbles_[static_cast<std::size_t>(i)], static_cast<std::uint8_t>(i)};
  }

  std::string word_text(int i) const { return word(i).text(); }

  /// All 32 words as space-separated two-character tokens.
  std::string text() const {
    std::string out;
    for (int i = 0; i < 32; ++i) {
      if (i) out.push_back(' ');
      out += word_text(i);
    }
    return out;
  }

  auto operator<=>(const WordSequence&) const = default;

 private:
  std::array<std::uint8_t, 32> nybbles_;
};

inline WordSequence to_words(const Address& a) { return WordSequence::from_address(a); }

inline Address from_words(const WordSequence& s) { return s.to_address(); }

}  // namespace v6forge::addr
