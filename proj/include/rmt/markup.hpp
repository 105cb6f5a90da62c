// markup.hpp -- codecs for the auxiliary surface tokens.
//
// SCAN outputs carry a 1-based counter after each repetition unit and a "||"
// between sub-sequences:  "JUMP 1 JUMP 2 || WALK 1 WALK 2".
// Numbers carry positional letters, most significant first, A = ones:
// "C 7 B 8 A 0" is 780.  Stripping is lenient about counter values (a model
// that miscounts but acts correctly still scores) and strict about the
// action vocabulary.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmt/scan.hpp"
#include "rmt/util.hpp"

namespace rmt::markup {

class MalformedMarkup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ForeignToken : public std::runtime_error {
 public:
  explicit ForeignToken(const std::string& tok)
      : std::runtime_error("token outside the action/markup vocabulary: '" + tok + "'") {}
};

// Wide enough for any letter-tagged number (26 digits < 2^87).
__extension__ typedef unsigned __int128 BigValue;

inline std::string decimal_string(BigValue v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s += static_cast<char>('0' + static_cast<int>(v % 10));
    v /= 10;
  }
  return {s.rbegin(), s.rend()};
}

inline char position_letter(int index) {
  if (index < 0 || index > 25)
    throw RangeError("position letter index out of range: " + std::to_string(index));
  return static_cast<char>('A' + index);
}

constexpr std::uint64_t kMaxEncodable = 1000000000000000ull;  // 10^15

inline std::string encode_number_markup(std::uint64_t n) {
  if (n >= kMaxEncodable)
    throw RangeError("number too large for positional markup: " + std::to_string(n));
  std::string digits = std::to_string(n);
  std::string out;
  int pos = static_cast<int>(digits.size()) - 1;
  for (char d : digits) {
    if (!out.empty()) out += ' ';
    out += position_letter(pos--);
    out += ' ';
    out += d;
  }
  return out;
}

// Inverse of encode_number_markup over arbitrary completion text.  Letters
// must descend one position at a time and end at A; counter values of any
// leading digit (including zero) are accepted since model output is scored
// on the decoded value alone.
inline BigValue decode_number_markup(std::string_view text) {
  auto toks = util::split_ws(text);
  if (toks.empty() || toks.size() % 2 != 0)
    throw MalformedMarkup("expected letter/digit pairs, got " + std::to_string(toks.size()) +
                          " tokens");
  std::size_t pairs = toks.size() / 2;
  if (pairs > 26) throw MalformedMarkup("more positions than letters");
  BigValue value = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::string& letter = toks[2 * i];
    const std::string& digit = toks[2 * i + 1];
    int expect = static_cast<int>(pairs - 1 - i);
    if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'Z')
      throw MalformedMarkup("expected a position letter, got '" + letter + "'");
    if (letter[0] != 'A' + expect)
      throw MalformedMarkup(std::string("expected position ") + position_letter(expect) +
                            ", got '" + letter + "'");
    if (digit.size() != 1 || digit[0] < '0' || digit[0] > '9')
      throw MalformedMarkup("expected a digit, got '" + digit + "'");
    value = value * 10 + static_cast<BigValue>(digit[0] - '0');
  }
  return value;
}

inline std::string encode_scan_markup(const scan::StructuredActions& sa) {
  std::string out;
  for (std::size_t s = 0; s < sa.subsequences.size(); ++s) {
    if (s > 0) out += " || ";
    const auto& units = sa.subsequences[s].units;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (u > 0) out += ' ';
      for (scan::Action a : units[u]) {
        out += scan::to_token(a);
        out += ' ';
      }
      out += std::to_string(u + 1);
    }
  }
  return out;
}

// Drops counters (any all-digit token) and "||"; everything left must be an
// action token.
inline std::vector<scan::Action> strip_scan_markup(std::string_view text) {
  std::vector<scan::Action> out;
  for (const auto& tok : util::split_ws(text)) {
    if (tok == "||" || util::is_all_digits(tok)) continue;
    auto a = scan::action_from_token(tok);
    if (!a) throw ForeignToken(tok);
    out.push_back(*a);
  }
  return out;
}

}  // namespace rmt::markup
