#pragma once

// Answer literals, answer extraction from free text, and answer equality.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>

#include "gemmas/trace_model.hpp"

namespace gemmas {

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// ASCII letters, digits and any byte of a multi-byte UTF-8 sequence count as
// word characters for boundary checks.
inline bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return is_digit(c) || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Matches a decimal numeral starting at text[pos] (sign excluded). Returns the
// end offset, or pos when nothing matches.
inline std::size_t match_numeral(std::string_view text, std::size_t pos) {
  std::size_t i = pos;
  const std::size_t n = text.size();
  auto digits_from = [&](std::size_t k) {
    while (k < n && is_digit(text[k])) ++k;
    return k;
  };
  if (i < n && is_digit(text[i])) {
    const std::size_t int_end = digits_from(i);
    i = int_end;
    // Thousands groups are only recognised after a 1-3 digit leading group.
    if (int_end - pos <= 3) {
      while (i + 3 < n && text[i] == ',' && is_digit(text[i + 1]) && is_digit(text[i + 2]) &&
             is_digit(text[i + 3]) && (i + 4 >= n || !is_digit(text[i + 4]))) {
        i += 4;
      }
    }
  }
  if (i + 1 < n && text[i] == '.' && is_digit(text[i + 1])) {
    i = digits_from(i + 1);
  }
  return i;
}

inline std::optional<double> to_double(std::string_view literal) {
  std::string clean;
  clean.reserve(literal.size());
  for (char c : literal)
    if (c != ',' && c != '+') clean.push_back(c);
  double value = 0.0;
  const char* first = clean.data();
  const char* last = clean.data() + clean.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

// Parses a complete decimal literal such as "42", "-3.5", "1,234.50".
inline std::optional<double> parse_decimal_literal(std::string_view text) {
  text = detail::trim(text);
  if (text.empty()) return std::nullopt;
  std::size_t start = 0;
  if (text[0] == '-' || text[0] == '+') start = 1;
  if (start == text.size()) return std::nullopt;
  const std::size_t end = detail::match_numeral(text, start);
  if (end == start || end != text.size()) return std::nullopt;
  return detail::to_double(text);
}

// Shortest decimal text that parses back to the same double.
inline std::string format_decimal(double value) {
  if (value == 0.0) value = 0.0;  // drop negative zero
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::fixed);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

// Gold-answer literal: a decimal numeral for numeric runs, a single letter
// A-E (optionally parenthesised) for choice runs.
inline std::optional<Answer> parse_answer(std::string_view text, AnswerKind kind) {
  if (kind == AnswerKind::numeric) {
    if (auto v = parse_decimal_literal(text)) return Answer::numeric(*v);
    return std::nullopt;
  }
  text = detail::trim(text);
  if (text.size() == 3 && text.front() == '(' && text.back() == ')') text = text.substr(1, 1);
  if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'E') return Answer::choice(text[0]);
  return std::nullopt;
}

inline std::string format_answer(const Answer& a) {
  if (a.kind == AnswerKind::numeric) return format_decimal(a.numeric_value.value_or(0.0));
  return std::string(1, a.choice_label.value_or('?'));
}

// Last decimal numeral in the text. Digits glued to a preceding letter
// ("x2", "w12") are not numerals.
inline std::optional<Answer> extract_numeric_answer(std::string_view text) {
  std::optional<Answer> last;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const bool digit_start = detail::is_digit(text[i]);
    const bool dot_start = text[i] == '.' && i + 1 < n && detail::is_digit(text[i + 1]);
    if (!digit_start && !dot_start) {
      ++i;
      continue;
    }
    if (i > 0 && (detail::is_word_byte(text[i - 1]) || (dot_start && text[i - 1] == '.'))) {
      // Inside a word: skip the rest of this alphanumeric run.
      while (i < n && detail::is_word_byte(text[i])) ++i;
      continue;
    }
    const std::size_t end = detail::match_numeral(text, i);
    std::size_t begin = i;
    if (i > 0 && (text[i - 1] == '-' || text[i - 1] == '+') &&
        (i == 1 || !detail::is_word_byte(text[i - 2]))) {
      begin = i - 1;
    }
    if (auto v = detail::to_double(text.substr(begin, end - begin))) last = Answer::numeric(*v);
    i = end;
    while (i < n && detail::is_digit(text[i])) ++i;
  }
  return last;
}

// Last standalone capital A-E: "(B)" or a one-letter token.
inline std::optional<Answer> extract_choice_answer(std::string_view text) {
  for (std::size_t i = text.size(); i-- > 0;) {
    const char c = text[i];
    if (c < 'A' || c > 'E') continue;
    const bool left_ok = i == 0 || !detail::is_word_byte(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !detail::is_word_byte(text[i + 1]);
    if (left_ok && right_ok) return Answer::choice(c);
  }
  return std::nullopt;
}

// Numeric answers compare within a relative tolerance of 1e-9 so that "8"
// and "8.0" agree; choices compare labels.
inline bool answers_match(const std::optional<Answer>& got, const Answer& gold) {
  if (!got || got->kind != gold.kind) return false;
  if (gold.kind == AnswerKind::choice) return got->choice_label == gold.choice_label;
  const double a = got->numeric_value.value_or(NAN);
  const double b = gold.numeric_value.value_or(NAN);
  if (a == b) return true;
  return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
}

using AnswerExtractor = std::function<std::optional<Answer>(std::string_view)>;

// Extraction rules keyed by answer kind; defaults to the last-numeral and
// last-choice-letter heuristics.
class ExtractorRegistry {
 public:
  ExtractorRegistry()
      : numeric_(extract_numeric_answer), choice_(extract_choice_answer) {}

  void set(AnswerKind kind, AnswerExtractor fn) {
    (kind == AnswerKind::numeric ? numeric_ : choice_) = std::move(fn);
  }

  std::optional<Answer> extract(std::string_view text, AnswerKind kind) const {
    return kind == AnswerKind::numeric ? numeric_(text) : choice_(text);
  }

 private:
  AnswerExtractor numeric_;
  AnswerExtractor choice_;
};

inline std::optional<Answer> extract_answer(std::string_view text, AnswerKind kind) {
  return kind == AnswerKind::numeric ? extract_numeric_answer(text) : extract_choice_answer(text);
}

}  // namespace gemmas
