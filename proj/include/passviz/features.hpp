#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "passviz/corpus.hpp"

namespace passviz {

/// Structural features of one password. Digits are ASCII '0'..'9' only and
/// all positions count code points.
struct PasswordFeatures {
  std::size_t length = 0;
  std::size_t digit_count = 0;
  double digit_ratio = 0.0;
  int digit_ratio_decile = 0;
  double digit_position_ratio = 0.5;
  std::vector<int> years_1900s;
  std::vector<int> years_2000s;
  bool has_numeric_sequence = false;
  bool has_keyboard_sequence = false;

  friend bool operator==(const PasswordFeatures&, const PasswordFeatures&) = default;
};

inline bool is_ascii_digit(char32_t c) noexcept { return c >= U'0' && c <= U'9'; }

std::size_t digit_count(std::u32string_view p) noexcept;

/// digits / length. Throws DomainError for an empty password.
double digit_ratio(std::u32string_view p);

/// Nearest multiple of 10 percent, halves rounded up (0.375 -> 40, 0.25 -> 30).
/// Computed in integer arithmetic so exact halves are never misrounded.
int digit_ratio_decile(std::u32string_view p);

/// Mean of i / (length - 1) over digit positions i; 0 when digits lead,
/// 1 when they trail, 0.5 when there are no digits or length is 1.
double digit_position_ratio(std::u32string_view p);

/// Whether the code point at `position` equals `ch`; negative positions
/// count from the end (-1 is the last). Out-of-range positions are false.
bool char_at(std::u32string_view p, long position, char32_t ch) noexcept;

/// Compiled regular expression (Perl syntax, code-point semantics over UTF-8).
class PasswordPattern {
 public:
  /// Throws PatternError carrying the offending position.
  explicit PasswordPattern(const std::string& pattern);
  ~PasswordPattern();
  PasswordPattern(PasswordPattern&&) noexcept;
  PasswordPattern& operator=(PasswordPattern&&) noexcept;

  /// Unanchored search; use ^ and $ in the pattern for whole-password matches.
  bool search(std::string_view utf8) const;
  const std::string& source() const noexcept { return source_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string source_;
};

bool matches_regex(std::string_view utf8, const std::string& pattern);

struct YearRange {
  int first;
  int last;
};

struct YearMatch {
  int value;
  std::size_t start;
  friend bool operator==(const YearMatch&, const YearMatch&) = default;
};

inline constexpr YearRange kYears1900s{1900, 1999};
inline constexpr YearRange kYears2000s{2000, 2099};

/// Every window of four ASCII digits whose value lies in one of the ranges,
/// left to right, overlapping windows included. Throws DomainError when
/// `ranges` is empty.
std::vector<YearMatch> find_years(std::u32string_view p, std::span<const YearRange> ranges);

/// A run of >= min_len digits each one greater than the previous (or one
/// smaller, when descending runs are allowed). Throws DomainError if min_len < 2.
bool has_numeric_sequence(std::u32string_view p, std::size_t min_len = 3, bool allow_descending = false);

/// A substring of >= min_len characters that appears, forward or reversed,
/// inside one US-QWERTY row ("qwertyuiop", "asdfghjkl", "zxcvbnm",
/// "1234567890"); comparison is ASCII-case-insensitive.
bool has_keyboard_sequence(std::u32string_view p, std::size_t min_len = 4);

PasswordFeatures compute_features(std::u32string_view p);

/// Element i holds the features of record i.
std::vector<PasswordFeatures> feature_table(const Corpus& c, unsigned workers = 1);

/// Counts per decile 0, 10, ..., 100 (index = decile / 10).
std::array<std::size_t, 11> decile_histogram(std::span<const PasswordFeatures> features);

}  // namespace passviz
