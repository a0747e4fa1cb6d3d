#include "passviz/features.hpp"

#include <boost/regex/icu.hpp>

#include <algorithm>

#include "passviz/error.hpp"
#include "passviz/parallel.hpp"

namespace passviz {

std::size_t digit_count(std::u32string_view p) noexcept {
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), is_ascii_digit));
}

double digit_ratio(std::u32string_view p) {
  if (p.empty()) throw DomainError("digit_ratio of an empty password");
  return static_cast<double>(digit_count(p)) / static_cast<double>(p.size());
}

int digit_ratio_decile(std::u32string_view p) {
  if (p.empty()) throw DomainError("digit_ratio_decile of an empty password");
  // floor(10 d / n + 1/2) == floor((20 d + n) / (2 n))
  const std::size_t d = digit_count(p);
  const std::size_t n = p.size();
  return static_cast<int>((20 * d + n) / (2 * n)) * 10;
}

double digit_position_ratio(std::u32string_view p) {
  if (p.empty()) throw DomainError("digit_position_ratio of an empty password");
  if (p.size() == 1) return 0.5;
  std::size_t count = 0;
  std::size_t position_sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (is_ascii_digit(p[i])) {
      ++count;
      position_sum += i;
    }
  }
  if (count == 0) return 0.5;
  return static_cast<double>(position_sum) / (static_cast<double>(count) * static_cast<double>(p.size() - 1));
}

bool char_at(std::u32string_view p, long position, char32_t ch) noexcept {
  const long n = static_cast<long>(p.size());
  const long idx = position < 0 ? n + position : position;
  if (idx < 0 || idx >= n) return false;
  return p[static_cast<std::size_t>(idx)] == ch;
}

struct PasswordPattern::Impl {
  boost::u32regex re;
};

PasswordPattern::PasswordPattern(const std::string& pattern) : source_(pattern) {
  try {
    impl_ = std::make_unique<Impl>(Impl{boost::make_u32regex(pattern, boost::regex::perl)});
  } catch (const boost::regex_error& e) {
    throw PatternError(e.position(), "invalid regular expression '" + pattern + "': " + e.what());
  } catch (const std::exception& e) {
    throw PatternError(0, "invalid regular expression '" + pattern + "': " + e.what());
  }
}

PasswordPattern::~PasswordPattern() = default;
PasswordPattern::PasswordPattern(PasswordPattern&&) noexcept = default;
PasswordPattern& PasswordPattern::operator=(PasswordPattern&&) noexcept = default;

bool PasswordPattern::search(std::string_view utf8) const {
  return boost::u32regex_search(utf8.begin(), utf8.end(), impl_->re);
}

bool matches_regex(std::string_view utf8, const std::string& pattern) {
  return PasswordPattern(pattern).search(utf8);
}

std::vector<YearMatch> find_years(std::u32string_view p, std::span<const YearRange> ranges) {
  if (ranges.empty()) throw DomainError("find_years needs at least one year range");
  std::vector<YearMatch> out;
  for (std::size_t i = 0; i + 4 <= p.size(); ++i) {
    int value = 0;
    bool digits = true;
    for (std::size_t k = 0; k < 4; ++k) {
      if (!is_ascii_digit(p[i + k])) {
        digits = false;
        break;
      }
      value = value * 10 + static_cast<int>(p[i + k] - U'0');
    }
    if (!digits) continue;
    for (const auto& r : ranges) {
      if (value >= r.first && value <= r.last) {
        out.push_back({value, i});
        break;
      }
    }
  }
  return out;
}

bool has_numeric_sequence(std::u32string_view p, std::size_t min_len, bool allow_descending) {
  if (min_len < 2) throw DomainError("numeric sequence length must be at least 2");
  auto longest_run = [&](int step) {
    std::size_t run = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!is_ascii_digit(p[i])) {
        run = 0;
      } else if (run > 0 && static_cast<int>(p[i]) - static_cast<int>(p[i - 1]) == step) {
        ++run;
      } else {
        run = 1;
      }
      if (run >= min_len) return true;
    }
    return false;
  };
  return longest_run(+1) || (allow_descending && longest_run(-1));
}

bool has_keyboard_sequence(std::u32string_view p, std::size_t min_len) {
  if (min_len < 2) throw DomainError("keyboard sequence length must be at least 2");
  static const std::u32string_view kRows[] = {U"qwertyuiop", U"asdfghjkl", U"zxcvbnm", U"1234567890"};
  if (p.size() < min_len) return false;
  std::u32string lower(p);
  for (auto& c : lower) {
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  }
  for (auto row : kRows) {
    if (row.size() < min_len) continue;
    std::u32string reversed(row.rbegin(), row.rend());
    for (std::size_t i = 0; i + min_len <= lower.size(); ++i) {
      const std::u32string_view window(lower.data() + i, min_len);
      if (row.find(window) != std::u32string_view::npos || reversed.find(window) != std::u32string::npos) {
        return true;
      }
    }
  }
  return false;
}

PasswordFeatures compute_features(std::u32string_view p) {
  PasswordFeatures f;
  f.length = p.size();
  f.digit_count = digit_count(p);
  f.digit_ratio = digit_ratio(p);
  f.digit_ratio_decile = digit_ratio_decile(p);
  f.digit_position_ratio = digit_position_ratio(p);
  for (const auto& m : find_years(p, std::span(&kYears1900s, 1))) f.years_1900s.push_back(m.value);
  for (const auto& m : find_years(p, std::span(&kYears2000s, 1))) f.years_2000s.push_back(m.value);
  f.has_numeric_sequence = has_numeric_sequence(p);
  f.has_keyboard_sequence = has_keyboard_sequence(p);
  return f;
}

std::vector<PasswordFeatures> feature_table(const Corpus& c, unsigned workers) {
  std::vector<PasswordFeatures> out(c.size());
  parallel_for(c.size(), workers, 4096, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = compute_features(c.records[i].text);
  });
  return out;
}

std::array<std::size_t, 11> decile_histogram(std::span<const PasswordFeatures> features) {
  std::array<std::size_t, 11> h{};
  for (const auto& f : features) ++h[static_cast<std::size_t>(f.digit_ratio_decile / 10)];
  return h;
}

}  // namespace passviz
