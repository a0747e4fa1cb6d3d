#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "passviz/corpus.hpp"

namespace passviz {

struct IntersectionReport {
  std::vector<std::string> shared;  // in a's index order
  std::size_t count = 0;
  double pct_of_a = 0.0;
  double pct_of_b = 0.0;
};

/// Exact, case-sensitive intersection of the unique passwords of two corpora.
IntersectionReport intersect(const Corpus& a, const Corpus& b);

/// Element i is true iff target record i also occurs in reference.
std::vector<bool> mark_membership(const Corpus& target, const Corpus& reference);

/// The shared passwords as a corpus of their own (counts taken from a).
Corpus intersection_corpus(const Corpus& a, const Corpus& b);

struct DigitProfileComparison {
  std::array<std::size_t, 11> counts_a{};
  std::array<std::size_t, 11> counts_b{};
  std::array<double, 11> share_a{};  // percent of a's unique passwords per decile
  std::array<double, 11> share_b{};
  std::array<double, 11> difference{};  // share_a - share_b
};

DigitProfileComparison compare_digit_profiles(const Corpus& a, const Corpus& b);

/// Counts and percentages; the shared list itself only when include_shared.
nlohmann::json report_to_json(const IntersectionReport& r, const Corpus& a, const Corpus& b, bool include_shared);
nlohmann::json profile_to_json(const DigitProfileComparison& p);

}  // namespace passviz
