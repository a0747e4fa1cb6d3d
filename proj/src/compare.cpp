#include "passviz/compare.hpp"

#include <unordered_set>

#include "passviz/features.hpp"

namespace passviz {

namespace {

std::unordered_set<std::string_view> text_set(const Corpus& c) {
  std::unordered_set<std::string_view> s;
  s.reserve(c.size());
  for (const auto& r : c.records) s.insert(r.utf8);
  return s;
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

IntersectionReport intersect(const Corpus& a, const Corpus& b) {
  const auto in_b = text_set(b);
  IntersectionReport r;
  for (const auto& rec : a.records) {
    if (in_b.contains(rec.utf8)) r.shared.push_back(rec.utf8);
  }
  r.count = r.shared.size();
  r.pct_of_a = percent(r.count, a.size());
  r.pct_of_b = percent(r.count, b.size());
  return r;
}

std::vector<bool> mark_membership(const Corpus& target, const Corpus& reference) {
  const auto ref = text_set(reference);
  std::vector<bool> out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) out[i] = ref.contains(target.records[i].utf8);
  return out;
}

Corpus intersection_corpus(const Corpus& a, const Corpus& b) {
  const auto in_b = text_set(b);
  Corpus out;
  out.name = a.name + "_and_" + b.name;
  for (const auto& rec : a.records) {
    if (!in_b.contains(rec.utf8)) continue;
    PasswordRecord r = rec;
    r.index = out.records.size();
    out.raw_total += r.count;
    out.records.push_back(std::move(r));
  }
  return out;
}

DigitProfileComparison compare_digit_profiles(const Corpus& a, const Corpus& b) {
  DigitProfileComparison p;
  for (const auto& r : a.records) ++p.counts_a[static_cast<std::size_t>(digit_ratio_decile(r.text) / 10)];
  for (const auto& r : b.records) ++p.counts_b[static_cast<std::size_t>(digit_ratio_decile(r.text) / 10)];
  for (std::size_t d = 0; d < 11; ++d) {
    p.share_a[d] = percent(p.counts_a[d], a.size());
    p.share_b[d] = percent(p.counts_b[d], b.size());
    p.difference[d] = p.share_a[d] - p.share_b[d];
  }
  return p;
}

nlohmann::json report_to_json(const IntersectionReport& r, const Corpus& a, const Corpus& b, bool include_shared) {
  nlohmann::json j = {{"a", {{"name", a.name}, {"unique", a.size()}}},
                      {"b", {{"name", b.name}, {"unique", b.size()}}},
                      {"count", r.count},
                      {"pct_of_a", r.pct_of_a},
                      {"pct_of_b", r.pct_of_b}};
  if (include_shared) j["shared"] = r.shared;
  return j;
}

nlohmann::json profile_to_json(const DigitProfileComparison& p) {
  nlohmann::json deciles = nlohmann::json::array();
  for (std::size_t d = 0; d < 11; ++d) {
    deciles.push_back({{"decile", d * 10},
                       {"count_a", p.counts_a[d]},
                       {"count_b", p.counts_b[d]},
                       {"share_a", p.share_a[d]},
                       {"share_b", p.share_b[d]},
                       {"difference", p.difference[d]}});
  }
  return deciles;
}

}  // namespace passviz
