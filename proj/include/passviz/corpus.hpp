#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "passviz/io.hpp"

namespace passviz {

/// One distinct password of a corpus. `text` holds code points; `utf8` is
/// the same password as it appeared in the input file.
struct PasswordRecord {
  std::u32string text;
  std::string utf8;
  std::uint64_t count = 1;
  std::size_t index = 0;

  std::size_t length() const noexcept { return text.size(); }
  friend bool operator==(const PasswordRecord&, const PasswordRecord&) = default;
};

/// Deduplicated password set in first-appearance order.
///
/// Invariants: texts are pairwise distinct (case-sensitive, code point
/// equality), record i has index i, and sum(counts) + skipped == raw_total.
struct Corpus {
  std::string name;
  std::vector<PasswordRecord> records;
  std::uint64_t raw_total = 0;
  std::uint64_t skipped = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  const PasswordRecord& operator[](std::size_t i) const { return records[i]; }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class InputFormat { plain, user_colon_password };

/// "plain" or "user-colon-password"; anything else is a UsageError.
InputFormat parse_input_format(std::string_view tag);
std::string_view format_tag(InputFormat f) noexcept;

/// Ingests lines (without terminators). A trailing '\r' is stripped; lines
/// that are empty after extraction or are not valid UTF-8 are skipped.
Corpus ingest_lines(std::string name, std::span<const std::string> lines, InputFormat format);

/// Reads a one-entry-per-line dump. Corpus name defaults to the file stem.
Corpus load_corpus(const std::filesystem::path& path, InputFormat format, std::string name = {});

/// Builds a corpus from already-clean password texts (each counted once).
Corpus make_corpus(std::string name, std::span<const std::string> passwords);

struct StatsReport {
  std::size_t unique = 0;
  std::uint64_t raw_total = 0;
  std::uint64_t skipped = 0;
  std::map<std::size_t, std::size_t> length_histogram;
  std::size_t min_length = 0;
  std::size_t max_length = 0;
};

StatsReport corpus_stats(const Corpus& c);

/// Uniform sample without replacement of min(k, |c|) records, kept in the
/// source order and re-indexed from 0.
Corpus sample_corpus(const Corpus& c, std::size_t k, std::uint64_t seed);

/// Digest of the ordered record texts; binds downstream artefacts to a corpus.
Digest corpus_digest(const Corpus& c);

}  // namespace passviz
