#include "passviz/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

#include "passviz/error.hpp"
#include "passviz/unicode.hpp"

namespace passviz {

InputFormat parse_input_format(std::string_view tag) {
  if (tag == "plain") return InputFormat::plain;
  if (tag == "user-colon-password") return InputFormat::user_colon_password;
  throw UsageError("unknown input format '" + std::string(tag) +
                   "' (expected plain or user-colon-password)");
}

std::string_view format_tag(InputFormat f) noexcept {
  return f == InputFormat::plain ? "plain" : "user-colon-password";
}

namespace {

class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::string name) { corpus_.name = std::move(name); }

  void add_line(std::string_view line, InputFormat format) {
    ++corpus_.raw_total;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (format == InputFormat::user_colon_password) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) {
        ++corpus_.skipped;
        return;
      }
      line.remove_prefix(colon + 1);
    }
    if (line.empty()) {
      ++corpus_.skipped;
      return;
    }
    auto it = seen_.find(std::string(line));
    if (it != seen_.end()) {
      ++corpus_.records[it->second].count;
      return;
    }
    auto decoded = decode_utf8(line);
    if (!decoded) {
      ++corpus_.skipped;
      return;
    }
    const std::size_t idx = corpus_.records.size();
    corpus_.records.push_back(PasswordRecord{std::move(*decoded), std::string(line), 1, idx});
    seen_.emplace(std::string(line), idx);
  }

  Corpus finish() && { return std::move(corpus_); }

 private:
  Corpus corpus_;
  std::unordered_map<std::string, std::size_t> seen_;
};

}  // namespace

Corpus ingest_lines(std::string name, std::span<const std::string> lines, InputFormat format) {
  CorpusBuilder b(std::move(name));
  for (const auto& line : lines) b.add_line(line, format);
  return std::move(b).finish();
}

Corpus load_corpus(const std::filesystem::path& path, InputFormat format, std::string name) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError(path.string(), "not a readable file");
  }
  const std::string data = read_file(path);
  CorpusBuilder b(name.empty() ? path.stem().string() : std::move(name));
  std::size_t start = 0;
  while (start < data.size()) {
    auto nl = data.find('\n', start);
    if (nl == std::string::npos) nl = data.size();
    b.add_line(std::string_view(data).substr(start, nl - start), format);
    start = nl + 1;
  }
  return std::move(b).finish();
}

Corpus make_corpus(std::string name, std::span<const std::string> passwords) {
  return ingest_lines(std::move(name), passwords, InputFormat::plain);
}

StatsReport corpus_stats(const Corpus& c) {
  StatsReport r;
  r.unique = c.size();
  r.raw_total = c.raw_total;
  r.skipped = c.skipped;
  for (const auto& rec : c.records) ++r.length_histogram[rec.length()];
  if (!r.length_histogram.empty()) {
    r.min_length = r.length_histogram.begin()->first;
    r.max_length = r.length_histogram.rbegin()->first;
  }
  return r;
}

Corpus sample_corpus(const Corpus& c, std::size_t k, std::uint64_t seed) {
  const std::size_t n = c.size();
  k = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());

  Corpus out;
  out.name = c.name;
  out.records.reserve(k);
  for (std::size_t i : idx) {
    PasswordRecord r = c.records[i];
    r.index = out.records.size();
    out.raw_total += r.count;
    out.records.push_back(std::move(r));
  }
  return out;
}

Digest corpus_digest(const Corpus& c) {
  ByteWriter w;
  w.u64(c.size());
  for (const auto& r : c.records) {
    w.u32(static_cast<std::uint32_t>(r.utf8.size()));
    w.bytes(r.utf8);
  }
  return sha256(w.data());
}

}  // namespace passviz
