#include "passviz/metric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "passviz/error.hpp"
#include "passviz/parallel.hpp"
#include "passviz/unicode.hpp"

namespace passviz {

namespace {

constexpr std::size_t kMaxLength = std::numeric_limits<std::uint16_t>::max();

constexpr std::size_t kStackRow = 64;

std::size_t levenshtein_impl(std::u32string_view a, std::u32string_view b,
                             std::vector<std::uint32_t>& heap_row) {
  // Common prefix and suffix never change the distance.
  while (!a.empty() && !b.empty() && a.front() == b.front()) {
    a.remove_prefix(1);
    b.remove_prefix(1);
  }
  while (!a.empty() && !b.empty() && a.back() == b.back()) {
    a.remove_suffix(1);
    b.remove_suffix(1);
  }
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return a.size();

  // row[j] = lev(i, j) for the current prefix of a, j over the shorter b.
  std::array<std::uint32_t, kStackRow + 1> stack_row;
  std::uint32_t* row = stack_row.data();
  if (b.size() > kStackRow) {
    heap_row.resize(b.size() + 1);
    row = heap_row.data();
  }
  std::iota(row, row + b.size() + 1, std::uint32_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::uint32_t diag = row[0];
    row[0] = static_cast<std::uint32_t>(i);
    const char32_t ca = a[i - 1];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::uint32_t up = row[j];
      const std::uint32_t sub = diag + (ca == b[j - 1] ? 0u : 1u);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

void check_length(std::u32string_view p, const char* what) {
  if (p.size() > kMaxLength) {
    throw DomainError(std::string(what) + " of " + std::to_string(p.size()) +
                      " code points exceeds the 65535 limit of 16-bit distance storage");
  }
}

}  // namespace

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::uint32_t> row;
  return levenshtein_impl(a, b, row);
}

std::size_t levenshtein_utf8(std::string_view a, std::string_view b) {
  auto da = decode_utf8(a);
  auto db = decode_utf8(b);
  if (!da || !db) throw DomainError("levenshtein_utf8: input is not valid UTF-8");
  return levenshtein(*da, *db);
}

Digest anchor_content_hash(std::span<const std::u32string> anchors) {
  ByteWriter w;
  for (const auto& a : anchors) {
    const std::string s = encode_utf8(a);
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.bytes(s);
  }
  return sha256(w.data());
}

AnchorSet make_anchor_set(std::vector<std::u32string> anchors, std::uint64_t seed, std::string source_name) {
  if (anchors.empty()) throw DomainError("anchor set must contain at least one password");
  std::unordered_set<std::u32string> seen;
  for (const auto& a : anchors) {
    if (!seen.insert(a).second) throw DomainError("anchor set contains a duplicate: " + encode_utf8(a));
  }
  AnchorSet s;
  s.content_hash = anchor_content_hash(anchors);
  s.anchors = std::move(anchors);
  s.seed = seed;
  s.source_name = std::move(source_name);
  return s;
}

AnchorSet select_anchors(const Corpus& c, std::size_t n, std::uint64_t seed, AnchorWeighting weighting) {
  if (c.empty()) throw DomainError("cannot select anchors from an empty corpus");
  if (n == 0) throw DomainError("anchor count must be positive");
  const std::size_t m = c.size();
  n = std::min(n, m);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(n);

  if (weighting == AnchorWeighting::uniform) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, m - 1);
      std::swap(idx[i], idx[pick(rng)]);
      picked.push_back(idx[i]);
    }
  } else {
    // Weighted sampling without replacement: keep the n largest log(u)/w.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, std::size_t>> keys(m);
    for (std::size_t i = 0; i < m; ++i) {
      double u = unit(rng);
      while (u <= 0.0) u = unit(rng);
      keys[i] = {std::log(u) / static_cast<double>(c.records[i].count), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                      [](const auto& x, const auto& y) {
                        return x.first != y.first ? x.first > y.first : x.second < y.second;
                      });
    for (std::size_t i = 0; i < n; ++i) picked.push_back(keys[i].second);
  }

  std::vector<std::u32string> anchors;
  anchors.reserve(n);
  for (std::size_t i : picked) anchors.push_back(c.records[i].text);
  return make_anchor_set(std::move(anchors), seed, c.name);
}

DistanceMatrix build_distance_matrix(const Corpus& c, const AnchorSet& s, const MatrixOptions& opts) {
  for (const auto& a : s.anchors) check_length(a, "anchor");
  for (const auto& r : c.records) check_length(r.text, "password");

  DistanceMatrix m;
  m.rows = c.size();
  m.cols = s.size();
  m.values.assign(m.rows * m.cols, 0);
  m.anchor_hash = s.content_hash;
  m.anchors_utf8.reserve(s.size());
  for (const auto& a : s.anchors) m.anchors_utf8.push_back(encode_utf8(a));

  parallel_for(m.rows, opts.workers, opts.batch_rows, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> buf;
    for (std::size_t i = begin; i < end; ++i) {
      std::uint16_t* out = m.values.data() + i * m.cols;
      for (std::size_t j = 0; j < m.cols; ++j) {
        out[j] = static_cast<std::uint16_t>(levenshtein_impl(c.records[i].text, s.anchors[j], buf));
      }
    }
  });
  return m;
}

std::vector<std::uint16_t> anchor_row(std::u32string_view password, const AnchorSet& s) {
  check_length(password, "password");
  std::vector<std::uint16_t> out(s.size());
  std::vector<std::uint32_t> buf;
  for (std::size_t j = 0; j < s.size(); ++j) {
    check_length(s.anchors[j], "anchor");
    out[j] = static_cast<std::uint16_t>(levenshtein_impl(password, s.anchors[j], buf));
  }
  return out;
}

std::string serialize_distance_matrix(const DistanceMatrix& m) {
  ByteWriter w;
  w.bytes("PVDM");
  w.u16(kDistanceMatrixVersion);
  w.u64(m.rows);
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (auto v : m.values) w.u16(v);
  for (const auto& a : m.anchors_utf8) {
    w.u32(static_cast<std::uint32_t>(a.size()));
    w.bytes(a);
  }
  w.digest(m.anchor_hash);
  return w.take();
}

DistanceMatrix deserialize_distance_matrix(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.bytes(4) != "PVDM") throw VersionError(source + ": not a distance matrix file (bad magic)");
  const auto version = r.u16();
  if (version != kDistanceMatrixVersion) {
    throw VersionError(source + ": unsupported distance matrix version " + std::to_string(version));
  }
  DistanceMatrix m;
  m.rows = r.u64();
  m.cols = r.u32();
  if (m.cols != 0 && m.rows > r.remaining() / 2 / m.cols) {
    throw VersionError(source + ": header dimensions exceed file size");
  }
  m.values.resize(m.rows * m.cols);
  for (auto& v : m.values) v = r.u16();
  m.anchors_utf8.reserve(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) {
    const auto len = r.u32();
    m.anchors_utf8.emplace_back(r.bytes(len));
  }
  m.anchor_hash = r.digest();
  if (r.remaining() != 0) throw VersionError(source + ": trailing bytes after anchor hash");
  return m;
}

void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m) {
  write_file_atomic(path, serialize_distance_matrix(m));
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
  return deserialize_distance_matrix(read_file(path), path.string());
}

}  // namespace passviz
