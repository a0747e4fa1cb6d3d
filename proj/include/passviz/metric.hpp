#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "passviz/corpus.hpp"
#include "passviz/io.hpp"

namespace passviz {

/// Levenshtein distance over code points (unit-cost insert, delete,
/// substitute). Rolling single row, O(|a|*|b|) time, O(min(|a|,|b|)) memory.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Convenience overload for valid UTF-8 input.
std::size_t levenshtein_utf8(std::string_view a, std::string_view b);

/// Ordered anchor passwords defining the columns of a DistanceMatrix.
struct AnchorSet {
  std::vector<std::u32string> anchors;
  std::uint64_t seed = 0;
  std::string source_name;
  Digest content_hash{};

  std::size_t size() const noexcept { return anchors.size(); }
};

/// Hash of the ordered anchor list: SHA-256 over (u32 LE byte length,
/// UTF-8 bytes) for each anchor.
Digest anchor_content_hash(std::span<const std::u32string> anchors);

/// Validates (non-empty, pairwise distinct) and hashes an explicit list.
AnchorSet make_anchor_set(std::vector<std::u32string> anchors, std::uint64_t seed = 0,
                          std::string source_name = {});

enum class AnchorWeighting {
  uniform,  // every unique password equally likely
  count,    // probability proportional to occurrence count
};

/// Samples min(n, |c|) distinct anchors without replacement, in draw order.
/// Throws DomainError for an empty corpus or n == 0.
AnchorSet select_anchors(const Corpus& c, std::size_t n, std::uint64_t seed,
                         AnchorWeighting weighting = AnchorWeighting::uniform);

/// Row-major M x N grid of Levenshtein distances; row i is corpus record i,
/// column j is anchor j.
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint16_t> values;
  std::vector<std::string> anchors_utf8;
  Digest anchor_hash{};

  std::uint16_t at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<const std::uint16_t> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;
};

struct MatrixOptions {
  unsigned workers = 1;
  std::size_t batch_rows = 4096;
};

/// Throws DomainError if any password or anchor exceeds 65,535 code points.
DistanceMatrix build_distance_matrix(const Corpus& c, const AnchorSet& s, const MatrixOptions& opts = {});

/// Distances from one password to every anchor; equals the matrix row the
/// password would get.
std::vector<std::uint16_t> anchor_row(std::u32string_view password, const AnchorSet& s);

/// PVDM binary format: "PVDM", u16 version, u64 M, u32 N, M*N u16 values
/// (row-major), N anchors as (u32 byte length, UTF-8), 32-byte anchor hash.
/// All integers little-endian.
inline constexpr std::uint16_t kDistanceMatrixVersion = 1;
std::string serialize_distance_matrix(const DistanceMatrix& m);
DistanceMatrix deserialize_distance_matrix(std::string_view bytes, const std::string& source = "<memory>");
void write_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& m);
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);

}  // namespace passviz
