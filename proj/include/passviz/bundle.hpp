#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "passviz/cluster.hpp"
#include "passviz/corpus.hpp"
#include "passviz/embed.hpp"
#include "passviz/features.hpp"
#include "passviz/render.hpp"

namespace passviz {

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr std::size_t kDefaultBundleCap = 50'000;

struct BundlePoint {
  std::size_t index = 0;  // record index in the source corpus
  std::optional<std::string> text;
  double x = 0, y = 0;
  std::uint64_t count = 1;
  std::size_t length = 0;
  double digit_ratio = 0;
  int digit_ratio_decile = 0;
  double digit_position_ratio = 0.5;
  std::vector<int> years;
  bool numeric_sequence = false;
  bool keyboard_sequence = false;
  /// Indices into ExportBundle::highlights of the rules this point matches.
  std::vector<std::size_t> highlights;
  std::optional<int> cluster;

  friend bool operator==(const BundlePoint&, const BundlePoint&) = default;
};

struct BundleCluster {
  int label = 0;
  double cx = 0, cy = 0;
  std::size_t size = 0;
  std::size_t center_index = 0;
  std::optional<std::string> center_password;
  std::size_t majority_length = 0;
  double majority_share = 0;

  friend bool operator==(const BundleCluster&, const BundleCluster&) = default;
};

struct BundleHighlight {
  std::string description;
  std::string colour;  // #rrggbb

  friend bool operator==(const BundleHighlight&, const BundleHighlight&) = default;
};

struct ExportBundle {
  int schema_version = kBundleSchemaVersion;
  std::string corpus_name;
  std::size_t corpus_size = 0;
  bool privacy = false;
  bool downsampled = false;
  std::vector<BundleHighlight> highlights;
  std::vector<BundlePoint> points;
  std::optional<std::string> cluster_method;
  std::vector<BundleCluster> clusters;
  nlohmann::json provenance = nlohmann::json::object();

  friend bool operator==(const ExportBundle&, const ExportBundle&) = default;
};

struct BundleOptions {
  /// Drop password texts (points and cluster centres).
  bool privacy = false;
  /// Points kept; 0 disables downsampling.
  std::size_t max_points = kDefaultBundleCap;
  std::uint64_t sample_seed = 0;
  /// Optional clustering of the full embedding.
  const ClusterAssignment* clusters = nullptr;
  std::vector<HighlightRule> highlights;
  nlohmann::json extra_provenance = nlohmann::json::object();
};

nlohmann::json params_to_json(const TsneParams& p);
TsneParams params_from_json(const nlohmann::json& j);

/// Count-weighted sample of min(k, M) record indices without replacement,
/// returned in ascending order. Deterministic for a seed.
std::vector<std::size_t> weighted_sample_indices(std::span<const std::uint64_t> weights, std::size_t k,
                                                 std::uint64_t seed);

/// Throws DomainError when the embedding, features and corpus disagree in size.
ExportBundle make_bundle(const Embedding& e, std::span<const PasswordFeatures> f, const Corpus& c,
                         const BundleOptions& opts = {});

nlohmann::json bundle_to_json(const ExportBundle& b);
/// Throws VersionError on a missing or unsupported schema_version or a
/// malformed document.
ExportBundle bundle_from_json(const nlohmann::json& j);

/// Compact, key-sorted UTF-8 JSON with a trailing newline.
std::string serialize_bundle(const ExportBundle& b);
ExportBundle parse_bundle(std::string_view text);
void write_bundle(const std::filesystem::path& path, const ExportBundle& b);
ExportBundle read_bundle(const std::filesystem::path& path);

}  // namespace passviz
