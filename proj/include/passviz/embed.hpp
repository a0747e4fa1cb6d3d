#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "passviz/io.hpp"
#include "passviz/metric.hpp"

namespace passviz {

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Dense row-major point cloud. Each DistanceMatrix row becomes one point
/// in N-d Euclidean space; small integers are stored exactly in f32.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  static FeatureMatrix from(const DistanceMatrix& m);
};

/// Squared Euclidean distance, accumulated in double.
double squared_distance(std::span<const float> a, std::span<const float> b);

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration_factor = 12.0;
  /// Also the iteration at which momentum switches from initial to final.
  int early_exaggeration_iters = 250;
  /// nullopt means "auto": max(M / 12, 50).
  std::optional<double> learning_rate;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::uint64_t seed = 0;
  /// 0 selects the exact O(M^2) gradient; > 0 the Barnes-Hut approximation.
  double theta = 0.0;

  /// Library defaults with theta = 0.5 when m > 5000.
  static TsneParams defaults_for(std::size_t m);
  double resolved_learning_rate(std::size_t m) const;
  /// Throws DomainError when a field or the perplexity/M relation is invalid.
  void validate(std::size_t m) const;

  friend bool operator==(const TsneParams&, const TsneParams&) = default;
};

struct Embedding {
  std::vector<Point2> coords;
  TsneParams params;
  Digest anchor_hash{};
  double kl_start = 0.0;
  double kl_final = 0.0;

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Joint affinities p_ij stored densely (M x M, zero diagonal).
struct DenseAffinities {
  std::size_t n = 0;
  std::vector<double> p;
  double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

/// Joint affinities over a k-nearest-neighbour graph, CSR layout with
/// column indices sorted within each row.
struct SparseAffinities {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;
};

struct RowCalibration {
  double beta = 1.0;        // precision of the Gaussian kernel, 1 / (2 sigma^2)
  double perplexity = 0.0;  // realised exp(entropy)
  int steps = 0;
};

/// Fills `probs` with the conditional distribution p(.|i) over the given
/// squared distances, with bandwidth found by bisection so that the entropy
/// matches log(perplexity) within 1e-5 (at most 50 steps; the best bandwidth
/// seen is kept when the target is unreachable).
RowCalibration calibrate_row(std::span<const double> squared_distances, double perplexity,
                             std::span<double> probs);

struct AffinityDiagnostics {
  std::vector<double> realised_perplexity;
};

/// Symmetrised, normalised affinities over all pairs.
DenseAffinities exact_affinities(const FeatureMatrix& x, double perplexity, unsigned workers = 1,
                                 AffinityDiagnostics* diag = nullptr);

/// Symmetrised, normalised affinities over the floor(3 * perplexity)
/// nearest neighbours of each point.
SparseAffinities sparse_affinities(const FeatureMatrix& x, double perplexity, unsigned workers = 1,
                                   AffinityDiagnostics* diag = nullptr);

/// Student-t (one degree of freedom) affinities q_ij of a 2-D layout.
DenseAffinities student_t_affinities(std::span<const Point2> coords);

/// KL(P || Q) with Q the Student-t affinities of `coords`. Entries of P and
/// Q are floored at 1e-12 inside the logarithm.
double kl_divergence(const DenseAffinities& p, std::span<const Point2> coords);

/// Exact gradient of kl_divergence with respect to each coordinate.
std::vector<Point2> kl_gradient(const DenseAffinities& p, std::span<const Point2> coords);

/// Trustworthiness of a layout at neighbourhood size k (requires k < M / 2).
double trustworthiness(const FeatureMatrix& high, std::span<const Point2> low, std::size_t k,
                       unsigned workers = 1);

Embedding tsne_embed(const FeatureMatrix& x, const TsneParams& params, unsigned workers = 1);
Embedding tsne_embed(const DistanceMatrix& m, const TsneParams& params, unsigned workers = 1);

/// PVEM binary format: "PVEM", u16 version, u64 M, M (x, y) f32 pairs,
/// params block, kl_start/kl_final f64, 32-byte anchor hash (all LE).
inline constexpr std::uint16_t kEmbeddingVersion = 1;
std::string serialize_embedding(const Embedding& e);
Embedding deserialize_embedding(std::string_view bytes, const std::string& source = "<memory>");
void write_embedding(const std::filesystem::path& path, const Embedding& e);
Embedding read_embedding(const std::filesystem::path& path);

}  // namespace passviz
