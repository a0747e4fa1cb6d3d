#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "passviz/corpus.hpp"
#include "passviz/embed.hpp"

namespace passviz {

enum class ClusterMethod { kmeans, dbscan, optics };

std::string_view method_name(ClusterMethod m) noexcept;
ClusterMethod parse_cluster_method(std::string_view name);

inline constexpr int kNoise = -1;

/// Labels are -1 (noise) or a cluster id in [0, num_clusters); centroids[c]
/// is the mean of the points labelled c.
struct ClusterAssignment {
  std::vector<int> labels;
  ClusterMethod method = ClusterMethod::kmeans;
  nlohmann::json params_used = nlohmann::json::object();
  std::vector<Point2> centroids;

  std::size_t num_clusters() const noexcept { return centroids.size(); }
  std::size_t noise_count() const;
};

/// k-means++ seeding, then Lloyd iterations until the assignment stops
/// changing or 300 iterations. An empty cluster takes over the point that
/// lies farthest from its own centroid. params_used["inertia_history"]
/// records the objective after every iteration.
ClusterAssignment kmeans(std::span<const Point2> pts, std::size_t k, std::uint64_t seed, int max_iterations = 300);

/// Density clustering. A point is core when at least min_pts points
/// (itself included) lie within eps. Clusters grow breadth-first from the
/// lowest-index unassigned core point; a border point joins the first
/// cluster that reaches it. Neighbour queries use a uniform grid of cell
/// size eps.
ClusterAssignment dbscan(std::span<const Point2> pts, double eps, std::size_t min_pts);

/// Same contract as dbscan with an O(M^2) neighbour scan; reference path.
ClusterAssignment dbscan_naive(std::span<const Point2> pts, double eps, std::size_t min_pts);

enum class OpticsExtraction { xi, eps_cut };

struct OpticsOptions {
  std::size_t min_pts = 5;
  double xi = 0.05;
  OpticsExtraction extraction = OpticsExtraction::xi;
  /// Reachability threshold for eps_cut extraction.
  double cut_eps = 0.0;
  /// Minimum cluster size for xi extraction; 0 means min_pts.
  std::size_t min_cluster_size = 0;
};

/// OPTICS ordering followed by xi-steep-area (or eps-cut) extraction.
/// Xi extraction treats undefined reachabilities as the largest finite one
/// and keeps the largest non-overlapping clusters.
/// params_used carries "ordering", "reachability" and "core_distance"
/// (infinite values as null).
ClusterAssignment optics(std::span<const Point2> pts, const OpticsOptions& opts);

/// Mean position of each label in [0, num_clusters).
std::vector<Point2> compute_centroids(std::span<const int> labels, std::span<const Point2> pts,
                                      std::size_t num_clusters);

struct ClusterCenter {
  int label;
  std::size_t index;
  std::string password;
};

/// For each cluster the member nearest its centroid, ties to the lowest index.
std::vector<ClusterCenter> center_passwords(const ClusterAssignment& a, std::span<const Point2> pts,
                                            const Corpus& c);

struct MajorityLength {
  int label;
  std::size_t length;
  double share;
};

/// Modal password length per cluster (ties to the shorter length) and the
/// fraction of the cluster it covers.
std::vector<MajorityLength> majority_length_labels(const ClusterAssignment& a, const Corpus& c);

/// Chance-corrected agreement of two labelings; noise is treated as its own label.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace passviz
