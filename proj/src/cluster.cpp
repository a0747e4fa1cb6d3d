#include "passviz/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

#include "passviz/error.hpp"

namespace passviz {

namespace {

inline double dist2(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void validate_labels(ClusterAssignment& a, std::span<const Point2> pts) {
  int max_label = -1;
  for (int l : a.labels) max_label = std::max(max_label, l);
  a.centroids = compute_centroids(a.labels, pts, static_cast<std::size_t>(max_label + 1));
}

double inertia(std::span<const Point2> pts, std::span<const int> labels, std::span<const Point2> centroids) {
  double s = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += dist2(pts[i], centroids[static_cast<std::size_t>(labels[i])]);
  return s;
}

// Expands clusters given a neighbour oracle; shared by both DBSCAN paths so
// they can differ only in how neighbours are found.
template <typename Neighbours>
std::vector<int> expand_clusters(std::size_t n, std::size_t min_pts, Neighbours&& neighbours) {
  std::vector<char> core(n, 0);
  std::vector<std::size_t> nb;
  for (std::size_t i = 0; i < n; ++i) {
    neighbours(i, nb);
    core[i] = nb.size() >= min_pts;
  }
  std::vector<int> labels(n, kNoise);
  int cluster = 0;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kNoise || !core[i]) continue;
    labels[i] = cluster;
    queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      neighbours(p, nb);
      for (std::size_t q : nb) {
        if (labels[q] != kNoise) continue;
        labels[q] = cluster;
        if (core[q]) queue.push_back(q);
      }
    }
    ++cluster;
  }
  return labels;
}

void check_eps(double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("eps must be a positive finite number");
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// Xi steep-area cluster extraction over a reachability plot (ordering
// positions, inclusive ranges), smaller clusters first.
//
// Undefined reachabilities (the first point of each connected component and
// the virtual end marker) are set to the largest finite reachability rather
// than infinity. With infinite boundaries the whole data set is always a
// cluster, so a uniform scatter could never come out as noise.
std::vector<std::pair<std::size_t, std::size_t>> xi_clusters(std::vector<double> r,
                                                             const std::vector<std::size_t>& pred_plot,
                                                             const std::vector<std::size_t>& ordering, double xi,
                                                             std::size_t min_pts, std::size_t min_cluster_size) {
  const std::size_t n = ordering.size();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  double top = -1.0;
  for (double v : r) {
    if (std::isfinite(v)) top = std::max(top, v);
  }
  if (top <= 0.0) return {};
  for (double& v : r) {
    if (!std::isfinite(v)) v = top;
  }
  r.push_back(top);
  const double xi_c = 1.0 - xi;

  std::vector<char> steep_up(n), steep_down(n), up(n), down(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ratio = r[i] / r[i + 1];  // inf or NaN on zero reachabilities
    steep_up[i] = ratio <= xi_c;
    steep_down[i] = ratio >= 1.0 / xi_c;
    down[i] = ratio > 1.0;
    up[i] = ratio < 1.0;
  }

  auto extend_region = [&](const std::vector<char>& steep, const std::vector<char>& xward, std::size_t start) {
    std::size_t non_xward = 0;
    std::size_t end = start;
    for (std::size_t idx = start; idx < n; ++idx) {
      if (steep[idx]) {
        non_xward = 0;
        end = idx;
      } else if (!xward[idx]) {
        ++non_xward;
        if (non_xward > min_pts) break;
      } else {
        return end;
      }
    }
    return end;
  };

  struct SteepDown {
    std::size_t start, end;
    double mib;
  };
  std::vector<SteepDown> sdas;
  auto update_filter = [&](double mib) {
    if (std::isinf(mib)) {
      sdas.clear();
      return;
    }
    std::vector<SteepDown> kept;
    for (auto sda : sdas) {
      if (mib <= r[sda.start] * xi_c) {
        sda.mib = std::max(sda.mib, mib);
        kept.push_back(sda);
      }
    }
    sdas = std::move(kept);
  };

  auto correct_predecessor = [&](std::size_t s, std::size_t e) -> std::pair<std::size_t, std::size_t> {
    while (s < e) {
      if (r[s] > r[e]) return {s, e};
      const std::size_t p_e = pred_plot[e];
      for (std::size_t i = s; i < e; ++i) {
        if (p_e == ordering[i]) return {s, e};
      }
      --e;
    }
    return {kNone, kNone};
  };

  std::vector<std::pair<std::size_t, std::size_t>> clusters;
  std::size_t index = 0;
  double mib = 0.0;
  for (std::size_t steep_index = 0; steep_index < n; ++steep_index) {
    if (!(steep_up[steep_index] || steep_down[steep_index])) continue;
    if (steep_index < index) continue;
    for (std::size_t t = index; t <= steep_index; ++t) mib = std::max(mib, r[t]);

    if (steep_down[steep_index]) {
      update_filter(mib);
      const std::size_t d_end = extend_region(steep_down, up, steep_index);
      sdas.push_back({steep_index, d_end, 0.0});
      index = d_end + 1;
      mib = r[index];
    } else {
      update_filter(mib);
      const std::size_t u_start = steep_index;
      const std::size_t u_end = extend_region(steep_up, down, u_start);
      index = u_end + 1;
      mib = r[index];

      std::vector<std::pair<std::size_t, std::size_t>> u_clusters;
      for (const auto& d : sdas) {
        std::size_t c_start = d.start;
        std::size_t c_end = u_end;
        if (r[c_end + 1] * xi_c < d.mib) continue;
        const double d_max = r[d.start];
        if (d_max * xi_c >= r[c_end + 1]) {
          while (r[c_start + 1] > r[c_end + 1] && c_start < d.end) ++c_start;
        } else if (r[c_end + 1] * xi_c >= d_max) {
          while (c_end > u_start && r[c_end - 1] > d_max) --c_end;
        }
        auto corrected = correct_predecessor(c_start, c_end);
        if (corrected.first == kNone) continue;
        std::tie(c_start, c_end) = corrected;
        if (c_end - c_start + 1 < min_cluster_size) continue;
        if (c_start > d.end) continue;
        if (c_end < u_start) continue;
        u_clusters.emplace_back(c_start, c_end);
      }
      std::reverse(u_clusters.begin(), u_clusters.end());
      clusters.insert(clusters.end(), u_clusters.begin(), u_clusters.end());
    }
  }
  return clusters;
}

}  // namespace

std::string_view method_name(ClusterMethod m) noexcept {
  switch (m) {
    case ClusterMethod::kmeans:
      return "kmeans";
    case ClusterMethod::dbscan:
      return "dbscan";
    case ClusterMethod::optics:
      return "optics";
  }
  return "unknown";
}

ClusterMethod parse_cluster_method(std::string_view name) {
  if (name == "kmeans") return ClusterMethod::kmeans;
  if (name == "dbscan") return ClusterMethod::dbscan;
  if (name == "optics") return ClusterMethod::optics;
  throw UsageError("unknown cluster method '" + std::string(name) + "' (expected kmeans, dbscan or optics)");
}

std::size_t ClusterAssignment::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

std::vector<Point2> compute_centroids(std::span<const int> labels, std::span<const Point2> pts,
                                      std::size_t num_clusters) {
  std::vector<Point2> sum(num_clusters);
  std::vector<std::size_t> count(num_clusters, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[i]);
    sum[c].x += pts[i].x;
    sum[c].y += pts[i].y;
    ++count[c];
  }
  for (std::size_t c = 0; c < num_clusters; ++c) {
    if (count[c] > 0) {
      sum[c].x /= static_cast<double>(count[c]);
      sum[c].y /= static_cast<double>(count[c]);
    }
  }
  return sum;
}

ClusterAssignment kmeans(std::span<const Point2> pts, std::size_t k, std::uint64_t seed, int max_iterations) {
  const std::size_t n = pts.size();
  if (k == 0) throw DomainError("k must be positive");
  if (k > n) throw DomainError("k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<Point2> centroids;
  centroids.reserve(k);
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t c0 = first(rng);
  centroids.push_back(pts[c0]);
  chosen[c0] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = dist2(pts[i], pts[c0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centroids.size() < k) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0) {
      double target = unit(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0) continue;
        pick = i;
        target -= d2[i];
        if (target < 0) break;
      }
    } else {
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = 1;
    centroids.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(pts[i], pts[pick]));
  }

  std::vector<int> labels(n, -1);
  nlohmann::json history = nlohmann::json::array();
  int iterations = 0;
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist2(pts[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(pts[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    ++iterations;
    if (!changed) break;

    // Repair empty clusters with the point farthest from its own centroid.
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(labels[i]);
        if (sizes[own] <= 1) continue;
        const double d = dist2(pts[i], centroids[own]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) break;
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      sizes[c] = 1;
    }
    centroids = compute_centroids(labels, pts, k);
    history.push_back(inertia(pts, labels, centroids));
  }

  ClusterAssignment a;
  a.method = ClusterMethod::kmeans;
  a.labels = std::move(labels);
  a.centroids = compute_centroids(a.labels, pts, k);
  a.params_used = {{"k", k},
                   {"seed", seed},
                   {"max_iterations", max_iterations},
                   {"iterations", iterations},
                   {"inertia", inertia(pts, a.labels, a.centroids)},
                   {"inertia_history", std::move(history)}};
  return a;
}

ClusterAssignment dbscan(std::span<const Point2> pts, double eps, std::size_t min_pts) {
  check_eps(eps);
  const std::size_t n = pts.size();
  const double eps2 = eps * eps;
  auto cell_of = [&](const Point2& p) {
    return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x / eps)),
                                                 static_cast<std::int64_t>(std::floor(p.y / eps))};
  };
  struct CellHash {
    std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& c) const noexcept {
      return std::hash<std::int64_t>{}(c.first * 73856093LL ^ c.second * 19349663LL);
    }
  };
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>, CellHash> grid;
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(pts[i])].push_back(i);

  auto neighbours = [&](std::size_t i, std::vector<std::size_t>& out) {
    out.clear();
    const auto [cx, cy] = cell_of(pts[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (dist2(pts[i], pts[j]) <= eps2) out.push_back(j);
        }
      }
    }
    std::sort(out.begin(), out.end());
  };

  ClusterAssignment a;
  a.method = ClusterMethod::dbscan;
  a.labels = expand_clusters(n, min_pts, neighbours);
  a.params_used = {{"eps", eps}, {"min_pts", min_pts}, {"index", "grid"}};
  validate_labels(a, pts);
  return a;
}

ClusterAssignment dbscan_naive(std::span<const Point2> pts, double eps, std::size_t min_pts) {
  check_eps(eps);
  const double eps2 = eps * eps;
  auto neighbours = [&](std::size_t i, std::vector<std::size_t>& out) {
    out.clear();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (dist2(pts[i], pts[j]) <= eps2) out.push_back(j);
    }
  };
  ClusterAssignment a;
  a.method = ClusterMethod::dbscan;
  a.labels = expand_clusters(pts.size(), min_pts, neighbours);
  a.params_used = {{"eps", eps}, {"min_pts", min_pts}, {"index", "naive"}};
  validate_labels(a, pts);
  return a;
}

ClusterAssignment optics(std::span<const Point2> pts, const OpticsOptions& opts) {
  if (opts.min_pts < 2) throw DomainError("OPTICS min_pts must be at least 2");
  if (opts.extraction == OpticsExtraction::xi && !(opts.xi > 0 && opts.xi < 1)) {
    throw DomainError("OPTICS xi must lie in (0, 1)");
  }
  if (opts.extraction == OpticsExtraction::eps_cut) check_eps(opts.cut_eps);

  const std::size_t n = pts.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNoPred = std::numeric_limits<std::size_t>::max();

  // Core distance: distance to the min_pts-th nearest point, self included.
  std::vector<double> core(n, kInf);
  if (opts.min_pts <= n) {
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[j] = std::sqrt(dist2(pts[i], pts[j]));
      std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(opts.min_pts - 1), d.end());
      core[i] = d[opts.min_pts - 1];
    }
  }

  std::vector<double> reach(n, kInf);
  std::vector<std::size_t> pred(n, kNoPred);
  std::vector<char> processed(n, 0);
  std::vector<std::size_t> ordering;
  ordering.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t point = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (processed[i]) continue;
      if (point == n || reach[i] < reach[point]) point = i;
    }
    processed[point] = 1;
    ordering.push_back(point);
    if (std::isinf(core[point])) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (processed[j]) continue;
      const double rd = std::max(core[point], std::sqrt(dist2(pts[point], pts[j])));
      if (rd < reach[j]) {
        reach[j] = rd;
        pred[j] = point;
      }
    }
  }

  std::vector<int> labels(n, kNoise);
  if (opts.extraction == OpticsExtraction::xi) {
    std::vector<double> rplot(n);
    std::vector<std::size_t> pplot(n);
    for (std::size_t i = 0; i < n; ++i) {
      rplot[i] = reach[ordering[i]];
      pplot[i] = pred[ordering[i]];
    }
    const std::size_t min_size = opts.min_cluster_size ? opts.min_cluster_size : opts.min_pts;
    auto clusters = xi_clusters(rplot, pplot, ordering, opts.xi, opts.min_pts, min_size);
    // Flat labels from the outermost clusters: largest first, a cluster is
    // kept only if none of its points is already taken.
    std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
      const auto la = a.second - a.first, lb = b.second - b.first;
      return la != lb ? la > lb : a.first < b.first;
    });
    std::vector<int> plot_labels(n, kNoise);
    int label = 0;
    for (const auto& [s, e] : clusters) {
      bool free = true;
      for (std::size_t t = s; t <= e; ++t) free = free && plot_labels[t] == kNoise;
      if (!free) continue;
      for (std::size_t t = s; t <= e; ++t) plot_labels[t] = label;
      ++label;
    }
    for (std::size_t t = 0; t < n; ++t) labels[ordering[t]] = plot_labels[t];
  } else {
    int current = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t p = ordering[t];
      const bool far_reach = reach[p] > opts.cut_eps;
      const bool near_core = core[p] <= opts.cut_eps;
      if (far_reach && near_core) ++current;
      labels[p] = (far_reach && !near_core) ? kNoise : current;
    }
  }

  ClusterAssignment a;
  a.method = ClusterMethod::optics;
  a.labels = std::move(labels);
  nlohmann::json rj = nlohmann::json::array(), cj = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    rj.push_back(finite_or_null(reach[i]));
    cj.push_back(finite_or_null(core[i]));
  }
  a.params_used = {{"min_pts", opts.min_pts},
                   {"extraction", opts.extraction == OpticsExtraction::xi ? "xi" : "eps_cut"},
                   {"ordering", ordering},
                   {"reachability", std::move(rj)},
                   {"core_distance", std::move(cj)}};
  if (opts.extraction == OpticsExtraction::xi) {
    a.params_used["xi"] = opts.xi;
  } else {
    a.params_used["cut_eps"] = opts.cut_eps;
  }
  validate_labels(a, pts);
  return a;
}

std::vector<ClusterCenter> center_passwords(const ClusterAssignment& a, std::span<const Point2> pts,
                                            const Corpus& c) {
  if (a.labels.size() != pts.size() || pts.size() != c.size()) {
    throw DomainError("center_passwords: assignment, embedding and corpus sizes differ");
  }
  const std::size_t k = a.num_clusters();
  std::vector<std::size_t> best(k, pts.size());
  std::vector<double> best_d(k, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int l = a.labels[i];
    if (l < 0) continue;
    const auto cl = static_cast<std::size_t>(l);
    const double d = dist2(pts[i], a.centroids[cl]);
    if (d < best_d[cl]) {
      best_d[cl] = d;
      best[cl] = i;
    }
  }
  std::vector<ClusterCenter> out;
  for (std::size_t cl = 0; cl < k; ++cl) {
    if (best[cl] == pts.size()) continue;
    out.push_back({static_cast<int>(cl), best[cl], c.records[best[cl]].utf8});
  }
  return out;
}

std::vector<MajorityLength> majority_length_labels(const ClusterAssignment& a, const Corpus& c) {
  if (a.labels.size() != c.size()) throw DomainError("majority_length_labels: assignment and corpus sizes differ");
  std::vector<std::map<std::size_t, std::size_t>> hist(a.num_clusters());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (a.labels[i] >= 0) ++hist[static_cast<std::size_t>(a.labels[i])][c.records[i].length()];
  }
  std::vector<MajorityLength> out;
  for (std::size_t cl = 0; cl < hist.size(); ++cl) {
    if (hist[cl].empty()) continue;
    std::size_t total = 0, best_len = 0, best_count = 0;
    for (const auto& [len, count] : hist[cl]) {
      total += count;
      if (count > best_count) {  // ascending keys: ties keep the shorter length
        best_count = count;
        best_len = len;
      }
    }
    out.push_back({static_cast<int>(cl), best_len, static_cast<double>(best_count) / static_cast<double>(total)});
  }
  return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DomainError("adjusted_rand_index: labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto comb2 = [](double x) { return x * (x - 1) / 2.0; };
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [_, v] : table) index += comb2(v);
  for (const auto& [_, v] : rows) sum_a += comb2(v);
  for (const auto& [_, v] : cols) sum_b += comb2(v);
  const double expected = sum_a * sum_b / comb2(static_cast<double>(n));
  const double max_index = (sum_a + sum_b) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace passviz
