#include "passviz/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "passviz/error.hpp"
#include "passviz/parallel.hpp"

namespace passviz {

namespace {

constexpr double kFloor = 1e-12;
constexpr double kEntropyTolerance = 1e-5;
constexpr int kMaxBisectionSteps = 50;
constexpr double kInitStddev = 1e-4;
constexpr std::size_t kMaxDensePoints = 20000;

inline double sign(double v) { return (v > 0) - (v < 0); }

// Z = sum_{i != j} 1 / (1 + |y_i - y_j|^2), accumulated row by row.
double student_t_normaliser(std::span<const Point2> y) {
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i == j) continue;
      const double dx = y[i].x - y[j].x;
      const double dy = y[i].y - y[j].y;
      z += 1.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  return z;
}

inline double q_entry(const Point2& a, const Point2& b, double z) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return (1.0 / (1.0 + dx * dx + dy * dy)) / z;
}

// Static quadtree over a 2-D layout; nodes keep their centre of mass and
// point count so far-away cells can stand in for all of their points.
class QuadTree {
 public:
  explicit QuadTree(std::span<const Point2> pts) : pts_(pts), order_(pts.size()) {
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    double minx = std::numeric_limits<double>::infinity(), miny = minx;
    double maxx = -minx, maxy = -minx;
    for (const auto& p : pts) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const double half = std::max(maxx - minx, maxy - miny) / 2.0 + 1e-5;
    nodes_.reserve(2 * pts.size() + 1);
    build(0, static_cast<std::uint32_t>(pts.size()), (minx + maxx) / 2.0, (miny + maxy) / 2.0, half, 0);
  }

  /// Repulsive numerator sum_j q_ij^2 Z^2 (y_i - y_j) and the row's share of Z.
  void repulsion(std::size_t i, double theta, double& fx, double& fy, double& z) const {
    const Point2 yi = pts_[i];
    const double theta2 = theta * theta;
    thread_local std::vector<std::int32_t> stack;
    stack.clear();
    stack.push_back(0);
    while (!stack.empty()) {
      const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (node.leaf) {
        for (std::uint32_t k = node.begin; k < node.end; ++k) {
          const std::uint32_t p = order_[k];
          if (p == i) continue;
          const double dx = yi.x - pts_[p].x;
          const double dy = yi.y - pts_[p].y;
          const double num = 1.0 / (1.0 + dx * dx + dy * dy);
          z += num;
          fx += num * num * dx;
          fy += num * num * dy;
        }
        continue;
      }
      const double dx = yi.x - node.comx;
      const double dy = yi.y - node.comy;
      const double d2 = dx * dx + dy * dy;
      const double width = 2.0 * node.half;
      if (width * width < theta2 * d2) {
        const double count = static_cast<double>(node.end - node.begin);
        const double num = 1.0 / (1.0 + d2);
        z += count * num;
        fx += count * num * num * dx;
        fy += count * num * num * dy;
      } else {
        for (int c = 3; c >= 0; --c) {
          if (node.child[c] >= 0) stack.push_back(node.child[c]);
        }
      }
    }
  }

 private:
  struct Node {
    double cx, cy, half;
    double comx, comy;
    std::uint32_t begin, end;
    std::int32_t child[4];
    bool leaf;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, double cx, double cy, double half, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    Node node{cx, cy, half, 0, 0, begin, end, {-1, -1, -1, -1}, true};
    double sx = 0, sy = 0;
    bool identical = true;
    for (std::uint32_t k = begin; k < end; ++k) {
      const auto& p = pts_[order_[k]];
      sx += p.x;
      sy += p.y;
      if (p != pts_[order_[begin]]) identical = false;
    }
    const double count = static_cast<double>(end - begin);
    node.comx = count > 0 ? sx / count : cx;
    node.comy = count > 0 ? sy / count : cy;
    nodes_.push_back(node);
    if (end - begin <= 1 || identical || depth >= 64) return id;

    // Stable partition into quadrants 0..3 = (x >= cx) + 2 * (y >= cy).
    auto quadrant = [&](std::uint32_t p) {
      return (pts_[p].x >= cx ? 1 : 0) + (pts_[p].y >= cy ? 2 : 0);
    };
    std::vector<std::uint32_t> tmp(order_.begin() + begin, order_.begin() + end);
    std::uint32_t bounds[5];
    bounds[0] = begin;
    std::uint32_t pos = begin;
    for (int q = 0; q < 4; ++q) {
      for (auto p : tmp) {
        if (quadrant(p) == q) order_[pos++] = p;
      }
      bounds[q + 1] = pos;
    }
    nodes_[static_cast<std::size_t>(id)].leaf = false;
    const double h = half / 2.0;
    for (int q = 0; q < 4; ++q) {
      if (bounds[q] == bounds[q + 1]) continue;
      const double ccx = cx + ((q & 1) ? h : -h);
      const double ccy = cy + ((q & 2) ? h : -h);
      const auto child = build(bounds[q], bounds[q + 1], ccx, ccy, h, depth + 1);
      nodes_[static_cast<std::size_t>(id)].child[q] = child;
    }
    return id;
  }

  std::span<const Point2> pts_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Exact O(M^2) gradient over dense affinities.
class ExactEngine {
 public:
  ExactEngine(DenseAffinities p, unsigned workers) : p_(std::move(p)), workers_(workers) {}

  void gradient(std::span<const Point2> y, double exaggeration, std::span<Point2> grad) {
    const std::size_t n = y.size();
    attr_.resize(n);
    rep_.resize(n);
    zpart_.resize(n);
    parallel_for(n, workers_, 64, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double ax = 0, ay = 0, rx = 0, ry = 0, z = 0;
        const double* prow = p_.p.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dx = y[i].x - y[j].x;
          const double dy = y[i].y - y[j].y;
          const double num = 1.0 / (1.0 + dx * dx + dy * dy);
          z += num;
          ax += prow[j] * num * dx;
          ay += prow[j] * num * dy;
          rx += num * num * dx;
          ry += num * num * dy;
        }
        attr_[i] = {ax, ay};
        rep_[i] = {rx, ry};
        zpart_[i] = z;
      }
    });
    const double z = std::accumulate(zpart_.begin(), zpart_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      grad[i].x = 4.0 * (exaggeration * attr_[i].x - rep_[i].x / z);
      grad[i].y = 4.0 * (exaggeration * attr_[i].y - rep_[i].y / z);
    }
  }

  double kl(std::span<const Point2> y) const { return kl_divergence(p_, y); }

 private:
  DenseAffinities p_;
  unsigned workers_;
  std::vector<Point2> attr_, rep_;
  std::vector<double> zpart_;
};

// Sparse attraction plus quadtree repulsion.
class BarnesHutEngine {
 public:
  BarnesHutEngine(SparseAffinities p, double theta, unsigned workers)
      : p_(std::move(p)), theta_(theta), workers_(workers) {}

  void gradient(std::span<const Point2> y, double exaggeration, std::span<Point2> grad) {
    const std::size_t n = y.size();
    QuadTree tree(y);
    attr_.resize(n);
    rep_.resize(n);
    zpart_.resize(n);
    parallel_for(n, workers_, 64, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double ax = 0, ay = 0;
        for (std::size_t k = p_.row_ptr[i]; k < p_.row_ptr[i + 1]; ++k) {
          const std::size_t j = p_.col[k];
          const double dx = y[i].x - y[j].x;
          const double dy = y[i].y - y[j].y;
          const double num = 1.0 / (1.0 + dx * dx + dy * dy);
          ax += p_.val[k] * num * dx;
          ay += p_.val[k] * num * dy;
        }
        double rx = 0, ry = 0, z = 0;
        tree.repulsion(i, theta_, rx, ry, z);
        attr_[i] = {ax, ay};
        rep_[i] = {rx, ry};
        zpart_[i] = z;
      }
    });
    const double z = std::accumulate(zpart_.begin(), zpart_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      grad[i].x = 4.0 * (exaggeration * attr_[i].x - rep_[i].x / z);
      grad[i].y = 4.0 * (exaggeration * attr_[i].y - rep_[i].y / z);
    }
  }

  // KL over the non-zero affinities, with Z estimated by the same tree.
  double kl(std::span<const Point2> y) {
    const std::size_t n = y.size();
    QuadTree tree(y);
    zpart_.resize(n);
    parallel_for(n, workers_, 64, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        double rx = 0, ry = 0, z = 0;
        tree.repulsion(i, theta_, rx, ry, z);
        zpart_[i] = z;
      }
    });
    const double z = std::accumulate(zpart_.begin(), zpart_.end(), 0.0);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = p_.row_ptr[i]; k < p_.row_ptr[i + 1]; ++k) {
        const double p = p_.val[k];
        if (p <= 0) continue;
        const double q = q_entry(y[i], y[p_.col[k]], z);
        kl += p * std::log(std::max(p, kFloor) / std::max(q, kFloor));
      }
    }
    return kl;
  }

 private:
  SparseAffinities p_;
  double theta_;
  unsigned workers_;
  std::vector<Point2> attr_, rep_;
  std::vector<double> zpart_;
};

template <typename Engine>
void optimise(Engine& engine, const TsneParams& params, Embedding& out) {
  const std::size_t n = out.coords.size();
  std::vector<Point2>& y = out.coords;
  std::vector<Point2> grad(n), update(n), gains(n, Point2{1.0, 1.0});
  const double lr = params.resolved_learning_rate(n);

  for (auto& p : y) {
    p.x = static_cast<float>(p.x);
    p.y = static_cast<float>(p.y);
  }
  const std::vector<Point2> start = y;
  out.kl_start = engine.kl(y);
  if (!std::isfinite(out.kl_start)) throw NumericError(0, "initial KL divergence is not finite");

  auto step = [&](double g, double& u, double& gain, double& coord, double momentum) {
    gain = sign(g) != sign(u) ? gain + 0.2 : gain * 0.8;
    gain = std::max(gain, 0.01);
    u = momentum * u - lr * gain * g;
    coord += u;
  };

  for (int it = 0; it < params.iterations; ++it) {
    const bool early = it < params.early_exaggeration_iters;
    const double exaggeration = early ? params.early_exaggeration_factor : 1.0;
    const double momentum = early ? params.momentum_initial : params.momentum_final;
    engine.gradient(y, exaggeration, grad);

    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      step(grad[i].x, update[i].x, gains[i].x, y[i].x, momentum);
      step(grad[i].y, update[i].y, gains[i].y, y[i].y, momentum);
      if (!std::isfinite(y[i].x) || !std::isfinite(y[i].y)) {
        throw NumericError(it, "non-finite coordinate for point " + std::to_string(i));
      }
      mx += y[i].x;
      my += y[i].y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (auto& p : y) {
      p.x -= mx;
      p.y -= my;
    }
  }

  // Stored coordinates are f32; evaluate the final objective on what is kept.
  for (auto& p : y) {
    p.x = static_cast<float>(p.x);
    p.y = static_cast<float>(p.y);
  }
  out.kl_final = engine.kl(y);
  if (!std::isfinite(out.kl_final)) {
    throw NumericError(params.iterations, "final KL divergence is not finite");
  }
  // Only happens when the start is already near-optimal (e.g. all inputs
  // identical, so the collapsed initial layout matches P almost exactly).
  if (out.kl_final > out.kl_start) {
    y = start;
    out.kl_final = out.kl_start;
  }
}

// Squared distances from row i to every row; entry i is left at 0.
void distances_from(const FeatureMatrix& x, std::size_t i, std::vector<double>& out) {
  out.resize(x.rows);
  const auto ri = x.row(i);
  for (std::size_t j = 0; j < x.rows; ++j) out[j] = (j == i) ? 0.0 : squared_distance(ri, x.row(j));
}

}  // namespace

FeatureMatrix FeatureMatrix::from(const DistanceMatrix& m) {
  FeatureMatrix f;
  f.rows = m.rows;
  f.cols = m.cols;
  f.values.assign(m.values.begin(), m.values.end());
  return f;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  // Four independent accumulators in a fixed order keep this deterministic.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const std::size_t n = a.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const double d0 = double(a[k]) - double(b[k]);
    const double d1 = double(a[k + 1]) - double(b[k + 1]);
    const double d2 = double(a[k + 2]) - double(b[k + 2]);
    const double d3 = double(a[k + 3]) - double(b[k + 3]);
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; k < n; ++k) {
    const double d = double(a[k]) - double(b[k]);
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

TsneParams TsneParams::defaults_for(std::size_t m) {
  TsneParams p;
  p.theta = m > 5000 ? 0.5 : 0.0;
  return p;
}

double TsneParams::resolved_learning_rate(std::size_t m) const {
  if (learning_rate) return *learning_rate;
  return std::max(static_cast<double>(m) / 12.0, 50.0);
}

void TsneParams::validate(std::size_t m) const {
  if (m < 4) throw DomainError("t-SNE needs at least 4 points, got " + std::to_string(m));
  if (!(perplexity > 0)) throw DomainError("perplexity must be positive");
  if (!(perplexity < (static_cast<double>(m) - 1.0) / 3.0)) {
    throw DomainError("perplexity " + std::to_string(perplexity) + " too large for " + std::to_string(m) +
                      " points (must be < (M - 1) / 3)");
  }
  if (iterations <= 0) throw DomainError("iterations must be positive");
  if (early_exaggeration_iters < 0 || early_exaggeration_iters > iterations) {
    throw DomainError("early exaggeration iterations must lie in [0, iterations]");
  }
  if (!(early_exaggeration_factor > 0)) throw DomainError("early exaggeration factor must be positive");
  if (learning_rate && !(*learning_rate > 0)) throw DomainError("learning rate must be positive");
  for (double mom : {momentum_initial, momentum_final}) {
    if (!(mom >= 0 && mom < 1)) throw DomainError("momentum must lie in [0, 1)");
  }
  if (!(theta >= 0 && theta <= 1)) throw DomainError("theta must lie in [0, 1]");
}

RowCalibration calibrate_row(std::span<const double> d, double perplexity, std::span<double> probs) {
  RowCalibration r;
  const std::size_t n = d.size();
  if (n == 0) return r;
  const double dmin = *std::min_element(d.begin(), d.end());
  const double target = std::log(perplexity);

  double mean = 0;
  for (double v : d) mean += v - dmin;
  mean /= static_cast<double>(n);

  double sum = 0;
  auto entropy = [&](double beta) {
    sum = 0;
    double weighted = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double shifted = d[j] - dmin;
      const double p = std::exp(-beta * shifted);
      probs[j] = p;
      sum += p;
      weighted += shifted * p;
    }
    return std::log(sum) + beta * weighted / sum;
  };

  double beta = mean > 0 ? 1.0 / mean : 1.0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double best_beta = beta, best_h = 0, best_err = std::numeric_limits<double>::infinity();
  double last_beta = beta;
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    const double h = entropy(beta);
    last_beta = beta;
    r.steps = step + 1;
    const double err = h - target;
    if (std::abs(err) < best_err) {
      best_err = std::abs(err);
      best_beta = beta;
      best_h = h;
    }
    if (std::abs(err) < kEntropyTolerance) break;
    if (err > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = (beta + lo) / 2.0;
    }
  }
  if (last_beta != best_beta) entropy(best_beta);
  for (auto& p : probs) p /= sum;
  r.beta = best_beta;
  r.perplexity = std::exp(best_h);
  return r;
}

DenseAffinities exact_affinities(const FeatureMatrix& x, double perplexity, unsigned workers,
                                 AffinityDiagnostics* diag) {
  const std::size_t n = x.rows;
  if (n > kMaxDensePoints) {
    throw DomainError("exact affinities for " + std::to_string(n) +
                      " points would not fit in memory; use theta > 0");
  }
  DenseAffinities out;
  out.n = n;
  out.p.assign(n * n, 0.0);
  std::vector<double> realised(n, 0.0);
  parallel_for(n, workers, 32, [&](std::size_t b, std::size_t e) {
    std::vector<double> all, d(n - 1), probs(n - 1);
    for (std::size_t i = b; i < e; ++i) {
      distances_from(x, i, all);
      for (std::size_t j = 0, k = 0; j < n; ++j) {
        if (j != i) d[k++] = all[j];
      }
      realised[i] = calibrate_row(d, perplexity, probs).perplexity;
      for (std::size_t j = 0, k = 0; j < n; ++j) {
        if (j != i) out.p[i * n + j] = probs[k++];
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = out.p[i * n + j] + out.p[j * n + i];
      out.p[i * n + j] = v;
      out.p[j * n + i] = v;
    }
  }
  const double total = std::accumulate(out.p.begin(), out.p.end(), 0.0);
  for (auto& v : out.p) v /= total;
  if (diag) diag->realised_perplexity = std::move(realised);
  return out;
}

SparseAffinities sparse_affinities(const FeatureMatrix& x, double perplexity, unsigned workers,
                                   AffinityDiagnostics* diag) {
  const std::size_t n = x.rows;
  const std::size_t k = std::min<std::size_t>(n - 1, static_cast<std::size_t>(3.0 * perplexity));
  std::vector<std::uint32_t> nbr(n * k);
  std::vector<double> cond(n * k);
  std::vector<double> realised(n, 0.0);

  parallel_for(n, workers, 32, [&](std::size_t b, std::size_t e) {
    std::vector<double> all, d(k), probs(k);
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t i = b; i < e; ++i) {
      distances_from(x, i, all);
      cand.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) cand.emplace_back(all[j], static_cast<std::uint32_t>(j));
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      for (std::size_t t = 0; t < k; ++t) d[t] = cand[t].first;
      realised[i] = calibrate_row(d, perplexity, probs).perplexity;
      for (std::size_t t = 0; t < k; ++t) {
        nbr[i * k + t] = cand[t].second;
        cond[i * k + t] = probs[t];
      }
    }
  });

  // Symmetrise: p_ij = p(j|i) + p(i|j), then normalise to total mass 1.
  struct Edge {
    std::uint32_t i, j;
    double v;
  };
  std::vector<Edge> edges;
  edges.reserve(2 * n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const auto j = nbr[i * k + t];
      edges.push_back({static_cast<std::uint32_t>(i), j, cond[i * k + t]});
      edges.push_back({j, static_cast<std::uint32_t>(i), cond[i * k + t]});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : (a.j != b.j ? a.j < b.j : a.v < b.v);
  });

  SparseAffinities out;
  out.n = n;
  out.row_ptr.assign(n + 1, 0);
  for (std::size_t e = 0; e < edges.size();) {
    std::size_t f = e;
    double v = 0;
    while (f < edges.size() && edges[f].i == edges[e].i && edges[f].j == edges[e].j) v += edges[f++].v;
    out.col.push_back(edges[e].j);
    out.val.push_back(v);
    ++out.row_ptr[edges[e].i + 1];
    e = f;
  }
  for (std::size_t i = 0; i < n; ++i) out.row_ptr[i + 1] += out.row_ptr[i];
  const double total = std::accumulate(out.val.begin(), out.val.end(), 0.0);
  for (auto& v : out.val) v /= total;
  if (diag) diag->realised_perplexity = std::move(realised);
  return out;
}

DenseAffinities student_t_affinities(std::span<const Point2> y) {
  const std::size_t n = y.size();
  const double z = student_t_normaliser(y);
  DenseAffinities q;
  q.n = n;
  q.p.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) q.p[i * n + j] = q_entry(y[i], y[j], z);
    }
  }
  return q;
}

double kl_divergence(const DenseAffinities& p, std::span<const Point2> y) {
  const std::size_t n = y.size();
  if (p.n != n) throw DomainError("affinity matrix and layout sizes differ");
  const double z = student_t_normaliser(y);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p.p[i * n + j];
      if (pij <= 0) continue;
      const double q = q_entry(y[i], y[j], z);
      kl += pij * std::log(std::max(pij, kFloor) / std::max(q, kFloor));
    }
  }
  return kl;
}

std::vector<Point2> kl_gradient(const DenseAffinities& p, std::span<const Point2> y) {
  const std::size_t n = y.size();
  if (p.n != n) throw DomainError("affinity matrix and layout sizes differ");
  const double z = student_t_normaliser(y);
  std::vector<Point2> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[i].x - y[j].x;
      const double dy = y[i].y - y[j].y;
      const double num = 1.0 / (1.0 + dx * dx + dy * dy);
      const double coeff = 4.0 * (p.p[i * n + j] - num / z) * num;
      g[i].x += coeff * dx;
      g[i].y += coeff * dy;
    }
  }
  return g;
}

double trustworthiness(const FeatureMatrix& high, std::span<const Point2> low, std::size_t k,
                       unsigned workers) {
  const std::size_t n = high.rows;
  if (low.size() != n) throw DomainError("trustworthiness: high and low point counts differ");
  if (k == 0 || 2 * k >= n) {
    throw DomainError("trustworthiness: k must satisfy 1 <= k < M/2 (k=" + std::to_string(k) +
                      ", M=" + std::to_string(n) + ")");
  }
  std::vector<double> penalty(n, 0.0);
  parallel_for(n, workers, 16, [&](std::size_t b, std::size_t e) {
    std::vector<double> hd;
    std::vector<std::pair<double, std::size_t>> ld;
    for (std::size_t i = b; i < e; ++i) {
      distances_from(high, i, hd);
      ld.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = low[i].x - low[j].x;
        const double dy = low[i].y - low[j].y;
        ld.emplace_back(dx * dx + dy * dy, j);
      }
      std::partial_sort(ld.begin(), ld.begin() + static_cast<std::ptrdiff_t>(k), ld.end());
      double sum = 0;
      for (std::size_t t = 0; t < k; ++t) {
        const std::size_t j = ld[t].second;
        // Rank of j among i's high-dimensional neighbours, ties by index.
        std::size_t rank = 1;
        for (std::size_t l = 0; l < n; ++l) {
          if (l == i || l == j) continue;
          if (hd[l] < hd[j] || (hd[l] == hd[j] && l < j)) ++rank;
        }
        if (rank > k) sum += static_cast<double>(rank - k);
      }
      penalty[i] = sum;
    }
  });
  const double total = std::accumulate(penalty.begin(), penalty.end(), 0.0);
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  return 1.0 - 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0)) * total;
}

Embedding tsne_embed(const FeatureMatrix& x, const TsneParams& params, unsigned workers) {
  params.validate(x.rows);
  Embedding out;
  out.params = params;
  out.coords.resize(x.rows);
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> init(0.0, kInitStddev);
  for (auto& p : out.coords) {
    p.x = init(rng);
    p.y = init(rng);
  }
  if (params.theta == 0.0) {
    ExactEngine engine(exact_affinities(x, params.perplexity, workers), workers);
    optimise(engine, params, out);
  } else {
    BarnesHutEngine engine(sparse_affinities(x, params.perplexity, workers), params.theta, workers);
    optimise(engine, params, out);
  }
  return out;
}

Embedding tsne_embed(const DistanceMatrix& m, const TsneParams& params, unsigned workers) {
  Embedding e = tsne_embed(FeatureMatrix::from(m), params, workers);
  e.anchor_hash = m.anchor_hash;
  return e;
}

std::string serialize_embedding(const Embedding& e) {
  ByteWriter w;
  w.bytes("PVEM");
  w.u16(kEmbeddingVersion);
  w.u64(e.coords.size());
  for (const auto& p : e.coords) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
  }
  const auto& t = e.params;
  w.f64(t.perplexity);
  w.u32(static_cast<std::uint32_t>(t.iterations));
  w.f64(t.early_exaggeration_factor);
  w.u32(static_cast<std::uint32_t>(t.early_exaggeration_iters));
  w.u8(t.learning_rate ? 0 : 1);
  w.f64(t.learning_rate.value_or(t.resolved_learning_rate(e.coords.size())));
  w.f64(t.momentum_initial);
  w.f64(t.momentum_final);
  w.u64(t.seed);
  w.f64(t.theta);
  w.f64(e.kl_start);
  w.f64(e.kl_final);
  w.digest(e.anchor_hash);
  return w.take();
}

Embedding deserialize_embedding(std::string_view bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.bytes(4) != "PVEM") throw VersionError(source + ": not an embedding file (bad magic)");
  const auto version = r.u16();
  if (version != kEmbeddingVersion) {
    throw VersionError(source + ": unsupported embedding version " + std::to_string(version));
  }
  Embedding e;
  const auto m = r.u64();
  if (m > r.remaining() / 8) throw VersionError(source + ": header point count exceeds file size");
  e.coords.resize(m);
  for (auto& p : e.coords) {
    p.x = r.f32();
    p.y = r.f32();
  }
  auto& t = e.params;
  t.perplexity = r.f64();
  t.iterations = static_cast<int>(r.u32());
  t.early_exaggeration_factor = r.f64();
  t.early_exaggeration_iters = static_cast<int>(r.u32());
  const bool lr_auto = r.u8() != 0;
  const double lr = r.f64();
  if (!lr_auto) t.learning_rate = lr;
  t.momentum_initial = r.f64();
  t.momentum_final = r.f64();
  t.seed = r.u64();
  t.theta = r.f64();
  e.kl_start = r.f64();
  e.kl_final = r.f64();
  e.anchor_hash = r.digest();
  if (r.remaining() != 0) throw VersionError(source + ": trailing bytes after anchor hash");
  return e;
}

void write_embedding(const std::filesystem::path& path, const Embedding& e) {
  write_file_atomic(path, serialize_embedding(e));
}

Embedding read_embedding(const std::filesystem::path& path) {
  return deserialize_embedding(read_file(path), path.string());
}

}  // namespace passviz
