// Clustering analysis over address vectors: a 2-D principal-component
// projection for plotting, brute-force DBSCAN whose partition does not
// depend on input order, silhouette scoring on the original vectors, and a
// side-by-side comparison against the one-hot baseline representation.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "v6forge/addr.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/tensor.hpp"

namespace v6forge::cluster {

enum class Metric { euclidean, cosine };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::cosine: return "cosine";
  }
  throw ParamError("invalid metric");
}

inline Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw ParamError("unknown metric \"" + s + "\" (euclidean, cosine)");
}

/// Pairwise distance with fixed accumulation order.
inline double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) throw ShapeError("distance between vectors of different lengths");
  switch (metric) {
    case Metric::euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case Metric::cosine:
      return 1.0 - num::cosine_similarity(a, b);
  }
  throw ParamError("invalid metric");
}

/// Top-2 principal components of mean-centered rows, as an (n,2) tensor.
/// Sign convention: each component's largest-magnitude loading is positive,
/// so the projection is reproducible across eigensolver quirks.
inline num::Tensor project_2d(const num::Tensor& vectors) {
  if (vectors.rank() != 2) throw ShapeError("projection expects an (n,d) tensor");
  const int n = vectors.dim(0);
  const int d = vectors.dim(1);
  if (n < 2) throw ParamError("projection needs at least 2 vectors");

  Eigen::MatrixXd centered(n, d);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += vectors.values()[static_cast<std::size_t>(i) * d + j];
    mean /= n;
    for (int i = 0; i < n; ++i)
      centered(i, j) = vectors.values()[static_cast<std::size_t>(i) * d + j] - mean;
  }

  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw StateError("eigensolver failed on the covariance");

  // Eigenvalues ascend; the last columns hold the top components.
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
  for (int c = 0; c < 2 && c < d; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    int biggest = 0;
    for (int j = 1; j < d; ++j)
      if (std::abs(v(j)) > std::abs(v(biggest))) biggest = j;
    if (v(biggest) < 0.0) v = -v;
    axes.col(c) = v;
  }

  const Eigen::MatrixXd coords = centered * axes;  // (n,2)
  num::Tensor out({n, 2});
  for (int i = 0; i < n; ++i) {
    out.data()[static_cast<std::size_t>(i) * 2] = coords(i, 0);
    out.data()[static_cast<std::size_t>(i) * 2 + 1] = coords(i, 1);
  }
  return out;
}

namespace detail {

inline std::span<const double> row_of(const num::Tensor& vectors, int i) {
  const std::size_t d = static_cast<std::size_t>(vectors.dim(1));
  return vectors.values().subspan(static_cast<std::size_t>(i) * d, d);
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

/// True when `a` precedes `b` lexicographically; the data-dependent
/// tie-break that keeps border assignment independent of input order.
inline bool lex_less(std::span<const double> a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace detail

/// Brute-force DBSCAN. A point is core when at least min_pts points
/// (itself included) lie within eps. Core points within eps of each other
/// share a cluster; border points join the cluster of their nearest core
/// point (distance ties break toward the lexicographically smallest core
/// vector); everything else is noise (-1). The resulting partition depends
/// only on the point multiset, not its order.
inline std::vector<int> dbscan(const num::Tensor& vectors, double eps, int min_pts,
                               Metric metric = Metric::euclidean) {
  if (vectors.rank() != 2) throw ShapeError("dbscan expects an (n,d) tensor");
  if (eps <= 0.0) throw ParamError("eps must be positive");
  if (min_pts < 1) throw ParamError("min_pts must be at least 1");
  const int n = vectors.dim(0);

  std::vector<double> dist(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dd = distance(detail::row_of(vectors, i), detail::row_of(vectors, j), metric);
      dist[static_cast<std::size_t>(i) * n + j] = dd;
      dist[static_cast<std::size_t>(j) * n + i] = dd;
    }

  std::vector<bool> core(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    int inside = 0;
    for (int j = 0; j < n; ++j)
      if (dist[static_cast<std::size_t>(i) * n + j] <= eps) ++inside;
    core[static_cast<std::size_t>(i)] = inside >= min_pts;
  }

  detail::UnionFind uf(n);
  for (int i = 0; i < n; ++i) {
    if (!core[static_cast<std::size_t>(i)]) continue;
    for (int j = i + 1; j < n; ++j)
      if (core[static_cast<std::size_t>(j)] && dist[static_cast<std::size_t>(i) * n + j] <= eps)
        uf.unite(i, j);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<int> root_label(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    if (!core[static_cast<std::size_t>(i)]) continue;
    const int r = uf.find(i);
    if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = next++;
    labels[static_cast<std::size_t>(i)] = root_label[static_cast<std::size_t>(r)];
  }

  for (int i = 0; i < n; ++i) {
    if (core[static_cast<std::size_t>(i)]) continue;
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (!core[static_cast<std::size_t>(j)] || dist[static_cast<std::size_t>(i) * n + j] > eps)
        continue;
      if (best < 0) {
        best = j;
        continue;
      }
      const double dj = dist[static_cast<std::size_t>(i) * n + j];
      const double db = dist[static_cast<std::size_t>(i) * n + best];
      if (dj < db ||
          (dj == db &&
           detail::lex_less(detail::row_of(vectors, j), detail::row_of(vectors, best))))
        best = j;
    }
    if (best >= 0) labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(best)];
  }
  return labels;
}

/// eps heuristic: sort every point's distance to its k-th nearest other
/// point and take the value at the curve's elbow (the point furthest from
/// the chord between the curve's ends). Floored at 1e-12.
inline double choose_eps(const num::Tensor& vectors, int k, Metric metric = Metric::euclidean) {
  if (vectors.rank() != 2) throw ShapeError("choose_eps expects an (n,d) tensor");
  const int n = vectors.dim(0);
  if (k < 1) throw ParamError("k must be at least 1");
  if (n < k + 1) throw ParamError("need more than k points for the k-distance curve");

  std::vector<double> kth(static_cast<std::size_t>(n));
  std::vector<double> others(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (int j = 0; j < n; ++j)
      if (j != i)
        others[w++] = distance(detail::row_of(vectors, i), detail::row_of(vectors, j), metric);
    std::nth_element(others.begin(), others.begin() + (k - 1), others.end());
    kth[static_cast<std::size_t>(i)] = others[static_cast<std::size_t>(k - 1)];
  }
  std::sort(kth.begin(), kth.end());

  // Max distance to the chord from (0, kth[0]) to (n-1, kth[n-1]).
  const double x1 = 0.0, y1 = kth.front();
  const double x2 = static_cast<double>(n - 1), y2 = kth.back();
  const double len = std::sqrt((x2 - x1) * (x2 - x1) + (y2 - y1) * (y2 - y1));
  int elbow = n - 1;
  if (len > 0.0) {
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double dist_to_chord =
          std::abs((y2 - y1) * i - (x2 - x1) * kth[static_cast<std::size_t>(i)] + x2 * y1 -
                   y2 * x1) /
          len;
      if (dist_to_chord > best) {
        best = dist_to_chord;
        elbow = i;
      }
    }
  }
  return std::max(kth[static_cast<std::size_t>(elbow)], 1e-12);
}

/// Mean silhouette over non-noise points, textbook formula, O(n^2).
/// Degenerate partitions (fewer than 2 clusters among non-noise points)
/// score -1; singleton clusters contribute 0 for their point.
inline double silhouette(const num::Tensor& vectors, const std::vector<int>& labels,
                         Metric metric = Metric::euclidean) {
  if (vectors.rank() != 2) throw ShapeError("silhouette expects an (n,d) tensor");
  const int n = vectors.dim(0);
  if (labels.size() != static_cast<std::size_t>(n))
    throw ShapeError("labels length does not match vector count");

  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  if (max_label < 1) return -1.0;  // zero or one cluster
  const int k = max_label + 1;

  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels)
    if (l >= 0) sizes[static_cast<std::size_t>(l)]++;

  double total = 0.0;
  int counted = 0;
  std::vector<double> sum_to(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < n; ++i) {
    const int li = labels[static_cast<std::size_t>(i)];
    if (li < 0) continue;
    ++counted;
    if (sizes[static_cast<std::size_t>(li)] <= 1) continue;  // singleton: s = 0

    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      const int lj = labels[static_cast<std::size_t>(j)];
      if (lj < 0 || j == i) continue;
      sum_to[static_cast<std::size_t>(lj)] +=
          distance(detail::row_of(vectors, i), detail::row_of(vectors, j), metric);
    }
    const double a = sum_to[static_cast<std::size_t>(li)] /
                     static_cast<double>(sizes[static_cast<std::size_t>(li)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == li || sizes[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, sum_to[static_cast<std::size_t>(c)] /
                          static_cast<double>(sizes[static_cast<std::size_t>(c)]));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  if (counted == 0) return -1.0;
  return total / static_cast<double>(counted);
}

/// Project + cluster + score in one pass. `eps` empty -> k-distance elbow
/// with k = min_pts. Silhouette is computed on the original vectors.
struct ClusterResult {
  num::Tensor coords;       // (n,2) projection
  std::vector<int> labels;  // -1 = noise
  int cluster_count = 0;
  int noise_count = 0;
  double eps = 0.0;
  int min_pts = 0;
  double silhouette = -1.0;
};

inline ClusterResult analyze(const num::Tensor& vectors, std::optional<double> eps, int min_pts,
                             Metric metric = Metric::euclidean) {
  ClusterResult out;
  out.min_pts = min_pts;
  out.eps = eps.has_value() ? *eps : choose_eps(vectors, min_pts, metric);
  out.coords = project_2d(vectors);
  out.labels = dbscan(vectors, out.eps, min_pts, metric);
  int max_label = -1;
  for (int l : out.labels) {
    max_label = std::max(max_label, l);
    if (l < 0) ++out.noise_count;
  }
  out.cluster_count = max_label + 1;
  out.silhouette = silhouette(vectors, out.labels, metric);
  return out;
}

/// Same clustering pipeline over two representations of the same
/// addresses, reported side by side.
struct BaselineComparison {
  ClusterResult embedding;
  ClusterResult one_hot;
};

inline BaselineComparison compare_baseline(const num::Tensor& embed_vectors,
                                           const num::Tensor& onehot_vectors,
                                           std::optional<double> eps, int min_pts,
                                           Metric metric = Metric::euclidean) {
  if (embed_vectors.dim(0) != onehot_vectors.dim(0))
    throw ShapeError("representations must cover the same addresses");
  return {analyze(embed_vectors, eps, min_pts, metric),
          analyze(onehot_vectors, eps, min_pts, metric)};
}

inline constexpr int kClustersFormatVersion = 1;

/// clusters.tsv: "address<TAB>x<TAB>y<TAB>label" per row, %.9g coordinates.
inline void save_clusters(std::span<const addr::Address> addresses, const ClusterResult& result,
                          const std::filesystem::path& path) {
  if (addresses.size() != result.labels.size())
    throw ShapeError("address list does not match clustering size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "# v6forge clusters format " << kClustersFormatVersion << "\n";
  char buf[32];
  for (std::size_t i = 0; i < addresses.size(); ++i) {
    out << addr::format_address(addresses[i]);
    std::snprintf(buf, sizeof(buf), "%.9g", result.coords.values()[i * 2]);
    out << '\t' << buf;
    std::snprintf(buf, sizeof(buf), "%.9g", result.coords.values()[i * 2 + 1]);
    out << '\t' << buf;
    out << '\t' << result.labels[i] << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

inline nlohmann::json summary_json(const ClusterResult& r) {
  return nlohmann::json{{"cluster_count", r.cluster_count}, {"noise_count", r.noise_count},
                        {"eps", r.eps},                     {"min_pts", r.min_pts},
                        {"silhouette", r.silhouette},       {"points", r.labels.size()}};
}

inline void save_summary(const ClusterResult& result, const std::filesystem::path& path) {
  nlohmann::json j = summary_json(result);
  j["format_version"] = kClustersFormatVersion;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

inline void save_comparison(const BaselineComparison& cmp, const std::filesystem::path& path) {
  nlohmann::json j{{"format_version", kClustersFormatVersion},
                   {"embedding", summary_json(cmp.embedding)},
                   {"one_hot", summary_json(cmp.one_hot)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace v6forge::cluster
