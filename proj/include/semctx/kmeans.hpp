#pragma once

#include <cstdint>
#include <vector>

namespace semctx {

using Point = std::vector<double>;

struct KMeansResult {
  std::vector<Point> centers;
  std::vector<int> assignments;
  bool converged = false;
  int iterations = 0;
  /// Objective (sum of squared distances to assigned centers) after each assignment step.
  std::vector<double> objective_history;

  std::vector<long> cluster_sizes() const;
};

std::size_t count_distinct(const std::vector<Point>& points);

double squared_distance(const Point& a, const Point& b);

/// Index of the nearest center; ties go to the lowest index.
int nearest_center(const Point& p, const std::vector<Point>& centers);

double kmeans_objective(const std::vector<Point>& points, const std::vector<Point>& centers,
                        const std::vector<int>& assignments);

/// Lloyd's algorithm on unit vectors with distance-weighted seeding. Centers are
/// projected back to the unit sphere after every mean update. Converged means an
/// assignment step left every assignment unchanged within `max_iter` iterations.
/// Throws std::invalid_argument when k exceeds the number of distinct points.
KMeansResult kmeans(const std::vector<Point>& points, int k, int max_iter, std::uint64_t seed);

struct ClusterCountStep {
  int k = 0;
  bool converged = false;
  std::vector<long> sizes;
  bool accepted = false;
};

struct ClusterCountChoice {
  int k = 1;
  std::vector<ClusterCountStep> steps;
};

inline constexpr int kMinClusterSearch = 2;
inline constexpr int kMaxClusterSearch = 15;
inline constexpr int kClusterMaxIterations = 100;

/// Cluster count for one common class: starting from 2, try k = 2..15 and keep
/// k while every cluster holds more than `n_star` samples; a non-converged run
/// skips the balance check, a failed check stops the search. Fewer than two
/// distinct points yield 1. A k above the distinct-point count stops the search.
ClusterCountChoice choose_cluster_count(const std::vector<Point>& points, long n_star, std::uint64_t seed);

/// Seed used for the k-means run with `k` clusters inside choose_cluster_count.
std::uint64_t cluster_run_seed(std::uint64_t seed, int k);

}  // namespace semctx
