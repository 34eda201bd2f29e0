#include "semctx/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "semctx/rng.hpp"

namespace semctx {
namespace {

void normalize(Point& p) {
  double norm = 0.0;
  for (double v : p) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& v : p) v /= norm;
}

std::vector<Point> seed_centers(const std::vector<Point>& points, int k, Rng& rng) {
  std::vector<Point> centers;
  centers.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
      total += d2[i];
    }
    // total > 0 because k does not exceed the number of distinct points.
    double target = rng.uniform() * total;
    std::size_t pick = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      target -= d2[i];
      if (target < 0.0) break;
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

}  // namespace

std::vector<long> KMeansResult::cluster_sizes() const {
  std::vector<long> sizes(centers.size(), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

std::size_t count_distinct(const std::vector<Point>& points) {
  std::vector<const Point*> sorted;
  sorted.reserve(points.size());
  for (const auto& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const Point* a, const Point* b) { return *a < *b; });
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || *sorted[i] != *sorted[i - 1]) ++distinct;
  }
  return distinct;
}

double squared_distance(const Point& a, const Point& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

int nearest_center(const Point& p, const std::vector<Point>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double kmeans_objective(const std::vector<Point>& points, const std::vector<Point>& centers,
                        const std::vector<int>& assignments) {
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum += squared_distance(points[i], centers[static_cast<std::size_t>(assignments[i])]);
  }
  return sum;
}

KMeansResult kmeans(const std::vector<Point>& points, int k, int max_iter, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
  if (points.empty()) throw std::invalid_argument("k-means needs at least one point");
  const std::size_t distinct = count_distinct(points);
  if (static_cast<std::size_t>(k) > distinct) {
    throw std::invalid_argument("k-means with k = " + std::to_string(k) + " but only " + std::to_string(distinct) +
                                " distinct points");
  }
  const std::size_t dim = points.front().size();
  Rng rng(seed);

  KMeansResult res;
  res.centers = seed_centers(points, k, rng);
  res.assignments.assign(points.size(), -1);

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int a = nearest_center(points[i], res.centers);
      if (a != res.assignments[i]) {
        res.assignments[i] = a;
        changed = true;
      }
    }
    res.iterations = iter + 1;
    res.objective_history.push_back(kmeans_objective(points, res.centers, res.assignments));
    if (!changed) {
      res.converged = true;
      break;
    }

    std::vector<Point> sums(static_cast<std::size_t>(k), Point(dim, 0.0));
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[static_cast<std::size_t>(res.assignments[i])];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[static_cast<std::size_t>(res.assignments[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      normalize(sums[static_cast<std::size_t>(c)]);
      res.centers[static_cast<std::size_t>(c)] = std::move(sums[static_cast<std::size_t>(c)]);
    }
    // An emptied cluster restarts at the point worst served by its center.
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      std::size_t worst = 0;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = squared_distance(points[i], res.centers[static_cast<std::size_t>(res.assignments[i])]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      res.centers[static_cast<std::size_t>(c)] = points[worst];
      res.assignments[worst] = c;
    }
  }
  return res;
}

std::uint64_t cluster_run_seed(std::uint64_t seed, int k) {
  return derive_seed(seed, "kmeans", static_cast<std::uint64_t>(k));
}

ClusterCountChoice choose_cluster_count(const std::vector<Point>& points, long n_star, std::uint64_t seed) {
  ClusterCountChoice choice;
  const std::size_t distinct = count_distinct(points);
  if (distinct < 2) {
    choice.k = 1;
    return choice;
  }
  choice.k = kMinClusterSearch;
  for (int i = kMinClusterSearch; i <= kMaxClusterSearch; ++i) {
    if (static_cast<std::size_t>(i) > distinct) break;
    const auto run = kmeans(points, i, kClusterMaxIterations, cluster_run_seed(seed, i));
    ClusterCountStep step;
    step.k = i;
    step.converged = run.converged;
    step.sizes = run.cluster_sizes();
    if (!run.converged) {
      choice.steps.push_back(std::move(step));
      continue;
    }
    step.accepted = std::all_of(step.sizes.begin(), step.sizes.end(), [n_star](long s) { return s > n_star; });
    const bool accepted = step.accepted;
    choice.steps.push_back(std::move(step));
    if (!accepted) break;
    choice.k = i;
  }
  return choice;
}

}  // namespace semctx
