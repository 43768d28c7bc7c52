// Copyright 2026 The ipqgr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipqgr/vector_core.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ipqgr {

double RandomSource::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RandomSource::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

double RandomSource::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RandomSource::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = 1.0 - uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

std::uint64_t RandomSource::derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

double squared_dist(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("distance: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  return (a - b).squaredNorm();
}

double euclidean_dist(const Vector& a, const Vector& b) { return std::sqrt(squared_dist(a, b)); }

std::pair<std::size_t, double> nearest_centroid(const Vector& x, std::span<const Vector> centroids) {
  if (centroids.empty()) throw std::invalid_argument("nearest_centroid: no centroids");
  std::size_t best = 0;
  double best_d = squared_dist(x, centroids[0]);
  for (std::size_t k = 1; k < centroids.size(); ++k) {
    const double d = squared_dist(x, centroids[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

namespace {

std::vector<std::size_t> pick_initial(std::span<const Vector> points, std::size_t k, RandomSource& rng) {
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> duplicates;
  // Partial Fisher-Yates; points equal to an already chosen one are held back
  // and only used when fewer than k distinct points exist.
  for (std::size_t i = 0; i < order.size() && chosen.size() < k; ++i) {
    const std::size_t j = i + rng.uniform_index(order.size() - i);
    std::swap(order[i], order[j]);
    const Vector& p = points[order[i]];
    bool dup = false;
    for (std::size_t c : chosen) {
      if (points[c] == p) {
        dup = true;
        break;
      }
    }
    (dup ? duplicates : chosen).push_back(order[i]);
  }
  for (std::size_t i = 0; chosen.size() < k; ++i) chosen.push_back(duplicates.at(i));
  return chosen;
}

std::vector<std::size_t> assign_all(std::span<const Vector> points, std::span<const Vector> centroids) {
  std::vector<std::size_t> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = nearest_centroid(points[i], centroids).first;
  return out;
}

}  // namespace

KMeansResult kmeans(std::span<const Vector> points, std::size_t k, RandomSource& rng, std::size_t max_iters) {
  if (k == 0) throw std::invalid_argument("kmeans: K must be at least 1");
  if (points.empty()) throw std::invalid_argument("kmeans: no points");
  if (k > points.size()) {
    throw std::invalid_argument("kmeans: K exceeds the number of points");
  }
  const Eigen::Index dim = points[0].size();
  for (const Vector& p : points) {
    if (p.size() != dim) throw std::invalid_argument("kmeans: inconsistent point dimensions");
    require_finite(p, "kmeans");
  }

  KMeansResult r;
  for (std::size_t idx : pick_initial(points, k, rng)) r.centroids.push_back(points[idx]);
  r.assignments = assign_all(points, r.centroids);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : r.assignments) ++counts[a];

    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = points.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t a = r.assignments[i];
        if (counts[a] < 2) continue;
        const double d = squared_dist(points[i], r.centroids[a]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == points.size()) continue;
      --counts[r.assignments[far]];
      r.assignments[far] = c;
      counts[c] = 1;
    }

    std::vector<Vector> sums(k, Vector::Zero(dim));
    for (std::size_t i = 0; i < points.size(); ++i) sums[r.assignments[i]] += points[i];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) r.centroids[c] = sums[c] / static_cast<double>(counts[c]);
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      inertia += squared_dist(points[i], r.centroids[r.assignments[i]]);
    }
    r.inertia_history.push_back(inertia);
    r.iterations = iter + 1;

    std::vector<std::size_t> next = assign_all(points, r.centroids);
    if (next == r.assignments) {
      r.converged = true;
      break;
    }
    // Out of iterations: keep the assignments the centroids were averaged from.
    if (iter + 1 == max_iters) break;
    r.assignments = std::move(next);
  }
  return r;
}

double beta_sample(double alpha, double beta, RandomSource& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("beta_sample: shape parameters must be positive");
  }
  const double x = rng.gamma(alpha);
  const double y = rng.gamma(beta);
  const double s = x + y;
  if (s <= 0.0) return 0.5;
  return x / s;
}

}  // namespace ipqgr
