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

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ipqgr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Seeded pseudo-random stream.
///
/// Built on std::mt19937_64, whose output sequence the standard fixes. The
/// distributions are implemented here rather than taken from <random> because
/// the standard library distributions are implementation-defined, and every
/// sampled quantity in this project must replay identically across toolchains.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  /// Standard normal (Box-Muller, one draw per call).
  double normal();
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);

  /// Mixes a parent seed with up to two stream identifiers (splitmix64).
  /// Used to give each document or session its own independent stream.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

/// Throws std::invalid_argument unless every entry is finite.
void require_finite(const Vector& v, const char* what);

double squared_dist(const Vector& a, const Vector& b);
double euclidean_dist(const Vector& a, const Vector& b);

/// Index of the nearest centroid (squared Euclidean), ties to the lowest
/// index, together with the squared distance.
std::pair<std::size_t, double> nearest_centroid(const Vector& x, std::span<const Vector> centroids);

struct KMeansResult {
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignments;
  /// Total inertia after every update step, in iteration order.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kDefaultKMeansIters = 50;

/// Lloyd's k-means with K distinct random starting points. Empty clusters are
/// reseeded with the point farthest from its current centroid. Stops when no
/// assignment changes or after max_iters update steps.
KMeansResult kmeans(std::span<const Vector> points, std::size_t k, RandomSource& rng,
                    std::size_t max_iters = kDefaultKMeansIters);

/// Beta(alpha, beta) via the ratio of two Gamma draws.
double beta_sample(double alpha, double beta, RandomSource& rng);

}  // namespace ipqgr
