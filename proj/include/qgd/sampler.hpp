#pragma once

// Monte-Carlo unraveling of the kick dynamics: Poisson(t) jump counts with
// i.i.d. channel choices, the discrete first-order collision map, and
// scattering integrals over a caller-supplied kick distribution.

#include "qgd/dynamics.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>

namespace qgd {

using RandomStream = std::mt19937_64;

/// splitmix64 finalizer over (seed, index); streams are independent of worker count.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

inline RandomStream make_stream(std::uint64_t seed, std::uint64_t index) { return RandomStream(mix_seed(seed, index)); }

struct TrajectoryConfig {
  double horizon = 0.0;
  std::uint64_t n_trajectories = 1000;
  std::uint64_t seed = 0;
  /// Trajectories with any covariance entry above this are flagged divergent.
  double max_entry = kDefaultMaxEntry;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;
};

struct TrajectorySample {
  Matrix covariance;
  std::uint64_t jumps = 0;
  bool divergent = false;
};

struct EnsembleStatistics {
  Matrix mean_covariance;
  /// Sample standard deviation / sqrt(n_samples), entrywise.
  Matrix standard_error;
  std::uint64_t n_samples = 0;
  std::uint64_t n_divergent = 0;
  /// Jump count -> number of trajectories (divergent ones included).
  std::map<std::uint64_t, std::uint64_t> jump_counts;
};

/// One trajectory: k ~ Poisson(t) kicks with channel j chosen at probability gamma_j.
TrajectorySample sample_trajectory(const ChannelSet& channels, const Matrix& v0, double t, RandomStream& stream,
                                   double max_entry = kDefaultMaxEntry);

EnsembleStatistics ensemble_mean(const ChannelSet& channels, const Matrix& v0, const TrajectoryConfig& config);

/// n_steps collision steps; each applies kick j with probability gamma_j dt, nothing with 1 - dt.
TrajectorySample discrete_collision(const ChannelSet& channels, const Matrix& v0, double dt, std::uint64_t n_steps,
                                    RandomStream& stream, double max_entry = kDefaultMaxEntry);

/// Ensemble of discrete_collision runs over horizon = dt * n_steps.
EnsembleStatistics collision_ensemble(const ChannelSet& channels, const Matrix& v0, double dt, std::uint64_t n_steps,
                                      const TrajectoryConfig& config);

/// Draws one kick per call; must be a deterministic function of the stream state.
using KickSampler = std::function<Matrix(RandomStream&)>;

/// Poisson(t) kicks drawn fresh from `kicks` at every jump.
EnsembleStatistics scattering_sample(const KickSampler& kicks, const Matrix& v0, const TrajectoryConfig& config);

}  // namespace qgd
