#include "qgd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

namespace qgd {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t kBlock = 1024;

std::uint64_t draw_jumps(double t, RandomStream& stream) {
  if (t == 0.0) return 0;
  std::poisson_distribution<std::uint64_t> jumps(t);
  return jumps(stream);
}

std::discrete_distribution<std::size_t> channel_picker(const ChannelSet& channels) {
  std::vector<double> w;
  w.reserve(channels.size());
  for (const auto& c : channels.channels()) w.push_back(c.gamma);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

void apply_kick(const Matrix& k, Matrix& v) { v = k * v * k.transpose(); }

bool exceeds(const Matrix& v, double max_entry) {
  const double peak = v.cwiseAbs().maxCoeff();
  return !std::isfinite(peak) || peak > max_entry;
}

void check_config(const TrajectoryConfig& config) {
  if (!(config.horizon >= 0.0) || !std::isfinite(config.horizon))
    throw DomainError("trajectory horizon must be finite and >= 0");
  if (config.n_trajectories < 2) throw ValidationError("ensemble needs at least 2 trajectories");
}

/// Runs `one(index)` for every trajectory in parallel blocks and reduces in index order.
template <typename Fn>
EnsembleStatistics run_ensemble(const Matrix& v0, const TrajectoryConfig& config, Fn&& one) {
  const std::uint64_t n = config.n_trajectories;
  unsigned workers = config.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.workers;

  EnsembleStatistics stats;
  const Index d = v0.rows();
  stats.mean_covariance = Matrix::Zero(d, d);
  Matrix m2 = Matrix::Zero(d, d);

  std::vector<TrajectorySample> block;
  for (std::uint64_t start = 0; start < n; start += kBlock) {
    const std::uint64_t len = std::min(kBlock, n - start);
    block.assign(len, TrajectorySample{});
    const unsigned w = static_cast<unsigned>(std::min<std::uint64_t>(workers, len));
    if (w <= 1) {
      for (std::uint64_t i = 0; i < len; ++i) block[i] = one(start + i);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(w);
      for (unsigned id = 0; id < w; ++id) {
        pool.emplace_back([&, id] {
          try {
            for (std::uint64_t i = id; i < len; i += w) block[i] = one(start + i);
          } catch (...) {
            errors[id] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    // Welford update, strictly in trajectory order
    for (const auto& s : block) {
      ++stats.jump_counts[s.jumps];
      if (s.divergent) {
        ++stats.n_divergent;
        continue;
      }
      ++stats.n_samples;
      const Matrix delta = s.covariance - stats.mean_covariance;
      stats.mean_covariance += delta / static_cast<double>(stats.n_samples);
      m2.array() += delta.array() * (s.covariance - stats.mean_covariance).array();
    }
  }
  if (stats.n_samples >= 2) {
    const double ns = static_cast<double>(stats.n_samples);
    stats.standard_error = (m2.array() / (ns - 1.0)).sqrt() / std::sqrt(ns);
  } else {
    stats.standard_error = Matrix::Constant(d, d, std::numeric_limits<double>::infinity());
  }
  return stats;
}

}  // namespace

TrajectorySample sample_trajectory(const ChannelSet& channels, const Matrix& v0, double t, RandomStream& stream,
                                   double max_entry) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("trajectory time must be finite and >= 0");
  if (v0.rows() != channels.dim() || v0.cols() != channels.dim())
    throw DimensionError("initial covariance does not match channel dimension");
  TrajectorySample out;
  out.covariance = v0;
  out.jumps = draw_jumps(t, stream);
  auto pick = channel_picker(channels);
  for (std::uint64_t k = 0; k < out.jumps; ++k) {
    apply_kick(channels.channels()[pick(stream)].kick.matrix(), out.covariance);
    if (exceeds(out.covariance, max_entry)) {
      out.divergent = true;
      // keep drawing so the stream position does not depend on divergence
      for (++k; k < out.jumps; ++k) pick(stream);
      break;
    }
  }
  out.covariance = symmetrized(out.covariance);
  return out;
}

EnsembleStatistics ensemble_mean(const ChannelSet& channels, const Matrix& v0, const TrajectoryConfig& config) {
  check_config(config);
  return run_ensemble(v0, config, [&](std::uint64_t i) {
    RandomStream stream = make_stream(config.seed, i);
    return sample_trajectory(channels, v0, config.horizon, stream, config.max_entry);
  });
}

TrajectorySample discrete_collision(const ChannelSet& channels, const Matrix& v0, double dt, std::uint64_t n_steps,
                                    RandomStream& stream, double max_entry) {
  if (!(dt > 0.0)) throw ValidationError("collision step dt must be > 0");
  double total = 0.0;
  for (const auto& c : channels.channels()) total += c.gamma;
  if (total * dt > 1.0 + ChannelSet::kNormalizationTol)
    throw ValidationError("collision step needs sum(gamma) * dt <= 1, got " + std::to_string(total * dt));
  if (v0.rows() != channels.dim() || v0.cols() != channels.dim())
    throw DimensionError("initial covariance does not match channel dimension");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrajectorySample out;
  out.covariance = v0;
  for (std::uint64_t step = 0; step < n_steps; ++step) {
    double r = u(stream);
    if (out.divergent) continue;
    for (const auto& c : channels.channels()) {
      const double p = c.gamma * dt;
      if (r < p) {
        apply_kick(c.kick.matrix(), out.covariance);
        ++out.jumps;
        if (exceeds(out.covariance, max_entry)) out.divergent = true;
        break;
      }
      r -= p;
    }
  }
  out.covariance = symmetrized(out.covariance);
  return out;
}

EnsembleStatistics collision_ensemble(const ChannelSet& channels, const Matrix& v0, double dt, std::uint64_t n_steps,
                                      const TrajectoryConfig& config) {
  if (config.n_trajectories < 2) throw ValidationError("ensemble needs at least 2 trajectories");
  return run_ensemble(v0, config, [&](std::uint64_t i) {
    RandomStream stream = make_stream(config.seed, i);
    return discrete_collision(channels, v0, dt, n_steps, stream, config.max_entry);
  });
}

EnsembleStatistics scattering_sample(const KickSampler& kicks, const Matrix& v0, const TrajectoryConfig& config) {
  check_config(config);
  ModeLayout::of(v0.rows(), v0.cols());
  return run_ensemble(v0, config, [&](std::uint64_t i) {
    RandomStream stream = make_stream(config.seed, i);
    TrajectorySample out;
    out.covariance = v0;
    out.jumps = draw_jumps(config.horizon, stream);
    for (std::uint64_t k = 0; k < out.jumps; ++k) {
      const Matrix kick = kicks(stream);
      if (kick.rows() != v0.rows() || kick.cols() != v0.cols())
        throw DimensionError("kick sampler returned a matrix of the wrong size");
      if (!out.divergent) {
        apply_kick(kick, out.covariance);
        if (exceeds(out.covariance, config.max_entry)) out.divergent = true;
      }
    }
    out.covariance = symmetrized(out.covariance);
    return out;
  });
}

}  // namespace qgd
