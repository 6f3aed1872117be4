#include "oracles.hpp"
#include "qgd/entanglement.hpp"
#include "qgd/sampler.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include <numbers>

using namespace qgd;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix diag21() {
  Matrix v = Matrix::Zero(2, 2);
  v(0, 0) = 2.0;
  v(1, 1) = 1.0;
  return v;
}

ChannelSet rotation_channel(double theta) {
  return ChannelSet({UnitaryChannel::from_generator(1.0, SymmetricGenerator(theta * Matrix::Identity(2, 2)))});
}

ChannelSet identity_channel(int dim) {
  return ChannelSet({UnitaryChannel(1.0, SymplecticMatrix(Matrix::Identity(dim, dim)))});
}

/// |mean - reference| <= 5 SE entrywise (entries with zero spread must match to round-off).
bool within_five_se(const EnsembleStatistics& s, const Matrix& reference) {
  const Matrix diff = (s.mean_covariance - reference).cwiseAbs();
  return (diff.array() <= 5.0 * s.standard_error.array() + 1e-12).all();
}

}  // namespace

TEST_CASE("stream derivation") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(42, 7) == mix_seed(42, 7));
}

TEST_CASE("single trajectories") {
  RandomStream stream(1);
  SUBCASE("t = 0") {
    for (int i = 0; i < 10; ++i) {
      const auto s = sample_trajectory(rotation_channel(0.3), diag21(), 0.0, stream);
      CHECK(s.jumps == 0);
      CHECK(s.covariance == diag21());
    }
  }
  SUBCASE("identity kicks") {
    for (int i = 0; i < 10; ++i) CHECK(max_abs(sample_trajectory(identity_channel(2), diag21(), 3.0, stream).covariance - diag21()) == 0.0);
  }
  SUBCASE("quarter-turn orbit has two covariance images") {
    Matrix swapped = Matrix::Zero(2, 2);
    swapped(0, 0) = 1.0;
    swapped(1, 1) = 2.0;
    for (int i = 0; i < 200; ++i) {
      const auto s = sample_trajectory(rotation_channel(std::numbers::pi / 2), diag21(), 2.0, stream);
      const Matrix& expected = s.jumps % 2 == 0 ? diag21() : swapped;
      CHECK(max_abs(s.covariance - expected) < 1e-14);
    }
  }
  SUBCASE("divergent trajectories are flagged, not clamped") {
    const auto [g, k] = squeeze_channel(3.0);
    const ChannelSet set({UnitaryChannel(1.0, k, g)});
    TrajectoryConfig cfg;
    cfg.horizon = 3.0;
    cfg.n_trajectories = 500;
    cfg.seed = 9;
    cfg.max_entry = 1e6;
    const auto stats = ensemble_mean(set, GaussianMoments::vacuum(ModeLayout(2)).covariance, cfg);
    CHECK(stats.n_divergent > 0);
    CHECK(stats.n_samples + stats.n_divergent == 500);
    std::uint64_t total = 0;
    for (const auto& [jumps, count] : stats.jump_counts) total += count;
    CHECK(total == 500);
    CHECK(stats.mean_covariance.maxCoeff() <= 1e6);
  }
}

TEST_CASE("ensemble means") {
  TrajectoryConfig cfg;
  cfg.n_trajectories = 10000;
  cfg.seed = 2024;
  SUBCASE("identity channel") {
    cfg.horizon = 2.0;
    const auto s = ensemble_mean(identity_channel(2), diag21(), cfg);
    CHECK(max_abs(s.mean_covariance - diag21()) < 1e-15);
    CHECK(max_abs(s.standard_error) == 0.0);
  }
  SUBCASE("rotation channel is unbiased against the series") {
    cfg.horizon = 1.0;
    const ChannelSet set = rotation_channel(std::numbers::pi / 2);
    const auto s = ensemble_mean(set, diag21(), cfg);
    CHECK(s.n_samples == 10000);
    CHECK(within_five_se(s, series_evolve(set, GaussianMoments(diag21()), 1.0).covariance));
  }
  SUBCASE("passive two-channel set and random passive sets") {
    cfg.horizon = 1.5;
    const ChannelSet set({UnitaryChannel::from_generator(0.3, SymmetricGenerator(0.4 * Matrix::Identity(2, 2))),
                          UnitaryChannel::from_generator(0.7, SymmetricGenerator(-1.3 * Matrix::Identity(2, 2)))});
    const auto s = ensemble_mean(set, diag21(), cfg);
    CHECK(within_five_se(s, series_evolve(set, GaussianMoments(diag21()), 1.5).covariance));
  }
  SUBCASE("squeeze channel is unbiased against the ode solver") {
    cfg.horizon = 0.5;
    const auto [g, k] = squeeze_channel(0.3);
    const ChannelSet set({UnitaryChannel(1.0, k, g)});
    const Matrix v0 = GaussianMoments::vacuum(ModeLayout(2)).covariance;
    const auto s = ensemble_mean(set, v0, cfg);
    CHECK(within_five_se(s, closed_form_V(0.3, 0.5).covariance));
  }
  SUBCASE("bit-identical across runs and worker counts") {
    cfg.horizon = 1.0;
    cfg.n_trajectories = 3000;
    const ChannelSet set = rotation_channel(0.8);
    cfg.workers = 1;
    const auto a = ensemble_mean(set, diag21(), cfg);
    cfg.workers = 4;
    const auto b = ensemble_mean(set, diag21(), cfg);
    CHECK(a.mean_covariance == b.mean_covariance);
    CHECK(a.standard_error == b.standard_error);
    CHECK(a.jump_counts == b.jump_counts);
  }
  SUBCASE("needs at least two trajectories") {
    cfg.n_trajectories = 1;
    CHECK_THROWS_AS(ensemble_mean(rotation_channel(0.8), diag21(), cfg), ValidationError);
  }
}

TEST_CASE("jump counts are Poisson distributed") {
  TrajectoryConfig cfg;
  cfg.horizon = 2.0;
  cfg.n_trajectories = 100000;
  cfg.seed = 77;
  const auto s = ensemble_mean(rotation_channel(0.5), diag21(), cfg);
  // bins 0..K-1 plus a merged tail, each with expected count >= 5
  std::vector<double> expected, observed;
  double tail_mass = 1.0;
  std::uint64_t seen = 0;
  int k = 0;
  for (;; ++k) {
    const double p = oracle::poisson(k, 2.0);
    if ((tail_mass - p) * cfg.n_trajectories < 5.0) break;
    expected.push_back(p * cfg.n_trajectories);
    const auto it = s.jump_counts.find(static_cast<std::uint64_t>(k));
    const double o = it == s.jump_counts.end() ? 0.0 : static_cast<double>(it->second);
    observed.push_back(o);
    seen += static_cast<std::uint64_t>(o);
    tail_mass -= p;
  }
  expected.push_back(tail_mass * cfg.n_trajectories);
  observed.push_back(static_cast<double>(cfg.n_trajectories - seen));
  double chi2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) chi2 += std::pow(observed[i] - expected[i], 2) / expected[i];
  const boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
  const double p_value = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p_value > 0.001);
}

TEST_CASE("discrete collision model") {
  RandomStream stream(5);
  CHECK(discrete_collision(rotation_channel(0.4), diag21(), 0.1, 0, stream).covariance == diag21());
  CHECK(max_abs(discrete_collision(identity_channel(2), diag21(), 0.3, 50, stream).covariance - diag21()) == 0.0);
  CHECK_THROWS_AS(discrete_collision(rotation_channel(0.4), diag21(), 1.5, 3, stream), ValidationError);

  SUBCASE("first-order convergence towards the continuous dynamics") {
    // For the quarter turn the collision chain gives V = 3/2 I + 1/2 (1 - 2 dt)^n diag(1, -1)
    // exactly, while the continuum gives e^{-2t}; the bias is therefore O(dt).
    const ChannelSet set = rotation_channel(std::numbers::pi / 2);
    const Matrix continuum = oracle::quarter_turn_covariance(1.0);
    TrajectoryConfig cfg;
    cfg.n_trajectories = 100000;
    cfg.seed = 31;
    std::vector<double> bias, mc_error;
    for (double dt : {0.1, 0.01}) {
      const auto n = static_cast<std::uint64_t>(std::llround(1.0 / dt));
      const auto s = collision_ensemble(set, diag21(), dt, n, cfg);
      Matrix chain = 1.5 * Matrix::Identity(2, 2);
      chain(0, 0) += 0.5 * std::pow(1.0 - 2.0 * dt, static_cast<double>(n));
      chain(1, 1) -= 0.5 * std::pow(1.0 - 2.0 * dt, static_cast<double>(n));
      CHECK(within_five_se(s, chain));
      bias.push_back(max_abs(chain - continuum));
      mc_error.push_back(max_abs(s.mean_covariance - continuum));
    }
    const double slope = std::log10(bias[0] / bias[1]);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(mc_error[1] < mc_error[0]);
  }
}

TEST_CASE("scattering integrals") {
  TrajectoryConfig cfg;
  cfg.n_trajectories = 10000;
  cfg.seed = 8;
  cfg.horizon = 1.2;
  SUBCASE("identity sampler") {
    const auto s = scattering_sample([](RandomStream&) { return Matrix(Matrix::Identity(2, 2)); }, diag21(), cfg);
    CHECK(max_abs(s.mean_covariance - diag21()) == 0.0);
  }
  SUBCASE("two-point measure equals the two-channel set") {
    const double theta = 0.9;
    const KickSampler two_point = [theta](RandomStream& r) {
      std::bernoulli_distribution coin(0.5);
      return oracle::rotation(coin(r) ? theta : -theta);
    };
    const auto s = scattering_sample(two_point, diag21(), cfg);
    const ChannelSet set({UnitaryChannel(0.5, SymplecticMatrix(oracle::rotation(theta))),
                          UnitaryChannel(0.5, SymplecticMatrix(oracle::rotation(-theta)))});
    CHECK(within_five_se(s, series_evolve(set, GaussianMoments(diag21()), cfg.horizon).covariance));
  }
  SUBCASE("uniform rotation angle averages to 3/2 I") {
    const KickSampler uniform = [](RandomStream& r) {
      std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
      return oracle::rotation(angle(r));
    };
    const Matrix average = oracle::rotation_average(diag21());
    CHECK(max_abs(average - 1.5 * Matrix::Identity(2, 2)) < 1e-14);
    for (double t : {1.0, 12.0}) {
      cfg.horizon = t;
      const auto s = scattering_sample(uniform, diag21(), cfg);
      const Matrix reference = std::exp(-t) * diag21() + (1.0 - std::exp(-t)) * average;
      CHECK(within_five_se(s, reference));
    }
  }
}

TEST_CASE("every sampled covariance is physical") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) x(i, j) = n(rng);
    x = (x + x.transpose()) / 2.0;
    const Matrix J = symplectic_form(ModeLayout(2));
    const SymmetricGenerator g((x + J.transpose() * x * J) / 2.0);
    const ChannelSet set({UnitaryChannel::from_generator(1.0, g)});
    RandomStream stream(static_cast<std::uint64_t>(trial));
    for (int i = 0; i < 50; ++i) {
      const auto s = sample_trajectory(set, Matrix(0.5 * Matrix::Identity(4, 4)), 3.0, stream);
      CHECK(max_abs(s.covariance - s.covariance.transpose()) == 0.0);
      CHECK(check_uncertainty(s.covariance, 1e-8));
    }
  }
}
