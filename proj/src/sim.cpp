// SPDX-License-Identifier: Apache-2.0
#include "olqr/sim.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include <Eigen/Eigenvalues>

#include "olqr/seeding.hpp"

namespace olqr {
namespace {

// Integer number of dt steps in `span`, or a grid error.
int grid_steps(double span, double dt, const char* what) {
  const double ratio = span / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    throw Error(ErrorCode::Grid, std::string(what) + " is not a positive integer multiple of dt");
  return static_cast<int>(rounded);
}

}  // namespace

int Trajectory::steps_per_interval() const { return grid_steps(interval_length, dt, "interval length"); }

ExplorationSignal ExplorationSignal::random(Eigen::Index channels, int n_sin, double amplitude, double lo, double hi,
                                            std::uint64_t seed) {
  if (channels < 1 || n_sin < 1) throw Error(ErrorCode::Config, "exploration: need at least one channel and term");
  if (!(hi > lo)) throw Error(ErrorCode::Config, "exploration: empty frequency range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(lo, hi);
  ExplorationSignal sig;
  sig.frequencies.resize(channels, n_sin);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (int i = 0; i < n_sin; ++i) sig.frequencies(c, i) = freq(rng);
  sig.amplitudes = MatrixXd::Constant(channels, n_sin, amplitude);
  return sig;
}

VectorXd exploration_value(const ExplorationSignal& sig, double t) {
  VectorXd u(sig.channels());
  for (Eigen::Index c = 0; c < sig.channels(); ++c) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sig.terms(); ++i) acc += sig.amplitudes(c, i) * std::sin(sig.frequencies(c, i) * t);
    u(c) = acc;
  }
  return u;
}

NoiseSampler::NoiseSampler(const MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::Covariance, "noise: covariance must be square");
  const auto p = sigma.rows();
  zero_ = sigma.isZero(0.0);
  if (zero_) {
    factor_ = MatrixXd::Zero(p, p);
    return;
  }
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sigma));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw Error(ErrorCode::Covariance, "noise: covariance is indefinite");
  factor_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

VectorXd NoiseSampler::sample(std::mt19937_64& rng) const {
  const auto p = factor_.rows();
  if (zero_) return VectorXd::Zero(p);
  std::normal_distribution<double> normal;
  VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z(i) = normal(rng);
  VectorXd e = factor_ * z;
  // Normalize signed zeros so recorded files do not depend on them.
  e.array() += 0.0;
  return e;
}

VectorXd sample_noise(const MatrixXd& sigma, std::mt19937_64& rng) { return NoiseSampler(sigma).sample(rng); }

Trajectory simulate(const LtiSystem& sys, const ExplorationSignal& sig, const std::optional<MatrixXd>& feedback,
                    const SimOptions& opt, std::uint64_t seed) {
  const auto n = sys.n();
  if (!(opt.dt > 0.0)) throw Error(ErrorCode::Config, "simulate: dt must be positive");
  if (opt.x0.size() != n) throw Error(ErrorCode::Shape, "simulate: x0 has wrong dimension");
  if (sig.channels() != sys.m()) throw Error(ErrorCode::Shape, "simulate: exploration channels must equal m");
  if (feedback && (feedback->rows() != sys.m() || feedback->cols() != n))
    throw Error(ErrorCode::Shape, "simulate: feedback gain must be m x n");
  const double duration = opt.effective_duration();
  if (duration < opt.dt) throw Error(ErrorCode::Config, "simulate: duration shorter than dt");
  const int steps = grid_steps(duration, opt.dt, "duration");
  const int per_interval = grid_steps(opt.interval_length, opt.dt, "interval length");
  if (static_cast<long>(per_interval) * opt.interval_count > steps)
    throw Error(ErrorCode::Grid, "simulate: duration shorter than l * T");

  const NoiseSampler noise(sys.sigma);
  std::mt19937_64 rng(seed);

  Trajectory traj;
  traj.dt = opt.dt;
  traj.interval_length = opt.interval_length;
  traj.interval_count = opt.interval_count;
  traj.episode_seed = seed;
  traj.times.resize(steps + 1);
  traj.states.resize(n, steps + 1);
  traj.inputs.resize(sys.m(), steps + 1);
  MatrixXd dist(sys.p(), steps + 1);

  const double h = opt.dt;
  VectorXd x = opt.x0;
  VectorXd e(sys.p());
  auto rhs = [&](const VectorXd& xs, double t) -> VectorXd {
    VectorXd u = exploration_value(sig, t);
    if (feedback) u -= *feedback * xs;
    return sys.A * xs + sys.B * u + sys.E * e;
  };

  for (int s = 0; s <= steps; ++s) {
    const double t = s * h;
    traj.times(s) = t;
    traj.states.col(s) = x;
    traj.inputs.col(s) = exploration_value(sig, t);
    // Held over [t, t + h); the last sample is what the next step would hold.
    e = noise.sample(rng);
    dist.col(s) = e;
    if (s == steps) break;

    const VectorXd k1 = rhs(x, t);
    const VectorXd k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h);
    const VectorXd k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h);
    const VectorXd k4 = rhs(x + h * k3, t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const double norm = x.norm();
    if (!std::isfinite(norm) || norm > opt.blowup_threshold)
      throw DivergenceError("simulate: state norm exceeded blow-up threshold after t = " + std::to_string(t), t);
  }
  if (opt.record_disturbance) traj.disturbances = std::move(dist);
  return traj;
}

std::uint64_t episode_seed(std::uint64_t master_seed, std::uint64_t index) {
  return derive_seed(master_seed, SeedStream::Noise, index);
}

std::vector<Trajectory> generate_episodes(const LtiSystem& sys, const ExplorationSignal& sig, int count,
                                          const SimOptions& opt, std::uint64_t master_seed, unsigned workers) {
  if (count < 1) throw Error(ErrorCode::Config, "generate_episodes: need at least one episode");
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(count));

  std::vector<Trajectory> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = simulate(sys, sig, std::nullopt, opt, episode_seed(master_seed, i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  // Report the lowest failing index so the error is deterministic.
  for (int i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const DivergenceError& d) {
      throw DivergenceError("episode " + std::to_string(i) + ": " + d.what(), d.last_valid_time(), i);
    }
  }
  return out;
}

}  // namespace olqr
