#include "lndsm/sde.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/parallel.hpp"

#include <cmath>
#include <string>

namespace lndsm {

TimeGrid::TimeGrid(std::vector<double> times) : t_(std::move(times)) {
  if (t_.size() < 2) throw DimensionError("TimeGrid needs at least one step");
  if (t_.front() != 0.0) throw DimensionError("TimeGrid must start at 0");
  for (std::size_t i = 1; i < t_.size(); ++i)
    if (!(t_[i] > t_[i - 1])) throw DimensionError("TimeGrid must be strictly increasing");
}

TimeGrid TimeGrid::uniform(double horizon, int steps) {
  if (steps < 1 || !(horizon > 0.0)) throw DimensionError("TimeGrid::uniform: need steps >= 1 and T > 0");
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int n = 0; n <= steps; ++n) t[static_cast<std::size_t>(n)] = horizon * n / steps;
  t.back() = horizon;
  return TimeGrid(std::move(t));
}

DiffusionSpec DiffusionSpec::vp(double beta0, double beta1, double horizon, Eigen::Index dim) {
  DiffusionSpec s;
  s.kind = DiffusionKind::VP;
  s.beta0 = beta0;
  s.beta1 = beta1;
  s.horizon = horizon;
  s.state_dim = dim;
  s.validate();
  return s;
}

DiffusionSpec DiffusionSpec::langevin(Gmm reference, double horizon, double g_const) {
  DiffusionSpec s;
  s.kind = DiffusionKind::LangevinToReference;
  s.state_dim = reference.dim();
  s.reference = std::make_shared<const Gmm>(std::move(reference));
  s.horizon = horizon;
  s.g_const = g_const;
  s.validate();
  return s;
}

void DiffusionSpec::validate() const {
  if (!(horizon > 0.0)) throw ConfigError("diffusion horizon must be positive");
  if (kind == DiffusionKind::VP) {
    if (!(beta0 > 0.0) || !(beta1 >= beta0)) throw ConfigError("VP requires beta1 >= beta0 > 0");
  } else {
    if (!reference) throw ConfigError("Langevin diffusion requires a reference GMM");
    if (state_dim != reference->dim()) throw DimensionError("Langevin reference dimension mismatch");
    if (!(g_const > 0.0)) throw ConfigError("Langevin diffusion coefficient must be positive");
  }
}

Eigen::Index DiffusionSpec::dim() const { return state_dim; }

double DiffusionSpec::beta(double t) const { return beta0 + (beta1 - beta0) * t / horizon; }

double DiffusionSpec::beta_integral(double t) const {
  return beta0 * t + 0.5 * (beta1 - beta0) * t * t / horizon;
}

namespace {

void check_dim(const DiffusionSpec& spec, Eigen::Index d) {
  if (spec.kind == DiffusionKind::LangevinToReference && !spec.reference)
    throw ConfigError("Langevin diffusion requires a reference GMM");
  if (spec.state_dim != 0 && spec.state_dim != d) throw DimensionError("drift: state dimension mismatch");
}

}  // namespace

Eigen::VectorXd drift(const DiffusionSpec& spec, const Eigen::VectorXd& z, double t) {
  check_dim(spec, z.size());
  if (spec.kind == DiffusionKind::VP) return -0.5 * spec.beta(t) * z;
  return gmm_score(*spec.reference, z);
}

Eigen::MatrixXd drift_batch(const DiffusionSpec& spec, const Eigen::MatrixXd& z, double t) {
  check_dim(spec, z.cols());
  if (spec.kind == DiffusionKind::VP) return -0.5 * spec.beta(t) * z;
  return gmm_score_batch(*spec.reference, z);
}

double diffusion_coeff(const DiffusionSpec& spec, double t) {
  const double slack = 1e-12 * spec.horizon;
  if (!(t >= -slack && t <= spec.horizon + slack))
    throw DimensionError("diffusion_coeff: t outside [0, T]");
  if (spec.kind == DiffusionKind::VP) return std::sqrt(spec.beta(t));
  return spec.g_const;
}

EmNoise draw_em_noise(Rng& rng, Eigen::Index batch, int steps, Eigen::Index dim, int threads) {
  EmNoise noise;
  noise.u.assign(static_cast<std::size_t>(steps), Eigen::MatrixXd(batch, dim));
  const std::uint64_t key = rng.next_u64();
  parallel_rows(batch, threads, [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index b = lo; b < hi; ++b) {
      Rng sub = Rng::substream(key, static_cast<std::uint64_t>(b));
      for (int n = 0; n < steps; ++n)
        for (Eigen::Index j = 0; j < dim; ++j) noise.u[static_cast<std::size_t>(n)](b, j) = sub.normal();
    }
  });
  return noise;
}

EmTrajectory EmBatch::trajectory(Eigen::Index b) const {
  const int nf = grid.steps();
  const Eigen::Index d = z.front().cols();
  EmTrajectory tr{Eigen::MatrixXd(nf + 1, d), Eigen::MatrixXd(nf, d), sigma, Eigen::MatrixXd(nf, d), grid};
  for (int n = 0; n <= nf; ++n) tr.z.row(n) = z[static_cast<std::size_t>(n)].row(b);
  for (int n = 0; n < nf; ++n) {
    tr.mu.row(n) = mu[static_cast<std::size_t>(n)].row(b);
    tr.u.row(n) = u[static_cast<std::size_t>(n)].row(b);
  }
  return tr;
}

EmBatch em_simulate(const DiffusionSpec& spec, const Eigen::MatrixXd& z0, const TimeGrid& grid, Rng& rng,
                    int threads) {
  const EmNoise noise = draw_em_noise(rng, z0.rows(), grid.steps(), z0.cols(), threads);
  return em_simulate(spec, z0, grid, noise, threads);
}

EmBatch em_simulate(const DiffusionSpec& spec, const Eigen::MatrixXd& z0, const TimeGrid& grid,
                    const EmNoise& noise, int threads) {
  check_dim(spec, z0.cols());
  if (!z0.allFinite()) throw NumericalError("em_simulate: non-finite initial state");
  const int nf = grid.steps();
  if (static_cast<int>(noise.u.size()) != nf) throw DimensionError("em_simulate: noise/grid step mismatch");
  EmBatch out;
  out.grid = grid;
  out.sigma.resize(nf);
  for (int n = 0; n < nf; ++n) out.sigma(n) = diffusion_coeff(spec, grid.t(n)) * std::sqrt(grid.dt(n));
  out.u = noise.u;
  out.z.assign(static_cast<std::size_t>(nf) + 1, Eigen::MatrixXd(z0.rows(), z0.cols()));
  out.mu.assign(static_cast<std::size_t>(nf), Eigen::MatrixXd(z0.rows(), z0.cols()));
  out.z[0] = z0;

  parallel_rows(z0.rows(), threads, [&](Eigen::Index lo, Eigen::Index hi) {
    const Eigen::Index len = hi - lo;
    for (int n = 0; n < nf; ++n) {
      const auto sn = static_cast<std::size_t>(n);
      const Eigen::MatrixXd prev = out.z[sn].middleRows(lo, len);
      const Eigen::MatrixXd mu = prev + drift_batch(spec, prev, grid.t(n)) * grid.dt(n);
      out.mu[sn].middleRows(lo, len) = mu;
      out.z[sn + 1].middleRows(lo, len) = mu + out.sigma(n) * noise.u[sn].middleRows(lo, len);
      if (!out.z[sn + 1].middleRows(lo, len).allFinite())
        throw NumericalError("em_simulate: non-finite state at step " + std::to_string(n + 1));
    }
  });
  return out;
}

Eigen::VectorXd conditional_score(const EmTrajectory& traj, int n) {
  if (n < 1 || n > traj.grid.steps()) throw DimensionError("conditional_score: step index out of range");
  return -traj.u.row(n - 1).transpose() / traj.sigma(n - 1);
}

}  // namespace lndsm
