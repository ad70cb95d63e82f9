#pragma once

#include "lndsm/gmm.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <memory>
#include <numbers>
#include <vector>

namespace lndsm {

/// Monotone time grid with t[0] = 0 and t.back() = T.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times);
  static TimeGrid uniform(double horizon, int steps);

  int steps() const { return static_cast<int>(t_.size()) - 1; }
  double horizon() const { return t_.back(); }
  double t(int n) const { return t_.at(static_cast<std::size_t>(n)); }
  double dt(int n) const { return t(n + 1) - t(n); }
  const std::vector<double>& times() const { return t_; }

 private:
  std::vector<double> t_{0.0, 1.0};
};

enum class DiffusionKind { LangevinToReference, VP };

/// Forward dynamics dz = f(z,t) dt + g(t) dw.
///  - LangevinToReference: f = grad log pi, g = g_const (default sqrt 2).
///  - VP: f = -beta(t) z / 2, g = sqrt(beta(t)), beta linear on [0, T].
struct DiffusionSpec {
  DiffusionKind kind = DiffusionKind::VP;
  std::shared_ptr<const Gmm> reference;
  double beta0 = 0.1;
  double beta1 = 20.0;
  double horizon = 1.0;
  double g_const = std::numbers::sqrt2;
  Eigen::Index state_dim = 0;  // 0 = any (VP only)

  static DiffusionSpec vp(double beta0, double beta1, double horizon, Eigen::Index dim = 0);
  static DiffusionSpec langevin(Gmm reference, double horizon, double g_const = std::numbers::sqrt2);

  void validate() const;
  Eigen::Index dim() const;
  double beta(double t) const;
  /// integral of beta over [0, t]
  double beta_integral(double t) const;
};

Eigen::VectorXd drift(const DiffusionSpec& spec, const Eigen::VectorXd& z, double t);
Eigen::MatrixXd drift_batch(const DiffusionSpec& spec, const Eigen::MatrixXd& z, double t);
double diffusion_coeff(const DiffusionSpec& spec, double t);

/// One trajectory of the Euler-Maruyama chain
///   z[n] = mu[n-1] + sigma[n-1] * u[n-1],  mu[n-1] = z[n-1] + f(z[n-1], t[n-1]) dt[n-1].
struct EmTrajectory {
  Eigen::MatrixXd z;      // (n_f + 1) x d
  Eigen::MatrixXd mu;     // n_f x d
  Eigen::VectorXd sigma;  // n_f
  Eigen::MatrixXd u;      // n_f x d
  TimeGrid grid;
};

/// Standard normal increments for a batch, stored per step as [B x d].
/// The parent stream contributes one 64-bit key; trajectory b then draws its
/// n_f * d normals from Rng::substream(key, b) in step-major, dimension-minor
/// order. Splitting the batch across workers therefore does not change values.
struct EmNoise {
  std::vector<Eigen::MatrixXd> u;
};

EmNoise draw_em_noise(Rng& rng, Eigen::Index batch, int steps, Eigen::Index dim, int threads = 1);

/// Step-major storage for a batch of trajectories sharing one grid.
struct EmBatch {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> z;   // n_f + 1 entries, B x d
  std::vector<Eigen::MatrixXd> mu;  // n_f entries
  std::vector<Eigen::MatrixXd> u;   // n_f entries
  Eigen::VectorXd sigma;            // n_f, shared by all trajectories

  Eigen::Index size() const { return z.empty() ? 0 : z.front().rows(); }
  EmTrajectory trajectory(Eigen::Index b) const;
};

EmBatch em_simulate(const DiffusionSpec& spec, const Eigen::MatrixXd& z0, const TimeGrid& grid, Rng& rng,
                    int threads = 1);
EmBatch em_simulate(const DiffusionSpec& spec, const Eigen::MatrixXd& z0, const TimeGrid& grid,
                    const EmNoise& noise, int threads = 1);

/// -U[n-1] / sigma[n-1]: the Gaussian transition score at step n (1 <= n <= n_f).
Eigen::VectorXd conditional_score(const EmTrajectory& traj, int n);

}  // namespace lndsm
