#pragma once

#include "lndsm/autodiff.hpp"
#include "lndsm/nn.hpp"
#include "lndsm/rng.hpp"
#include "lndsm/sde.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace lndsm {

/// Closed-form VP transition: z_t | z_0 ~ N(m(t) z_0, v(t) I).
template <typename Scalar>
struct VpKernel {
  Scalar m;
  Scalar v;
};

template <typename Scalar = double>
VpKernel<Scalar> vp_kernel(const DiffusionSpec& spec, Scalar t) {
  if (spec.kind != DiffusionKind::VP) throw ConfigError("vp_kernel requires a VP diffusion");
  const Scalar m = std::exp(Scalar(-0.5) * Scalar(spec.beta_integral(static_cast<double>(t))));
  return {m, Scalar(1) - m * m};
}

/// Plain score callback: rows of z paired with per-row times.
using ScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& z, const Eigen::VectorXd& t)>;
ScoreFn score_fn(const ScoreNet& net);

struct CeTerms {
  double sq_norm = 0.0;   // 1/2 g^2 |s(z_N)|^2
  double score_cv = 0.0;  // g^2 (U/sigma) . [s(z_N) - s(mu)]
  double drift_cv = 0.0;  // (U/sigma) . [f(z_N) - f(mu)]
};

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double neg_entropy = 0.0;
  double ce = 0.0;
  CeTerms ce_terms;
};

enum class CeMode { LSGM, LNDSM };

// ---------------------------------------------------------------------------
// Linear (VP) denoising score matching.

struct DsmOptions {
  double t_min = 0.01;
};

/// t ~ U(0, T] floored at t_min, z_t = m z0 + sqrt(v) eps,
/// loss = mean g^2(t)/2 |s(z_t, t) + eps / sqrt(v)|^2.
/// Stream use: B uniforms (t), then B x d normals (eps, row-major).
ad::Var dsm_vp_loss(const MlpVars& score_vars, const ScoreNet& net, const ad::Var& z0, const DiffusionSpec& spec,
                    Rng& rng, const DsmOptions& opts = {});
/// Per-sample values with an arbitrary score; same stream use as above.
Eigen::VectorXd dsm_vp_samples(const ScoreFn& score, const Eigen::MatrixXd& z0, const DiffusionSpec& spec, Rng& rng,
                               const DsmOptions& opts = {});
/// As dsm_vp_samples but with t drawn uniformly from the grid times t_1..t_nf.
Eigen::VectorXd dsm_vp_samples_on_grid(const ScoreFn& score, const Eigen::MatrixXd& z0, const DiffusionSpec& spec,
                                       const TimeGrid& grid, Rng& rng);

// ---------------------------------------------------------------------------
// Euler-Maruyama based estimators.

/// Uniform step index N in {1..n_f} per trajectory (B draws from rng).
std::vector<int> draw_step_indices(Rng& rng, Eigen::Index batch, int steps);

/// Per-sample pieces of the cross-entropy estimator at the sampled step N.
struct LndsmSamples {
  Eigen::VectorXd sq_norm;        // 1/2 g^2(t_N) |s(z_N, t_N)|^2
  Eigen::VectorXd score_diff;     // g^2(t_N) (U/sigma) . [s(z_N, t_N) - s(mu, t_N)]
  Eigen::VectorXd drift_diff;     // (U/sigma) . [f(z_N, t_N) - f(mu, t_N)]
  Eigen::VectorXd score_control;  // g^2(t_N) (U/sigma) . s(mu, t_N)
  Eigen::VectorXd drift_control;  // (U/sigma) . f(mu, t_N)

  Eigen::VectorXd with_control_variates() const { return sq_norm + score_diff - drift_diff; }
  Eigen::VectorXd without_control_variates() const {
    return sq_norm + score_diff + score_control - drift_diff - drift_control;
  }
};

LndsmSamples lndsm_ce_samples(const ScoreFn& score, const EmBatch& traj, const DiffusionSpec& spec,
                              const std::vector<int>& steps);
LndsmSamples lndsm_ce_samples(const ScoreFn& score, const EmBatch& traj, const DiffusionSpec& spec, Rng& rng);

struct TapeCe {
  ad::Var loss;
  CeTerms terms;
};

/// Differentiable estimator. Simulates the chain from z0 on the tape so the
/// encoder receives gradient through every state. Stream use matches
/// em_simulate followed by draw_step_indices.
TapeCe lndsm_ce_estimate(const MlpVars& score_vars, const ScoreNet& net, const ad::Var& z0, const DiffusionSpec& spec,
                         const TimeGrid& grid, Rng& rng);
/// Same estimator over fixed trajectories (no encoder path).
TapeCe lndsm_ce_estimate(const MlpVars& score_vars, const ScoreNet& net, ad::Tape& tape, const EmBatch& traj,
                         const DiffusionSpec& spec, Rng& rng);

/// Ambient NDSM surrogate: 1/2 |s(z_N)|^2 + (U/sigma) . [s(z_N) - s(mu)], batch mean.
ad::Var ndsm_loss(const MlpVars& score_vars, const ScoreNet& net, ad::Tape& tape, const EmBatch& traj, Rng& rng);
Eigen::VectorXd ndsm_samples(const ScoreFn& score, const EmBatch& traj, const std::vector<int>& steps);

/// Row-wise drift on the tape with per-row times.
ad::Var drift_var(const DiffusionSpec& spec, const ad::Var& z, const Eigen::VectorXd& t);

struct ProbeResult {
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  Eigen::Index draws = 0;
};

/// Monte-Carlo mean and variance of the estimator with and without the two
/// control variates. z0 supplies the M starting points; processed in chunks.
ProbeResult variance_probe(const ScoreFn& score, const DiffusionSpec& spec, const TimeGrid& grid, bool with_cv,
                           const Eigen::MatrixXd& z0, Rng& rng, int threads = 1);

// ---------------------------------------------------------------------------
// Assembled VAE objective.

struct LossConfig {
  CeMode mode = CeMode::LNDSM;
  TimeGrid grid = TimeGrid::uniform(1.5, 100);
  DsmOptions dsm;
  double ce_weight = 1.0;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

/// recon + E_q[log q] + ce_weight * CE. Stream use: encoder noise (B x latent),
/// then the CE estimator's draws.
TotalLoss vae_total_loss(const VaeVars& vae_vars, const VaeModel& vae, const MlpVars& score_vars, const ScoreNet& net,
                         const Eigen::MatrixXd& x, const DiffusionSpec& spec, const LossConfig& cfg, Rng& rng);

/// E_q[-log N(z0; 0, I)] for a diagonal Gaussian q, batch mean.
ad::Var standard_normal_ce(const ad::Var& mean, const ad::Var& log_std);

// ---------------------------------------------------------------------------
// Cross-entropy identity check on a 1D linear diffusion.

struct Lemma1Result {
  double lhs = 0.0;       // CE(q0 || p0), closed form
  double rhs = 0.0;       // H(q_T) + time integral by Gauss-Legendre
  double terminal_kl = 0.0;  // KL(q_T || p_T); lhs - rhs equals this up to quadrature error
};

/// q0 = N(q_mean, q_var), p0 = N(p_mean, p_var), VP dynamics from spec over [0, spec.horizon].
Lemma1Result lemma1_oracle(double q_mean, double q_var, const DiffusionSpec& spec, int quad_points,
                           double p_mean = 0.0, double p_var = 1.0);

}  // namespace lndsm
