#include "lndsm/objectives.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace lndsm {

ScoreFn score_fn(const ScoreNet& net) {
  auto shared = std::make_shared<const ScoreNet>(net);
  return [shared](const Eigen::MatrixXd& z, const Eigen::VectorXd& t) { return shared->forward(z, t); };
}

namespace {

constexpr double kSigmaFloor = 1e-12;

struct DsmDraws {
  Eigen::VectorXd t, m, sqrt_v, g2;
  Eigen::MatrixXd eps;
};

DsmDraws draw_dsm(const DiffusionSpec& spec, Eigen::Index batch, Eigen::Index dim, Rng& rng, const DsmOptions& opts) {
  if (spec.kind != DiffusionKind::VP) throw ConfigError("dsm_vp_loss requires a VP diffusion");
  DsmDraws d{Eigen::VectorXd(batch), Eigen::VectorXd(batch), Eigen::VectorXd(batch), Eigen::VectorXd(batch),
             Eigen::MatrixXd()};
  for (Eigen::Index b = 0; b < batch; ++b) {
    // (1 - u) T lies in (0, T]; values below the floor are lifted to it.
    d.t(b) = std::max((1.0 - rng.uniform()) * spec.horizon, opts.t_min);
  }
  d.eps = rng.normal_matrix(batch, dim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto k = vp_kernel(spec, d.t(b));
    d.m(b) = k.m;
    d.sqrt_v(b) = std::sqrt(k.v);
    d.g2(b) = spec.beta(d.t(b));
  }
  return d;
}

Eigen::VectorXd dsm_values(const ScoreFn& score, const Eigen::MatrixXd& z0, const DsmDraws& d) {
  const Eigen::MatrixXd zt = d.m.asDiagonal() * z0 + d.sqrt_v.asDiagonal() * d.eps;
  const Eigen::MatrixXd target = d.sqrt_v.cwiseInverse().asDiagonal() * d.eps;
  const Eigen::MatrixXd r = score(zt, d.t) + target;
  return 0.5 * d.g2.cwiseProduct(r.rowwise().squaredNorm());
}

}  // namespace

ad::Var dsm_vp_loss(const MlpVars& score_vars, const ScoreNet& net, const ad::Var& z0, const DiffusionSpec& spec,
                    Rng& rng, const DsmOptions& opts) {
  const DsmDraws d = draw_dsm(spec, z0.rows(), z0.cols(), rng, opts);
  ad::Tape& tape = *z0.tape();
  const ad::Var zt = ad::scale_rows(z0, d.m) + tape.constant(d.sqrt_v.asDiagonal() * d.eps);
  const ad::Var s = score_forward(score_vars, net, zt, d.t);
  const ad::Var r = s + tape.constant(d.sqrt_v.cwiseInverse().asDiagonal() * d.eps);
  return ad::mean(ad::scale_rows(ad::row_sum(ad::square(r)), 0.5 * d.g2));
}

Eigen::VectorXd dsm_vp_samples(const ScoreFn& score, const Eigen::MatrixXd& z0, const DiffusionSpec& spec, Rng& rng,
                               const DsmOptions& opts) {
  return dsm_values(score, z0, draw_dsm(spec, z0.rows(), z0.cols(), rng, opts));
}

Eigen::VectorXd dsm_vp_samples_on_grid(const ScoreFn& score, const Eigen::MatrixXd& z0, const DiffusionSpec& spec,
                                       const TimeGrid& grid, Rng& rng) {
  if (spec.kind != DiffusionKind::VP) throw ConfigError("dsm_vp_samples_on_grid requires a VP diffusion");
  const Eigen::Index batch = z0.rows();
  const std::vector<int> steps = draw_step_indices(rng, batch, grid.steps());
  DsmDraws d{Eigen::VectorXd(batch), Eigen::VectorXd(batch), Eigen::VectorXd(batch), Eigen::VectorXd(batch),
             rng.normal_matrix(batch, z0.cols())};
  for (Eigen::Index b = 0; b < batch; ++b) {
    d.t(b) = grid.t(steps[static_cast<std::size_t>(b)]);
    const auto k = vp_kernel(spec, d.t(b));
    d.m(b) = k.m;
    d.sqrt_v(b) = std::sqrt(k.v);
    d.g2(b) = spec.beta(d.t(b));
  }
  return dsm_values(score, z0, d);
}

std::vector<int> draw_step_indices(Rng& rng, Eigen::Index batch, int steps) {
  std::vector<int> out(static_cast<std::size_t>(batch));
  for (auto& n : out) n = static_cast<int>(rng.uniform_int(1, steps));
  return out;
}

namespace {

struct StepRows {
  Eigen::MatrixXd z_n;      // z_N
  Eigen::MatrixXd mu;       // mu_{N-1}
  Eigen::MatrixXd w;        // U_{N-1} / sigma_{N-1}
  Eigen::VectorXd t;        // t_N
  Eigen::VectorXd g2;       // g^2(t_N)
};

Eigen::VectorXd step_times(const TimeGrid& grid, const std::vector<int>& steps) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(steps.size()));
  for (std::size_t b = 0; b < steps.size(); ++b) t(static_cast<Eigen::Index>(b)) = grid.t(steps[b]);
  return t;
}

Eigen::VectorXd squared_diffusion(const DiffusionSpec& spec, const Eigen::VectorXd& t) {
  Eigen::VectorXd g2(t.size());
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    const double g = diffusion_coeff(spec, t(b));
    g2(b) = g * g;
  }
  return g2;
}

Eigen::MatrixXd scaled_noise(const std::vector<Eigen::MatrixXd>& u, const Eigen::VectorXd& sigma,
                             const std::vector<int>& steps) {
  const Eigen::Index batch = static_cast<Eigen::Index>(steps.size());
  Eigen::MatrixXd w(batch, u.front().cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int prev = steps[static_cast<std::size_t>(b)] - 1;
    const double s = sigma(prev);
    if (!(s >= kSigmaFloor)) throw NumericalError("EM sigma below floor; the time grid is malformed");
    w.row(b) = u[static_cast<std::size_t>(prev)].row(b) / s;
  }
  return w;
}

StepRows gather_steps(const EmBatch& traj, const DiffusionSpec& spec, const std::vector<int>& steps) {
  const Eigen::Index batch = traj.size();
  require_dim(static_cast<Eigen::Index>(steps.size()) == batch, "step index count mismatch");
  StepRows r{Eigen::MatrixXd(batch, traj.z.front().cols()), Eigen::MatrixXd(batch, traj.z.front().cols()),
             scaled_noise(traj.u, traj.sigma, steps), step_times(traj.grid, steps), Eigen::VectorXd()};
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int n = steps[static_cast<std::size_t>(b)];
    if (n < 1 || n > traj.grid.steps()) throw DimensionError("step index out of range");
    r.z_n.row(b) = traj.z[static_cast<std::size_t>(n)].row(b);
    r.mu.row(b) = traj.mu[static_cast<std::size_t>(n - 1)].row(b);
  }
  r.g2 = squared_diffusion(spec, r.t);
  return r;
}

Eigen::MatrixXd drift_rows(const DiffusionSpec& spec, const Eigen::MatrixXd& z, const Eigen::VectorXd& t) {
  if (spec.kind == DiffusionKind::VP) {
    Eigen::VectorXd scale(t.size());
    for (Eigen::Index b = 0; b < t.size(); ++b) scale(b) = -0.5 * spec.beta(t(b));
    return scale.asDiagonal() * z;
  }
  return drift_batch(spec, z, 0.0);
}

TapeCe ce_on_tape(const MlpVars& score_vars, const ScoreNet& net, const ad::Var& z_n, const ad::Var& mu,
                  const Eigen::MatrixXd& w, const Eigen::VectorXd& t, const Eigen::VectorXd& g2,
                  const DiffusionSpec& spec) {
  ad::Tape& tape = *z_n.tape();
  const ad::Var wv = tape.constant(w);
  const ad::Var s_z = score_forward(score_vars, net, z_n, t);
  const ad::Var s_mu = score_forward(score_vars, net, mu, t);
  const ad::Var sq = ad::mean(ad::scale_rows(ad::row_sum(ad::square(s_z)), 0.5 * g2));
  const ad::Var score_cv = ad::mean(ad::scale_rows(ad::dot_rows(wv, s_z - s_mu), g2));
  const ad::Var drift_cv = ad::mean(ad::dot_rows(wv, drift_var(spec, z_n, t) - drift_var(spec, mu, t)));
  TapeCe out{sq + score_cv - drift_cv, CeTerms{sq.scalar(), score_cv.scalar(), drift_cv.scalar()}};
  return out;
}

}  // namespace

ad::Var drift_var(const DiffusionSpec& spec, const ad::Var& z, const Eigen::VectorXd& t) {
  require_dim(t.size() == z.rows(), "drift_var: one time per row");
  if (spec.state_dim != 0) require_dim(spec.state_dim == z.cols(), "drift_var: state dimension mismatch");
  if (spec.kind == DiffusionKind::VP) {
    Eigen::VectorXd scale(t.size());
    for (Eigen::Index b = 0; b < t.size(); ++b) scale(b) = -0.5 * spec.beta(t(b));
    return ad::scale_rows(z, scale);
  }
  if (!spec.reference) throw ConfigError("Langevin diffusion requires a reference GMM");
  return ad::gmm_score(spec.reference, z);
}

LndsmSamples lndsm_ce_samples(const ScoreFn& score, const EmBatch& traj, const DiffusionSpec& spec,
                              const std::vector<int>& steps) {
  const StepRows r = gather_steps(traj, spec, steps);
  const Eigen::MatrixXd s_z = score(r.z_n, r.t);
  const Eigen::MatrixXd s_mu = score(r.mu, r.t);
  const Eigen::MatrixXd f_z = drift_rows(spec, r.z_n, r.t);
  const Eigen::MatrixXd f_mu = drift_rows(spec, r.mu, r.t);
  LndsmSamples out;
  out.sq_norm = 0.5 * r.g2.cwiseProduct(s_z.rowwise().squaredNorm());
  out.score_diff = r.g2.cwiseProduct(r.w.cwiseProduct(s_z - s_mu).rowwise().sum());
  out.drift_diff = r.w.cwiseProduct(f_z - f_mu).rowwise().sum();
  out.score_control = r.g2.cwiseProduct(r.w.cwiseProduct(s_mu).rowwise().sum());
  out.drift_control = r.w.cwiseProduct(f_mu).rowwise().sum();
  return out;
}

LndsmSamples lndsm_ce_samples(const ScoreFn& score, const EmBatch& traj, const DiffusionSpec& spec, Rng& rng) {
  return lndsm_ce_samples(score, traj, spec, draw_step_indices(rng, traj.size(), traj.grid.steps()));
}

TapeCe lndsm_ce_estimate(const MlpVars& score_vars, const ScoreNet& net, const ad::Var& z0, const DiffusionSpec& spec,
                         const TimeGrid& grid, Rng& rng) {
  ad::Tape& tape = *z0.tape();
  const Eigen::Index batch = z0.rows();
  const EmNoise noise = draw_em_noise(rng, batch, grid.steps(), z0.cols());
  const std::vector<int> steps = draw_step_indices(rng, batch, grid.steps());
  const int last = *std::max_element(steps.begin(), steps.end());

  Eigen::VectorXd sigma(grid.steps());
  for (int n = 0; n < grid.steps(); ++n) sigma(n) = diffusion_coeff(spec, grid.t(n)) * std::sqrt(grid.dt(n));

  // Only the prefix up to the largest sampled index is needed.
  std::vector<ad::Var> z{z0};
  std::vector<ad::Var> mu;
  for (int n = 0; n < last; ++n) {
    const auto sn = static_cast<std::size_t>(n);
    const ad::Var f = drift_var(spec, z[sn], Eigen::VectorXd::Constant(batch, grid.t(n)));
    mu.push_back(z[sn] + f * grid.dt(n));
    z.push_back(mu.back() + tape.constant(sigma(n) * noise.u[sn]));
    if (!z.back().value().allFinite())
      throw NumericalError("lndsm_ce_estimate: non-finite state at step " + std::to_string(n + 1));
  }
  std::vector<int> prev(steps);
  for (auto& p : prev) --p;
  const ad::Var z_n = ad::gather_rows(z, steps);
  const ad::Var mu_n = ad::gather_rows(mu, prev);
  const Eigen::VectorXd t = step_times(grid, steps);
  return ce_on_tape(score_vars, net, z_n, mu_n, scaled_noise(noise.u, sigma, steps), t, squared_diffusion(spec, t),
                    spec);
}

TapeCe lndsm_ce_estimate(const MlpVars& score_vars, const ScoreNet& net, ad::Tape& tape, const EmBatch& traj,
                         const DiffusionSpec& spec, Rng& rng) {
  const StepRows r = gather_steps(traj, spec, draw_step_indices(rng, traj.size(), traj.grid.steps()));
  return ce_on_tape(score_vars, net, tape.constant(r.z_n), tape.constant(r.mu), r.w, r.t, r.g2, spec);
}

ad::Var ndsm_loss(const MlpVars& score_vars, const ScoreNet& net, ad::Tape& tape, const EmBatch& traj, Rng& rng) {
  const std::vector<int> steps = draw_step_indices(rng, traj.size(), traj.grid.steps());
  DiffusionSpec unused = DiffusionSpec::vp(1.0, 1.0, traj.grid.horizon());
  const StepRows r = gather_steps(traj, unused, steps);
  const ad::Var s_z = score_forward(score_vars, net, tape.constant(r.z_n), r.t);
  const ad::Var s_mu = score_forward(score_vars, net, tape.constant(r.mu), r.t);
  const ad::Var per = ad::row_sum(ad::square(s_z)) * 0.5 + ad::dot_rows(tape.constant(r.w), s_z - s_mu);
  return ad::mean(per);
}

Eigen::VectorXd ndsm_samples(const ScoreFn& score, const EmBatch& traj, const std::vector<int>& steps) {
  DiffusionSpec unused = DiffusionSpec::vp(1.0, 1.0, traj.grid.horizon());
  const StepRows r = gather_steps(traj, unused, steps);
  const Eigen::MatrixXd s_z = score(r.z_n, r.t);
  const Eigen::MatrixXd s_mu = score(r.mu, r.t);
  return 0.5 * s_z.rowwise().squaredNorm() + r.w.cwiseProduct(s_z - s_mu).rowwise().sum();
}

ProbeResult variance_probe(const ScoreFn& score, const DiffusionSpec& spec, const TimeGrid& grid, bool with_cv,
                           const Eigen::MatrixXd& z0, Rng& rng, int threads) {
  const Eigen::Index total = z0.rows();
  if (total < 2) throw DimensionError("variance_probe: need at least two draws");
  constexpr Eigen::Index kChunk = 5000;
  Eigen::VectorXd values(total);
  for (Eigen::Index lo = 0; lo < total; lo += kChunk) {
    const Eigen::Index len = std::min(kChunk, total - lo);
    const EmBatch traj = em_simulate(spec, z0.middleRows(lo, len), grid, rng, threads);
    const LndsmSamples s = lndsm_ce_samples(score, traj, spec, rng);
    values.segment(lo, len) = with_cv ? s.with_control_variates() : s.without_control_variates();
  }
  ProbeResult r;
  r.draws = total;
  r.mean = values.mean();
  r.variance = (values.array() - r.mean).square().sum() / static_cast<double>(total - 1);
  r.std_error = std::sqrt(r.variance / static_cast<double>(total));
  return r;
}

TotalLoss vae_total_loss(const VaeVars& vae_vars, const VaeModel& vae, const MlpVars& score_vars, const ScoreNet& net,
                         const Eigen::MatrixXd& x, const DiffusionSpec& spec, const LossConfig& cfg, Rng& rng) {
  require_dim(net.dim == vae.latent_dim, "score network and VAE latent dimensions differ");
  ad::Tape& tape = *vae_vars.encoder.weights.front().tape();
  const Eigen::MatrixXd eps = rng.normal_matrix(x.rows(), vae.latent_dim);
  const TapeEncoding enc = vae_encode(vae_vars, vae, tape.constant(x), eps);
  const ad::Var recon = vae_decode_nll(vae_vars, vae, enc.z0, x);
  const ad::Var neg_entropy = vae_neg_entropy(enc.log_std);

  ad::Var ce;
  CeTerms terms;
  if (cfg.mode == CeMode::LSGM) {
    ce = dsm_vp_loss(score_vars, net, enc.z0, spec, rng, cfg.dsm);
    terms.sq_norm = ce.scalar();
  } else {
    TapeCe est = lndsm_ce_estimate(score_vars, net, enc.z0, spec, cfg.grid, rng);
    ce = est.loss;
    terms = est.terms;
  }
  const ad::Var weighted = ce * cfg.ce_weight;
  const ad::Var total = (recon + neg_entropy) + weighted;

  TotalLoss out;
  out.total = total;
  out.breakdown.total = total.scalar();
  out.breakdown.recon = recon.scalar();
  out.breakdown.neg_entropy = neg_entropy.scalar();
  out.breakdown.ce = weighted.scalar();
  out.breakdown.ce_terms = {terms.sq_norm * cfg.ce_weight, terms.score_cv * cfg.ce_weight,
                            terms.drift_cv * cfg.ce_weight};
  return out;
}

ad::Var standard_normal_ce(const ad::Var& mean, const ad::Var& log_std) {
  const double inv_b = 1.0 / static_cast<double>(mean.rows());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return ad::sum(ad::square(mean) + ad::exp(log_std * 2.0)) * (0.5 * inv_b) +
         half_log_2pi * static_cast<double>(mean.cols());
}

Lemma1Result lemma1_oracle(double q_mean, double q_var, const DiffusionSpec& spec, int quad_points, double p_mean,
                           double p_var) {
  if (spec.kind != DiffusionKind::VP) throw ConfigError("lemma1_oracle needs a linear (VP) diffusion");
  if (!(q_var > 0.0) || !(p_var > 0.0)) throw DimensionError("lemma1_oracle: variances must be positive");
  const double two_pi = 2.0 * std::numbers::pi;
  // Gaussian marginals of the linear SDE: mean m a0, variance m^2 s0 + 1 - m^2.
  auto marginal = [&](double t, double mean0, double var0) {
    const double m = vp_kernel(spec, t).m;
    return std::pair<double, double>{m * mean0, m * m * var0 + 1.0 - m * m};
  };

  Lemma1Result r;
  r.lhs = 0.5 * std::log(two_pi * p_var) + ((q_mean - p_mean) * (q_mean - p_mean) + q_var) / (2.0 * p_var);

  const auto [a_T, s_T] = marginal(spec.horizon, q_mean, q_var);
  const auto [b_T, r_T] = marginal(spec.horizon, p_mean, p_var);
  const double entropy_T = 0.5 * std::log(two_pi * std::numbers::e * s_T);

  // With z ~ N(a, s), grad log q = -(z-a)/s, grad log p = -(z-b)/r, f = -beta z / 2:
  //   E[|grad log p|^2]          = ((a-b)^2 + s) / r^2
  //   E[f grad log q]             = beta / 2
  //   E[grad log q . grad log p]  = 1 / r
  const QuadratureRule rule = gauss_legendre(quad_points, 0.0, spec.horizon);
  double integral = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    const double t = rule.nodes(i);
    const double beta = spec.beta(t);
    const auto [a, s] = marginal(t, q_mean, q_var);
    const auto [b, rv] = marginal(t, p_mean, p_var);
    const double integrand = 0.5 * beta * ((a - b) * (a - b) + s) / (rv * rv) + 0.5 * beta - beta / rv;
    integral += rule.weights(i) * integrand;
  }
  r.rhs = entropy_T + integral;
  if (!std::isfinite(r.rhs)) throw NumericalError("lemma1_oracle: quadrature diverged");
  r.terminal_kl = 0.5 * (std::log(r_T / s_T) + (s_T + (a_T - b_T) * (a_T - b_T)) / r_T - 1.0);
  return r;
}

}  // namespace lndsm
