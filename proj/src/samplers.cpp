#include "lndsm/samplers.hpp"

#include "lndsm/errors.hpp"

#include <cmath>
#include <string>

namespace lndsm {

SamplerConfig SamplerConfig::defaults_for(const DiffusionSpec& spec, SamplerMethod method, int steps) {
  SamplerConfig cfg;
  cfg.method = method;
  cfg.steps = steps;
  cfg.t_end = spec.kind == DiffusionKind::VP ? 0.01 : 0.0;
  return cfg;
}

void SamplerConfig::validate(double horizon) const {
  if (steps < 1) throw ConfigError("sampler steps must be >= 1");
  if (!(t_end >= 0.0) || !(t_end < horizon)) throw ConfigError("sampler t_end must lie in [0, T)");
}

ForwardCoefficients ForwardCoefficients::from(const DiffusionSpec& spec) {
  spec.validate();
  ForwardCoefficients c;
  c.drift = [spec](const Eigen::MatrixXd& z, double t) { return drift_batch(spec, z, t); };
  c.diffusion = [spec](double t) { return diffusion_coeff(spec, t); };
  c.horizon = spec.horizon;
  return c;
}

namespace {

void check_finite(const Eigen::MatrixXd& z, int step) {
  if (!z.allFinite()) throw NumericalError("sampler: non-finite state at step " + std::to_string(step));
}

}  // namespace

Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const ForwardCoefficients& coeffs, const Eigen::MatrixXd& z_T,
                                   const SamplerConfig& cfg, std::uint64_t key) {
  cfg.validate(coeffs.horizon);
  const Eigen::Index n = z_T.rows();
  const Eigen::Index d = z_T.cols();
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    streams.push_back(Rng::substream(key, static_cast<std::uint64_t>(i)));
  }
  const double h = (coeffs.horizon - cfg.t_end) / cfg.steps;
  Eigen::MatrixXd z = z_T;
  Eigen::MatrixXd xi(n, d);
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = coeffs.horizon - k * h;
    const double g = coeffs.diffusion(t);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) xi(i, j) = streams[static_cast<std::size_t>(i)].normal();
    }
    const Eigen::VectorXd tv = Eigen::VectorXd::Constant(n, t);
    z = z - h * (coeffs.drift(z, t) - g * g * score(z, tv)) + g * std::sqrt(h) * xi;
    check_finite(z, k + 1);
  }
  return z;
}

Eigen::MatrixXd pf_ode_sample(const ScoreFn& score, const ForwardCoefficients& coeffs, const Eigen::MatrixXd& z_T,
                              const SamplerConfig& cfg) {
  cfg.validate(coeffs.horizon);
  const Eigen::Index n = z_T.rows();
  const double h = (coeffs.horizon - cfg.t_end) / cfg.steps;
  auto velocity = [&](const Eigen::MatrixXd& z, double t) -> Eigen::MatrixXd {
    const double g = coeffs.diffusion(t);
    return coeffs.drift(z, t) - 0.5 * g * g * score(z, Eigen::VectorXd::Constant(n, t));
  };
  Eigen::MatrixXd z = z_T;
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = coeffs.horizon - k * h;
    const Eigen::MatrixXd v0 = velocity(z, t);
    const Eigen::MatrixXd pred = z - h * v0;
    z = z - 0.5 * h * (v0 + velocity(pred, t - h));
    check_finite(z, k + 1);
  }
  return z;
}

Eigen::MatrixXd draw_terminal(const DiffusionSpec& spec, Eigen::Index n, Eigen::Index dim, std::uint64_t key) {
  if (spec.kind == DiffusionKind::LangevinToReference) {
    require_dim(spec.reference->dim() == dim, "reference GMM dimension differs from the score network");
  }
  Eigen::MatrixXd z(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng sub = Rng::substream(key, static_cast<std::uint64_t>(i));
    if (spec.kind == DiffusionKind::VP) {
      for (Eigen::Index j = 0; j < dim; ++j) z(i, j) = sub.normal();
    } else {
      z.row(i) = gmm_sample(*spec.reference, 1, sub);
    }
  }
  return z;
}

// The initial draw and the path noise come from separate keys so both
// samplers start from the same points for a given stream.
Eigen::MatrixXd reverse_sde_sample(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg,
                                   Eigen::Index n, Rng& rng) {
  const std::uint64_t init_key = rng.next_u64();
  const std::uint64_t noise_key = rng.next_u64();
  const Eigen::MatrixXd z_T = draw_terminal(spec, n, net.dim, init_key);
  return reverse_sde_sample(score_fn(net), ForwardCoefficients::from(spec), z_T, cfg, noise_key);
}

Eigen::MatrixXd pf_ode_sample(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg, Eigen::Index n,
                              Rng& rng) {
  const std::uint64_t init_key = rng.next_u64();
  rng.next_u64();
  const Eigen::MatrixXd z_T = draw_terminal(spec, n, net.dim, init_key);
  return pf_ode_sample(score_fn(net), ForwardCoefficients::from(spec), z_T, cfg);
}

Eigen::MatrixXd sample_latents(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg,
                               Eigen::Index n, Rng& rng) {
  return cfg.method == SamplerMethod::ReverseSDE ? reverse_sde_sample(net, spec, cfg, n, rng)
                                                 : pf_ode_sample(net, spec, cfg, n, rng);
}

DecodedSamples decode_samples(const VaeModel& vae, const Eigen::MatrixXd& z) {
  require_dim(z.cols() == vae.latent_dim, "decode_samples: latent dimension mismatch");
  DecodedSamples out;
  out.values = vae_decode_mean(vae, z);
  if (vae.likelihood == Likelihood::BernoulliLogits) {
    out.binary = (out.values.array() >= 0.5).cast<double>().matrix();
  }
  return out;
}

}  // namespace lndsm
