#pragma once

#include "lndsm/nn.hpp"
#include "lndsm/objectives.hpp"
#include "lndsm/rng.hpp"
#include "lndsm/sde.hpp"

#include <Eigen/Dense>

#include <functional>

namespace lndsm {

enum class SamplerMethod { ReverseSDE, ProbabilityFlowODE };

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::ReverseSDE;
  int steps = 200;
  double t_end = 0.0;

  /// 0.01 for VP, 0 for Langevin.
  static SamplerConfig defaults_for(const DiffusionSpec& spec, SamplerMethod method = SamplerMethod::ReverseSDE,
                                    int steps = 200);
  void validate(double horizon) const;
};

/// Forward coefficients f(z, t) and g(t) seen by the reverse integrators.
struct ForwardCoefficients {
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)> drift;
  std::function<double(double)> diffusion;
  double horizon = 1.0;

  static ForwardCoefficients from(const DiffusionSpec& spec);
};

/// Sample i draws its initial state and all of its noise from
/// Rng::substream(key, i), where key is one u64 taken from rng.
Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const ForwardCoefficients& coeffs, const Eigen::MatrixXd& z_T,
                                   const SamplerConfig& cfg, std::uint64_t key);
Eigen::MatrixXd pf_ode_sample(const ScoreFn& score, const ForwardCoefficients& coeffs, const Eigen::MatrixXd& z_T,
                              const SamplerConfig& cfg);

/// Initial draws: N(0, I) for VP, the reference GMM for Langevin.
Eigen::MatrixXd draw_terminal(const DiffusionSpec& spec, Eigen::Index n, Eigen::Index dim, std::uint64_t key);

Eigen::MatrixXd reverse_sde_sample(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg,
                                   Eigen::Index n, Rng& rng);
Eigen::MatrixXd pf_ode_sample(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg, Eigen::Index n,
                              Rng& rng);
Eigen::MatrixXd sample_latents(const ScoreNet& net, const DiffusionSpec& spec, const SamplerConfig& cfg,
                               Eigen::Index n, Rng& rng);

struct DecodedSamples {
  Eigen::MatrixXd values;  // probabilities or means
  Eigen::MatrixXd binary;  // thresholded at 0.5; empty for Gaussian likelihoods
};

DecodedSamples decode_samples(const VaeModel& vae, const Eigen::MatrixXd& z);

}  // namespace lndsm
