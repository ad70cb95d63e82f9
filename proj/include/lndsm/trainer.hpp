#pragma once

#include "lndsm/checkpoint.hpp"
#include "lndsm/datasets.hpp"
#include "lndsm/gmm.hpp"
#include "lndsm/objectives.hpp"
#include "lndsm/samplers.hpp"
#include "lndsm/sde.hpp"

#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace lndsm {

enum class TrainMode { LSGM, LNDSM, NDSMAmbient };

std::string to_string(TrainMode mode);
TrainMode train_mode_from(const std::string& name);

inline constexpr double kLrVaeLndsm = 1e-6;
inline constexpr double kLrVaeLsgm = 1e-4;
inline constexpr double kLrScore = 3e-4;

struct TrainConfig {
  TrainMode mode = TrainMode::LNDSM;
  int epochs = 50;
  int batch_size = 60;
  double lr_vae = -1.0;  // < 0 selects the per-mode default; 0 freezes the VAE
  double lr_score = kLrScore;
  double lr_pretrain = 1e-3;
  int pretrain_epochs = 20;
  std::uint64_t seed = 1;

  double horizon = 0.0;  // <= 0: 1.5 for Langevin modes, 1 for VP
  int steps = 100;
  double beta0 = 0.1;
  double beta1 = 20.0;
  double g_const = std::numbers::sqrt2;

  int latent_dim = 2;
  int vae_hidden = 64;
  int vae_layers = 2;
  int score_hidden = 64;
  int score_layers = 2;
  std::string score_param = "mixed";  // mixed (stationary-law score + MLP) | plain
  std::string likelihood = "auto";  // auto | bernoulli | gaussian
  double sigma_x = 0.1;

  int gmm_components = 3;
  GmmFitOptions gmm;

  double grad_clip = 100.0;
  double ce_weight = 1.0;
  double t_min = 0.01;
  int eval_every = 0;  // 0: evaluate once at the end
  double budget_seconds = 0.0;  // 0: no wall-clock cap
  bool log_wall_time = false;
  int threads = 1;

  double effective_lr_vae() const;
  double effective_horizon() const;
  Likelihood effective_likelihood(const Dataset& data) const;
  void validate() const;
};

struct EvalConfig {
  Eigen::Index n_samples = 2000;
  SamplerMethod method = SamplerMethod::ReverseSDE;
  int sampler_steps = 200;
  double t_end = -1.0;  // < 0: sampler default for the diffusion
  int projections = 128;
  int features = 64;
  std::uint64_t feature_seed = 17;

  SamplerConfig sampler_for(const DiffusionSpec& spec) const;
  void validate() const;
};

std::string to_string(SamplerMethod method);
SamplerMethod sampler_method_from(const std::string& name);

struct TrainLogRow {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  TrainMode mode = TrainMode::LNDSM;
  LossBreakdown loss;
  double wall_ms = 0.0;
};

struct EvalRow {
  std::int64_t epoch = 0;
  TrainMode mode = TrainMode::LNDSM;
  double mf_kl = 0.0;
  double sw = 0.0;
  double frechet = 0.0;
  double is_surrogate = 0.0;
  Eigen::Index n_samples = 0;
  SamplerMethod sampler = SamplerMethod::ReverseSDE;
  std::uint64_t seed = 0;
};

std::string train_csv_header();
std::string train_csv_row(const TrainLogRow& row);
std::string eval_csv_header();
std::string eval_csv_row(const EvalRow& row);

struct PretrainResult {
  VaeModel vae;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

/// recon + E_q[log q] + closed-form cross entropy to N(0, I).
PretrainResult pretrain_vae(const TrainConfig& cfg, const Eigen::MatrixXd& x, VaeModel vae, Rng& rng);

/// Fresh parameters, VAE pretraining and (Langevin modes) the reference GMM fit.
TrainState initial_state(const TrainConfig& cfg, const Dataset& data, std::vector<double>* pretrain_loss = nullptr);

DiffusionSpec make_spec(const TrainConfig& cfg, const TrainState& state);

/// Base term implied by score_param: none, -z for VP, or (2/g^2) grad log pi
/// of the reference for Langevin modes. Needs the reference in those modes.
void attach_score_base(const TrainConfig& cfg, TrainState& state);

struct TrainCallbacks {
  std::function<void(const TrainLogRow&)> on_step;
  std::function<void(const TrainState&)> on_epoch;
  std::function<void(const EvalRow&)> on_eval;
};

struct TrainResult {
  TrainState state;
  std::int64_t epochs_completed = 0;
  bool budget_exhausted = false;
  double seconds = 0.0;
  std::vector<EvalRow> evals;
};

/// Continues from state.epoch up to cfg.epochs.
TrainResult train(const TrainConfig& cfg, const EvalConfig& eval_cfg, const Dataset& data, TrainState state,
                  const TrainCallbacks& callbacks = {});

struct GeneratedSamples {
  Eigen::MatrixXd latents;
  Eigen::MatrixXd data;  // decoded (equal to latents for NDSM-ambient)
};

GeneratedSamples generate(const TrainConfig& cfg, const TrainState& state, const SamplerConfig& sampler,
                          Eigen::Index n, Rng& rng);

/// Sample-quality metrics. Mode assignment uses a per-label Gaussian fit of the training data.
EvalRow evaluate(const TrainConfig& cfg, const EvalConfig& eval_cfg, const Dataset& data, const TrainState& state,
                 std::int64_t epoch);
std::uint64_t eval_seed(std::uint64_t seed, std::int64_t epoch);

}  // namespace lndsm
