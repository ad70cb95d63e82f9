#pragma once

#include "lndsm/autodiff.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace lndsm {

enum class Activation { Swish };

/// Fully connected stack: x -> act(x W0 + b0) -> ... -> x W_L + b_L (last layer linear).
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // [in x out]
  std::vector<Eigen::MatrixXd> biases;   // [1 x out]
  Activation activation = Activation::Swish;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static MlpParams init(const std::vector<int>& sizes, Rng& rng, bool zero_last_layer = false);

  Eigen::Index input_dim() const { return weights.front().rows(); }
  Eigen::Index output_dim() const { return weights.back().cols(); }
  void validate() const;
  std::size_t parameter_count() const;

  /// Weights and biases interleaved per layer: W0, b0, W1, b1, ...
  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;
};

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x);

struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  Activation activation = Activation::Swish;
};

MlpVars bind_parameters(ad::Tape& tape, const MlpParams& params);
/// Constant copies: forward values identical, no gradient recorded.
MlpVars bind_constants(ad::Tape& tape, const MlpParams& params);
ad::Var mlp_forward(const MlpVars& vars, const ad::Var& x);
/// Gradients in the layout of the parameters they were bound from.
MlpParams collect_gradients(const MlpVars& vars);

inline constexpr int kTimeFeaturePairs = 8;

/// [sin(2^k pi t/T), cos(2^k pi t/T)] for k = 0..7, one row per entry of t.
Eigen::MatrixXd time_features(const Eigen::VectorXd& t, double horizon);

/// Analytic term added to the network output. StandardNormal adds -z,
/// Reference adds base_scale * grad log pi for the attached GMM.
enum class ScoreBase { None, StandardNormal, Reference };

std::string to_string(ScoreBase b);
ScoreBase score_base_from(const std::string& name);

/// s_theta(z, t) = base(z) + MLP([z, time features]). Last layer starts at
/// zero, so a fresh net returns exactly the base score.
struct ScoreNet {
  MlpParams mlp;
  Eigen::Index dim = 0;
  double horizon = 1.0;
  ScoreBase base = ScoreBase::None;
  double base_scale = 1.0;
  std::shared_ptr<const Gmm> reference;

  static ScoreNet init(Eigen::Index dim, double horizon, int hidden, int hidden_layers, Rng& rng);
  void validate() const;
  void set_base(ScoreBase kind, std::shared_ptr<const Gmm> gmm = nullptr, double scale = 1.0);
  Eigen::MatrixXd base_score(const Eigen::MatrixXd& z) const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& z, double t) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z, const Eigen::VectorXd& t) const;
};

ad::Var score_forward(const MlpVars& vars, const ScoreNet& net, const ad::Var& z, const Eigen::VectorXd& t);

enum class Likelihood { BernoulliLogits, GaussianFixedVar };

inline constexpr double kLogStdMin = -7.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal-Gaussian encoder q(z0|x) and a decoder p(x|z0).
struct VaeModel {
  MlpParams encoder;  // x -> [mean, log_std]
  MlpParams decoder;  // z0 -> logits or mean
  Eigen::Index data_dim = 0;
  Eigen::Index latent_dim = 0;
  Likelihood likelihood = Likelihood::GaussianFixedVar;
  double sigma_x = 0.1;

  static VaeModel init(Eigen::Index data_dim, Eigen::Index latent_dim, int hidden, int hidden_layers,
                       Likelihood likelihood, double sigma_x, Rng& rng);
  void validate() const;
};

struct Encoding {
  Eigen::MatrixXd z0;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd log_std;
};

/// z0 = mean + exp(log_std) * eps, eps drawn row-major from rng; log_std clamped to [-7, 2].
Encoding vae_encode(const VaeModel& model, const Eigen::MatrixXd& x, Rng& rng);
Encoding vae_encode(const VaeModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps);
/// Mean over the batch of -log p(x | z0).
double vae_decode_nll(const VaeModel& model, const Eigen::MatrixXd& z0, const Eigen::MatrixXd& x);
/// Bernoulli probabilities or Gaussian mean.
Eigen::MatrixXd vae_decode_mean(const VaeModel& model, const Eigen::MatrixXd& z0);

struct VaeVars {
  MlpVars encoder;
  MlpVars decoder;
};

VaeVars bind_parameters(ad::Tape& tape, const VaeModel& model);

struct TapeEncoding {
  ad::Var z0;
  ad::Var mean;
  ad::Var log_std;
};

TapeEncoding vae_encode(const VaeVars& vars, const VaeModel& model, const ad::Var& x, const Eigen::MatrixXd& eps);
ad::Var vae_decode_nll(const VaeVars& vars, const VaeModel& model, const ad::Var& z0, const Eigen::MatrixXd& x);
/// E_q[log q(z0|x)] per batch mean: -sum(log_std) - d/2 log(2 pi e).
ad::Var vae_neg_entropy(const ad::Var& log_std);

}  // namespace lndsm
