#include "lndsm/nn.hpp"

#include "lndsm/errors.hpp"

#include <cmath>
#include <numbers>

namespace lndsm {

namespace {

double swish_value(double x) {
  const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return x * s;
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

MlpParams MlpParams::init(const std::vector<int>& sizes, Rng& rng, bool zero_last_layer) {
  if (sizes.size() < 2) throw DimensionError("MlpParams::init needs at least input and output sizes");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    if (fan_in < 1 || fan_out < 1) throw DimensionError("MlpParams::init: layer sizes must be positive");
    Eigen::MatrixXd w(fan_in, fan_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
    const bool last = l + 2 == sizes.size();
    if (last && zero_last_layer) w.setZero();
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::MatrixXd::Zero(1, fan_out));
  }
  return p;
}

void MlpParams::validate() const {
  require_dim(!weights.empty() && weights.size() == biases.size(), "MLP: weights and biases per layer");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require_dim(biases[l].rows() == 1 && biases[l].cols() == weights[l].cols(), "MLP: bias shape");
    if (l > 0) require_dim(weights[l].rows() == weights[l - 1].cols(), "MLP: layer shapes do not compose");
  }
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

std::vector<Eigen::MatrixXd*> MlpParams::tensors() {
  std::vector<Eigen::MatrixXd*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

std::vector<const Eigen::MatrixXd*> MlpParams::tensors() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  return out;
}

Eigen::MatrixXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x) {
  require_dim(x.cols() == params.input_dim(), "mlp_forward: input dimension mismatch");
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Eigen::MatrixXd a = h * params.weights[l];
    a = a.rowwise() + params.biases[l].row(0);
    if (l + 1 < params.weights.size()) a = a.unaryExpr(&swish_value);
    h = std::move(a);
  }
  return h;
}

MlpVars bind_parameters(ad::Tape& tape, const MlpParams& params) {
  MlpVars v;
  v.activation = params.activation;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    v.weights.push_back(tape.parameter(params.weights[l]));
    v.biases.push_back(tape.parameter(params.biases[l]));
  }
  return v;
}

MlpVars bind_constants(ad::Tape& tape, const MlpParams& params) {
  MlpVars v;
  v.activation = params.activation;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    v.weights.push_back(tape.constant(params.weights[l]));
    v.biases.push_back(tape.constant(params.biases[l]));
  }
  return v;
}

ad::Var mlp_forward(const MlpVars& vars, const ad::Var& x) {
  require_dim(x.cols() == vars.weights.front().rows(), "mlp_forward: input dimension mismatch");
  ad::Var h = x;
  for (std::size_t l = 0; l < vars.weights.size(); ++l) {
    h = ad::add_row(ad::matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < vars.weights.size()) h = ad::swish(h);
  }
  return h;
}

MlpParams collect_gradients(const MlpVars& vars) {
  MlpParams g;
  g.activation = vars.activation;
  for (std::size_t l = 0; l < vars.weights.size(); ++l) {
    g.weights.push_back(vars.weights[l].grad());
    g.biases.push_back(vars.biases[l].grad());
  }
  return g;
}

Eigen::MatrixXd time_features(const Eigen::VectorXd& t, double horizon) {
  Eigen::MatrixXd f(t.size(), 2 * kTimeFeaturePairs);
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    for (int k = 0; k < kTimeFeaturePairs; ++k) {
      const double arg = std::ldexp(1.0, k) * std::numbers::pi * t(b) / horizon;
      f(b, 2 * k) = std::sin(arg);
      f(b, 2 * k + 1) = std::cos(arg);
    }
  }
  return f;
}

ScoreNet ScoreNet::init(Eigen::Index dim, double horizon, int hidden, int hidden_layers, Rng& rng) {
  std::vector<int> sizes{static_cast<int>(dim) + 2 * kTimeFeaturePairs};
  for (int l = 0; l < hidden_layers; ++l) sizes.push_back(hidden);
  sizes.push_back(static_cast<int>(dim));
  ScoreNet net{MlpParams::init(sizes, rng, true), dim, horizon};
  return net;
}

std::string to_string(ScoreBase b) {
  switch (b) {
    case ScoreBase::None: return "plain";
    case ScoreBase::StandardNormal: return "standard_normal";
    case ScoreBase::Reference: return "reference";
  }
  return "?";
}

ScoreBase score_base_from(const std::string& name) {
  if (name == "plain") return ScoreBase::None;
  if (name == "standard_normal") return ScoreBase::StandardNormal;
  if (name == "reference") return ScoreBase::Reference;
  throw ConfigError("unknown score base '" + name + "'");
}

void ScoreNet::set_base(ScoreBase kind, std::shared_ptr<const Gmm> gmm, double scale) {
  base = kind;
  base_scale = scale;
  reference = kind == ScoreBase::Reference ? std::move(gmm) : nullptr;
  validate();
}

Eigen::MatrixXd ScoreNet::base_score(const Eigen::MatrixXd& z) const {
  switch (base) {
    case ScoreBase::None: return Eigen::MatrixXd::Zero(z.rows(), z.cols());
    case ScoreBase::StandardNormal: return -z;
    case ScoreBase::Reference: return base_scale * gmm_score_batch(*reference, z);
  }
  return {};
}

void ScoreNet::validate() const {
  mlp.validate();
  if (base == ScoreBase::Reference) {
    require_dim(reference != nullptr, "ScoreNet: reference base needs a GMM");
    require_dim(reference->dim() == dim, "ScoreNet: reference GMM dimension");
  }
  require_dim(mlp.input_dim() == dim + 2 * kTimeFeaturePairs, "ScoreNet: input width");
  require_dim(mlp.output_dim() == dim, "ScoreNet: output dimension must equal state dimension");
}

Eigen::MatrixXd ScoreNet::forward(const Eigen::MatrixXd& z, double t) const {
  return forward(z, Eigen::VectorXd::Constant(z.rows(), t));
}

Eigen::MatrixXd ScoreNet::forward(const Eigen::MatrixXd& z, const Eigen::VectorXd& t) const {
  require_dim(z.cols() == dim && t.size() == z.rows(), "ScoreNet::forward: shape mismatch");
  Eigen::MatrixXd in(z.rows(), z.cols() + 2 * kTimeFeaturePairs);
  in << z, time_features(t, horizon);
  if (base == ScoreBase::None) return mlp_forward(mlp, in);
  return base_score(z) + mlp_forward(mlp, in);
}

ad::Var score_forward(const MlpVars& vars, const ScoreNet& net, const ad::Var& z, const Eigen::VectorXd& t) {
  require_dim(z.cols() == net.dim && t.size() == z.rows(), "score_forward: shape mismatch");
  const ad::Var feats = z.tape()->constant(time_features(t, net.horizon));
  const ad::Var out = mlp_forward(vars, ad::concat_cols(z, feats));
  switch (net.base) {
    case ScoreBase::None: return out;
    case ScoreBase::StandardNormal: return out - z;
    case ScoreBase::Reference: return out + ad::gmm_score(net.reference, z) * net.base_scale;
  }
  return out;
}

VaeModel VaeModel::init(Eigen::Index data_dim, Eigen::Index latent_dim, int hidden, int hidden_layers,
                        Likelihood likelihood, double sigma_x, Rng& rng) {
  std::vector<int> enc{static_cast<int>(data_dim)}, dec{static_cast<int>(latent_dim)};
  for (int l = 0; l < hidden_layers; ++l) {
    enc.push_back(hidden);
    dec.push_back(hidden);
  }
  enc.push_back(2 * static_cast<int>(latent_dim));
  dec.push_back(static_cast<int>(data_dim));
  VaeModel m;
  m.encoder = MlpParams::init(enc, rng);
  m.decoder = MlpParams::init(dec, rng);
  m.data_dim = data_dim;
  m.latent_dim = latent_dim;
  m.likelihood = likelihood;
  m.sigma_x = sigma_x;
  m.validate();
  return m;
}

void VaeModel::validate() const {
  encoder.validate();
  decoder.validate();
  require_dim(encoder.input_dim() == data_dim && encoder.output_dim() == 2 * latent_dim,
              "VAE: encoder output must be 2 x latent dim");
  require_dim(decoder.input_dim() == latent_dim && decoder.output_dim() == data_dim, "VAE: decoder shape");
  if (likelihood == Likelihood::GaussianFixedVar && !(sigma_x > 0.0))
    throw ConfigError("VAE: sigma_x must be positive");
}

Encoding vae_encode(const VaeModel& model, const Eigen::MatrixXd& x, Rng& rng) {
  return vae_encode(model, x, rng.normal_matrix(x.rows(), model.latent_dim));
}

Encoding vae_encode(const VaeModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps) {
  require_dim(x.cols() == model.data_dim, "vae_encode: input dimension mismatch");
  require_dim(eps.rows() == x.rows() && eps.cols() == model.latent_dim, "vae_encode: noise shape");
  const Eigen::MatrixXd out = mlp_forward(model.encoder, x);
  Encoding e;
  e.mean = out.leftCols(model.latent_dim);
  e.log_std = out.rightCols(model.latent_dim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  e.z0 = e.mean + e.log_std.array().exp().matrix().cwiseProduct(eps);
  return e;
}

namespace {

void check_targets(const VaeModel& model, const Eigen::MatrixXd& x) {
  require_dim(x.cols() == model.data_dim, "decoder: target dimension mismatch");
  if (model.likelihood == Likelihood::BernoulliLogits && ((x.array() < 0.0).any() || (x.array() > 1.0).any()))
    throw DataError("Bernoulli targets must lie in [0, 1]");
}

}  // namespace

double vae_decode_nll(const VaeModel& model, const Eigen::MatrixXd& z0, const Eigen::MatrixXd& x) {
  check_targets(model, x);
  require_dim(z0.rows() == x.rows() && z0.cols() == model.latent_dim, "vae_decode_nll: latent shape");
  const Eigen::MatrixXd out = mlp_forward(model.decoder, z0);
  if (model.likelihood == Likelihood::BernoulliLogits) {
    const Eigen::MatrixXd nll = out.unaryExpr(&softplus_value) - x.cwiseProduct(out);
    return nll.sum() / static_cast<double>(x.rows());
  }
  const double s2 = model.sigma_x * model.sigma_x;
  const double cst = 0.5 * static_cast<double>(model.data_dim) * std::log(2.0 * std::numbers::pi * s2);
  return 0.5 * (x - out).squaredNorm() / s2 / static_cast<double>(x.rows()) + cst;
}

Eigen::MatrixXd vae_decode_mean(const VaeModel& model, const Eigen::MatrixXd& z0) {
  require_dim(z0.cols() == model.latent_dim, "decode: latent dimension mismatch");
  Eigen::MatrixXd out = mlp_forward(model.decoder, z0);
  if (model.likelihood == Likelihood::BernoulliLogits)
    out = out.unaryExpr([](double l) { return l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l)); });
  return out;
}

VaeVars bind_parameters(ad::Tape& tape, const VaeModel& model) {
  return {bind_parameters(tape, model.encoder), bind_parameters(tape, model.decoder)};
}

TapeEncoding vae_encode(const VaeVars& vars, const VaeModel& model, const ad::Var& x, const Eigen::MatrixXd& eps) {
  require_dim(x.cols() == model.data_dim, "vae_encode: input dimension mismatch");
  require_dim(eps.rows() == x.rows() && eps.cols() == model.latent_dim, "vae_encode: noise shape");
  const ad::Var out = mlp_forward(vars.encoder, x);
  TapeEncoding e;
  e.mean = ad::slice_cols(out, 0, model.latent_dim);
  e.log_std = ad::clamp(ad::slice_cols(out, model.latent_dim, model.latent_dim), kLogStdMin, kLogStdMax);
  e.z0 = e.mean + ad::exp(e.log_std) * x.tape()->constant(eps);
  return e;
}

ad::Var vae_decode_nll(const VaeVars& vars, const VaeModel& model, const ad::Var& z0, const Eigen::MatrixXd& x) {
  check_targets(model, x);
  require_dim(z0.rows() == x.rows() && z0.cols() == model.latent_dim, "vae_decode_nll: latent shape");
  const ad::Var out = mlp_forward(vars.decoder, z0);
  const ad::Var target = z0.tape()->constant(x);
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  if (model.likelihood == Likelihood::BernoulliLogits)
    return ad::sum(ad::softplus(out) - target * out) * inv_b;
  const double s2 = model.sigma_x * model.sigma_x;
  const double cst = 0.5 * static_cast<double>(model.data_dim) * std::log(2.0 * std::numbers::pi * s2);
  return ad::sum(ad::square(target - out)) * (0.5 / s2 * inv_b) + cst;
}

ad::Var vae_neg_entropy(const ad::Var& log_std) {
  const double half_log_2pie = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double inv_b = 1.0 / static_cast<double>(log_std.rows());
  return ad::sum(log_std) * (-inv_b) - half_log_2pie * static_cast<double>(log_std.cols());
}

}  // namespace lndsm
