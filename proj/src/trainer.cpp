#include "lndsm/trainer.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"
#include "lndsm/metrics.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace lndsm {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::LSGM: return "LSGM";
    case TrainMode::LNDSM: return "LNDSM";
    case TrainMode::NDSMAmbient: return "NDSM-ambient";
  }
  return "?";
}

TrainMode train_mode_from(const std::string& name) {
  if (name == "LSGM" || name == "lsgm") return TrainMode::LSGM;
  if (name == "LNDSM" || name == "lndsm") return TrainMode::LNDSM;
  if (name == "NDSM-ambient" || name == "ndsm-ambient") return TrainMode::NDSMAmbient;
  throw ConfigError("unknown training mode '" + name + "' (LSGM, LNDSM, NDSM-ambient)");
}

std::string to_string(SamplerMethod method) {
  return method == SamplerMethod::ReverseSDE ? "reverse_sde" : "pf_ode";
}

SamplerMethod sampler_method_from(const std::string& name) {
  if (name == "reverse_sde") return SamplerMethod::ReverseSDE;
  if (name == "pf_ode") return SamplerMethod::ProbabilityFlowODE;
  throw ConfigError("unknown sampler '" + name + "' (reverse_sde, pf_ode)");
}

double TrainConfig::effective_lr_vae() const {
  if (lr_vae >= 0.0) return lr_vae;
  return mode == TrainMode::LSGM ? kLrVaeLsgm : kLrVaeLndsm;
}

double TrainConfig::effective_horizon() const {
  if (horizon > 0.0) return horizon;
  return mode == TrainMode::LSGM ? 1.0 : 1.5;
}

Likelihood TrainConfig::effective_likelihood(const Dataset& data) const {
  if (likelihood == "bernoulli") return Likelihood::BernoulliLogits;
  if (likelihood == "gaussian") return Likelihood::GaussianFixedVar;
  return data.binary() ? Likelihood::BernoulliLogits : Likelihood::GaussianFixedVar;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || pretrain_epochs < 0 || steps < 1)
    throw ConfigError("epochs, batch_size and steps must be positive; pretrain_epochs non-negative");
  if (!(lr_score > 0.0) || !(lr_pretrain > 0.0) || !(lr_vae >= 0.0 || lr_vae == -1.0))
    throw ConfigError("learning rates must be positive (lr_vae may be 0 or auto)");
  if (latent_dim < 1 || vae_hidden < 1 || vae_layers < 1 || score_hidden < 1 || score_layers < 1)
    throw ConfigError("network sizes must be positive");
  if (score_param != "plain" && score_param != "mixed") throw ConfigError("score_param must be plain or mixed");
  if (likelihood != "auto" && likelihood != "bernoulli" && likelihood != "gaussian")
    throw ConfigError("likelihood must be auto, bernoulli or gaussian");
  if (!(sigma_x > 0.0) || !(grad_clip > 0.0) || !(ce_weight >= 0.0) || !(t_min > 0.0))
    throw ConfigError("sigma_x, grad_clip and t_min must be positive; ce_weight non-negative");
  if (gmm_components < 1) throw ConfigError("gmm components must be positive");
  if (eval_every < 0 || budget_seconds < 0.0 || threads < 1) throw ConfigError("eval_every/budget/threads out of range");
  if (!(beta0 > 0.0) || !(beta1 >= beta0) || !(g_const > 0.0)) throw ConfigError("diffusion coefficients out of range");
}

SamplerConfig EvalConfig::sampler_for(const DiffusionSpec& spec) const {
  SamplerConfig cfg = SamplerConfig::defaults_for(spec, method, sampler_steps);
  if (t_end >= 0.0) cfg.t_end = t_end;
  cfg.validate(spec.horizon);
  return cfg;
}

void EvalConfig::validate() const {
  if (n_samples < 2 || sampler_steps < 1 || projections < 1 || features < 1)
    throw ConfigError("eval sizes must be positive (n_samples >= 2)");
}

std::string train_csv_header() {
  return "epoch,step,mode,total,recon,neg_entropy,ce,sq_norm,score_cv,drift_cv,wall_ms\n";
}

std::string train_csv_row(const TrainLogRow& r) {
  const auto& l = r.loss;
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + to_string(r.mode) + "," +
         format_double(l.total) + "," + format_double(l.recon) + "," + format_double(l.neg_entropy) + "," +
         format_double(l.ce) + "," + format_double(l.ce_terms.sq_norm) + "," + format_double(l.ce_terms.score_cv) +
         "," + format_double(l.ce_terms.drift_cv) + "," + format_double(r.wall_ms) + "\n";
}

std::string eval_csv_header() { return "epoch,mode,mf_kl,sw,frechet,is_surrogate,n_samples,sampler,seed\n"; }

std::string eval_csv_row(const EvalRow& r) {
  return std::to_string(r.epoch) + "," + to_string(r.mode) + "," + format_double(r.mf_kl) + "," +
         format_double(r.sw) + "," + format_double(r.frechet) + "," + format_double(r.is_surrogate) + "," +
         std::to_string(r.n_samples) + "," + to_string(r.sampler) + "," + std::to_string(r.seed) + "\n";
}

namespace {

std::vector<Eigen::MatrixXd*> vae_tensors(VaeModel& vae) {
  auto out = vae.encoder.tensors();
  for (auto* p : vae.decoder.tensors()) out.push_back(p);
  return out;
}

std::vector<const Eigen::MatrixXd*> const_view(const std::vector<Eigen::MatrixXd*>& v) {
  return {v.begin(), v.end()};
}

std::vector<Eigen::MatrixXd> flatten(const MlpParams& a) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto* p : a.tensors()) out.push_back(*p);
  return out;
}

std::vector<Eigen::MatrixXd> vae_gradients(const VaeVars& vars) {
  auto out = flatten(collect_gradients(vars.encoder));
  for (auto& g : flatten(collect_gradients(vars.decoder))) out.push_back(std::move(g));
  return out;
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  return idx;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx, std::size_t lo,
                       std::size_t count) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), x.cols());
  for (std::size_t i = 0; i < count; ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[lo + i]);
  return out;
}

std::size_t batches_per_epoch(Eigen::Index n, int batch) {
  if (n < batch) throw DataError("dataset has fewer rows than one batch");
  return static_cast<std::size_t>(n / batch);
}

}  // namespace

PretrainResult pretrain_vae(const TrainConfig& cfg, const Eigen::MatrixXd& x, VaeModel vae, Rng& rng) {
  PretrainResult out;
  auto params = vae_tensors(vae);
  AdamGroup adam = AdamGroup::zeros_like("vae", const_view(params));
  const std::size_t batches = batches_per_epoch(x.rows(), cfg.batch_size);
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    const auto idx = shuffled(x.rows(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const Eigen::MatrixXd xb = gather(x, idx, b * static_cast<std::size_t>(cfg.batch_size),
                                        static_cast<std::size_t>(cfg.batch_size));
      ad::Tape tape;
      const VaeVars vars = bind_parameters(tape, vae);
      const Eigen::MatrixXd eps = rng.normal_matrix(xb.rows(), vae.latent_dim);
      const TapeEncoding enc = vae_encode(vars, vae, tape.constant(xb), eps);
      const ad::Var loss = vae_decode_nll(vars, vae, enc.z0, xb) + vae_neg_entropy(enc.log_std) +
                           standard_normal_ce(enc.mean, enc.log_std);
      if (!std::isfinite(loss.scalar()))
        throw NumericalError("pretraining loss is non-finite at epoch " + std::to_string(epoch + 1));
      tape.backward(loss);
      auto grads = vae_gradients(vars);
      clip_global_norm({&grads}, cfg.grad_clip);
      adam_step(adam, params, grads, cfg.lr_pretrain);
      sum += loss.scalar();
    }
    out.epoch_loss.push_back(sum / static_cast<double>(batches));
  }
  out.vae = std::move(vae);
  return out;
}

TrainState initial_state(const TrainConfig& cfg, const Dataset& data, std::vector<double>* pretrain_loss) {
  cfg.validate();
  Rng rng(cfg.seed);
  TrainState s;
  const double horizon = cfg.effective_horizon();
  s.vae = VaeModel::init(data.x.cols(), cfg.latent_dim, cfg.vae_hidden, cfg.vae_layers,
                         cfg.effective_likelihood(data), cfg.sigma_x, rng);
  if (cfg.mode == TrainMode::NDSMAmbient) {
    s.score = ScoreNet::init(data.x.cols(), horizon, cfg.score_hidden, cfg.score_layers, rng);
    s.reference = gmm_fit(data.x, cfg.gmm_components, rng, cfg.gmm).model;
  } else {
    PretrainResult pre = pretrain_vae(cfg, data.x, s.vae, rng);
    s.vae = std::move(pre.vae);
    if (pretrain_loss) *pretrain_loss = pre.epoch_loss;
    s.score = ScoreNet::init(cfg.latent_dim, horizon, cfg.score_hidden, cfg.score_layers, rng);
    if (cfg.mode == TrainMode::LNDSM) {
      const Encoding enc = vae_encode(s.vae, data.x, rng);
      s.reference = gmm_fit(enc.z0, cfg.gmm_components, rng, cfg.gmm).model;
    }
  }
  attach_score_base(cfg, s);
  auto vp = vae_tensors(s.vae);
  s.adam_vae = AdamGroup::zeros_like("vae", const_view(vp));
  s.adam_score = AdamGroup::zeros_like("score", const_view(s.score.mlp.tensors()));
  s.rng_state = rng.save();
  return s;
}

DiffusionSpec make_spec(const TrainConfig& cfg, const TrainState& state) {
  const double horizon = cfg.effective_horizon();
  if (cfg.mode == TrainMode::LSGM) return DiffusionSpec::vp(cfg.beta0, cfg.beta1, horizon, cfg.latent_dim);
  if (!state.reference) throw ConfigError(to_string(cfg.mode) + " training needs a fitted reference GMM");
  return DiffusionSpec::langevin(*state.reference, horizon, cfg.g_const);
}

void attach_score_base(const TrainConfig& cfg, TrainState& state) {
  if (cfg.score_param == "plain") {
    state.score.set_base(ScoreBase::None);
  } else if (cfg.mode == TrainMode::LSGM) {
    state.score.set_base(ScoreBase::StandardNormal);
  } else {
    if (!state.reference) throw ConfigError("mixed score parameterization needs the reference GMM");
    state.score.set_base(ScoreBase::Reference, std::make_shared<const Gmm>(*state.reference),
                         2.0 / (cfg.g_const * cfg.g_const));
  }
}

std::uint64_t eval_seed(std::uint64_t seed, std::int64_t epoch) {
  return Rng::substream(seed, 0x6576616cULL + static_cast<std::uint64_t>(epoch)).next_u64();
}

GeneratedSamples generate(const TrainConfig& cfg, const TrainState& state, const SamplerConfig& sampler,
                          Eigen::Index n, Rng& rng) {
  const DiffusionSpec spec = make_spec(cfg, state);
  GeneratedSamples out;
  out.latents = sample_latents(state.score, spec, sampler, n, rng);
  out.data = cfg.mode == TrainMode::NDSMAmbient ? out.latents : decode_samples(state.vae, out.latents).values;
  return out;
}

EvalRow evaluate(const TrainConfig& cfg, const EvalConfig& eval_cfg, const Dataset& data, const TrainState& state,
                 std::int64_t epoch) {
  eval_cfg.validate();
  EvalRow row;
  row.epoch = epoch;
  row.mode = cfg.mode;
  row.n_samples = eval_cfg.n_samples;
  row.sampler = eval_cfg.method;
  row.seed = eval_seed(cfg.seed, epoch);
  Rng rng(row.seed);
  const SamplerConfig sampler = eval_cfg.sampler_for(make_spec(cfg, state));
  const GeneratedSamples gen = generate(cfg, state, sampler, eval_cfg.n_samples, rng);

  const Gmm truth = label_gmm(data);
  const auto generated = ModeFractions::from_labels(gmm_assign(truth, gen.data), data.modes);
  row.mf_kl = mode_fraction_kl(data.mode_fractions(), generated.fractions);
  row.sw = sliced_wasserstein(gen.data, data.x, eval_cfg.projections, rng);
  row.frechet = frechet_surrogate(gen.data, data.x,
                                  FixedRandomFeatures::make(data.x.cols(), eval_cfg.features, eval_cfg.feature_seed));
  row.is_surrogate = inception_surrogate(gen.data, truth);
  return row;
}

TrainResult train(const TrainConfig& cfg, const EvalConfig& eval_cfg, const Dataset& data, TrainState state,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  eval_cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  const DiffusionSpec spec = make_spec(cfg, state);
  LossConfig loss_cfg;
  loss_cfg.mode = cfg.mode == TrainMode::LSGM ? CeMode::LSGM : CeMode::LNDSM;
  loss_cfg.grid = TimeGrid::uniform(spec.horizon, cfg.steps);
  loss_cfg.dsm.t_min = cfg.t_min;
  loss_cfg.ce_weight = cfg.ce_weight;
  const double lr_vae = cfg.effective_lr_vae();

  if (cfg.mode == TrainMode::NDSMAmbient) {
    require_dim(state.score.dim == data.x.cols(), "score network does not match the data dimension");
  } else {
    require_dim(state.vae.data_dim == data.x.cols(), "VAE does not match the data dimension");
  }

  Rng rng(0);
  rng.load(state.rng_state);
  const std::size_t batches = batches_per_epoch(data.x.rows(), cfg.batch_size);
  TrainResult result;
  std::int64_t last_eval = -1;

  while (state.epoch < cfg.epochs && !result.budget_exhausted) {
    const std::int64_t epoch = state.epoch + 1;
    const auto idx = shuffled(data.x.rows(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const Eigen::MatrixXd xb = gather(data.x, idx, b * static_cast<std::size_t>(cfg.batch_size),
                                        static_cast<std::size_t>(cfg.batch_size));
      ad::Tape tape;
      TrainLogRow row;
      row.epoch = epoch;
      row.step = state.step + 1;
      row.mode = cfg.mode;
      auto score_params = state.score.mlp.tensors();
      const MlpVars score_vars = bind_parameters(tape, state.score.mlp);
      std::vector<Eigen::MatrixXd> score_grads;
      if (cfg.mode == TrainMode::NDSMAmbient) {
        const EmBatch traj = em_simulate(spec, xb, loss_cfg.grid, rng, cfg.threads);
        const ad::Var loss = ndsm_loss(score_vars, state.score, tape, traj, rng);
        row.loss.total = row.loss.ce = row.loss.ce_terms.sq_norm = loss.scalar();
        if (!std::isfinite(row.loss.total))
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + "; last good checkpoint is epoch " +
                               std::to_string(state.epoch));
        tape.backward(loss);
        score_grads = flatten(collect_gradients(score_vars));
        clip_global_norm({&score_grads}, cfg.grad_clip);
      } else {
        const VaeVars vae_vars = bind_parameters(tape, state.vae);
        const TotalLoss loss =
            vae_total_loss(vae_vars, state.vae, score_vars, state.score, xb, spec, loss_cfg, rng);
        row.loss = loss.breakdown;
        if (!std::isfinite(row.loss.total))
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + "; last good checkpoint is epoch " +
                               std::to_string(state.epoch));
        tape.backward(loss.total);
        auto vae_grads = vae_gradients(vae_vars);
        score_grads = flatten(collect_gradients(score_vars));
        clip_global_norm({&vae_grads, &score_grads}, cfg.grad_clip);
        adam_step(state.adam_vae, vae_tensors(state.vae), vae_grads, lr_vae);
      }
      adam_step(state.adam_score, score_params, score_grads, cfg.lr_score);
      ++state.step;
      if (cfg.log_wall_time) row.wall_ms = 1000.0 * elapsed();
      if (callbacks.on_step) callbacks.on_step(row);
      if (cfg.budget_seconds > 0.0 && elapsed() >= cfg.budget_seconds) {
        result.budget_exhausted = true;
        break;
      }
    }
    if (result.budget_exhausted) break;
    state.epoch = epoch;
    state.rng_state = rng.save();
    if (callbacks.on_epoch) callbacks.on_epoch(state);
    if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
      result.evals.push_back(evaluate(cfg, eval_cfg, data, state, epoch));
      last_eval = epoch;
      if (callbacks.on_eval) callbacks.on_eval(result.evals.back());
    }
  }
  if (last_eval != state.epoch) {
    result.evals.push_back(evaluate(cfg, eval_cfg, data, state, state.epoch));
    if (callbacks.on_eval) callbacks.on_eval(result.evals.back());
  }
  result.epochs_completed = state.epoch;
  result.seconds = elapsed();
  result.state = std::move(state);
  return result;
}

}  // namespace lndsm
