#include "lndsm/property_suite.hpp"

#include "lndsm/app.hpp"
#include "lndsm/checkpoint.hpp"
#include "lndsm/config.hpp"
#include "lndsm/errors.hpp"
#include "lndsm/gmm.hpp"
#include "lndsm/io.hpp"
#include "lndsm/metrics.hpp"
#include "lndsm/nn.hpp"
#include "lndsm/objectives.hpp"
#include "lndsm/quadrature.hpp"
#include "lndsm/samplers.hpp"
#include "lndsm/sde.hpp"
#include "lndsm/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace lndsm {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

PropertyOutcome verdict(bool ok, const std::string& detail) { return {ok, detail}; }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const Eigen::VectorXd& v) {
  MeanSe r;
  r.mean = v.mean();
  const double var = (v.array() - r.mean).square().sum() / static_cast<double>(v.size() - 1);
  r.se = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

// |empirical variance - target| in units of its standard error.
double variance_z(const Eigen::VectorXd& v, double target) {
  const double m = v.mean();
  const Eigen::ArrayXd c = v.array() - m;
  const double s2 = c.square().mean();
  const double m4 = c.square().square().mean();
  return std::abs(s2 - target) / std::sqrt((m4 - s2 * s2) / static_cast<double>(v.size()));
}

Gmm fixture_gmm() {
  Eigen::VectorXd w(3);
  w << 0.5, 0.3, 0.2;
  Eigen::MatrixXd mu(3, 2), var(3, 2);
  mu << -2.0, 0.0, 2.0, 1.0, 0.0, -2.5;
  var << 0.3, 0.5, 0.6, 0.2, 0.4, 0.4;
  return Gmm(w, mu, var);
}

ScoreNet random_score_net(Eigen::Index dim, double horizon, int hidden, Rng& rng) {
  ScoreNet net = ScoreNet::init(dim, horizon, hidden, 2, rng);
  net.mlp.weights.back() = 0.3 * rng.normal_matrix(net.mlp.weights.back().rows(), net.mlp.weights.back().cols());
  net.mlp.biases.back() = 0.1 * rng.normal_matrix(1, dim);
  return net;
}

double vp_mean_factor_by_quadrature(const DiffusionSpec& spec, double t) {
  if (t == 0.0) return 1.0;
  const QuadratureRule rule = gauss_legendre(16, 0.0, t);
  double integral = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) integral += rule.weights(i) * spec.beta(rule.nodes(i));
  return std::exp(-0.5 * integral);
}

// Collects z[n] for the requested steps, simulating in chunks to bound memory.
std::vector<Eigen::MatrixXd> em_states(const DiffusionSpec& spec, const Eigen::MatrixXd& z0, const TimeGrid& grid,
                                       const std::vector<int>& steps, Rng& rng, Eigen::Index chunk = 2000) {
  std::vector<Eigen::MatrixXd> out(steps.size(), Eigen::MatrixXd(z0.rows(), z0.cols()));
  for (Eigen::Index lo = 0; lo < z0.rows(); lo += chunk) {
    const Eigen::Index len = std::min(chunk, z0.rows() - lo);
    const EmBatch b = em_simulate(spec, z0.middleRows(lo, len), grid, rng);
    for (std::size_t k = 0; k < steps.size(); ++k)
      out[k].middleRows(lo, len) = b.z[static_cast<std::size_t>(steps[k])];
  }
  return out;
}

// Mixture moments: E z and E z_i z_j.
void mixture_moments(const Gmm& g, Eigen::VectorXd& mean, Eigen::MatrixXd& second) {
  mean = g.means().transpose() * g.weights();
  second = Eigen::MatrixXd::Zero(g.dim(), g.dim());
  for (Eigen::Index k = 0; k < g.components(); ++k) {
    const Eigen::VectorXd mu = g.means().row(k).transpose();
    second += g.weights()(k) * (mu * mu.transpose() + Eigen::MatrixXd(g.variances().row(k).asDiagonal()));
  }
}

// Largest |empirical - analytic| / SE over first and second moments.
double moment_z(const Eigen::MatrixXd& z, const Eigen::VectorXd& mean, const Eigen::MatrixXd& second) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const MeanSe m = mean_se(z.col(i));
    worst = std::max(worst, std::abs(m.mean - mean(i)) / m.se);
    for (Eigen::Index j = i; j < z.cols(); ++j) {
      const MeanSe p = mean_se(z.col(i).cwiseProduct(z.col(j)));
      worst = std::max(worst, std::abs(p.mean - second(i, j)) / p.se);
    }
  }
  return worst;
}

// Exact score of the VP marginal when q0 is a diagonal GMM.
ScoreFn vp_gmm_exact_score(const DiffusionSpec& spec, const Gmm& q0) {
  return [spec, q0](const Eigen::MatrixXd& z, const Eigen::VectorXd& t) {
    Eigen::MatrixXd out(z.rows(), z.cols());
    Eigen::Index start = 0;
    while (start < z.rows()) {
      Eigen::Index end = start + 1;
      while (end < z.rows() && t(end) == t(start)) ++end;
      const auto k = vp_kernel(spec, t(start));
      const Gmm qt(q0.weights(), k.m * q0.means(),
                   ((k.m * k.m) * q0.variances().array() + k.v).matrix());
      out.middleRows(start, end - start) = gmm_score_batch(qt, z.middleRows(start, end - start));
      start = end;
    }
    return out;
  };
}

ScoreFn vp_gaussian_exact_score(const DiffusionSpec& spec, const Eigen::RowVectorXd& a0, double s0) {
  return [spec, a0, s0](const Eigen::MatrixXd& z, const Eigen::VectorXd& t) {
    Eigen::MatrixXd out(z.rows(), z.cols());
    for (Eigen::Index b = 0; b < z.rows(); ++b) {
      const auto k = vp_kernel(spec, t(b));
      out.row(b) = -(z.row(b) - k.m * a0) / (k.m * k.m * s0 + k.v);
    }
    return out;
  };
}

// Small two-dimensional configuration used by the trainer and CLI checks.
ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.run.name = "check";
  c.data.n_train = 240;
  c.train.epochs = 2;
  c.train.batch_size = 30;
  c.train.pretrain_epochs = 2;
  c.train.vae_hidden = 16;
  c.train.score_hidden = 16;
  c.train.steps = 10;
  c.eval.n_samples = 200;
  c.eval.sampler_steps = 20;
  c.eval.projections = 16;
  c.eval.features = 16;
  c.sample_n = 100;
  return c;
}

MlpVars vars_from(const std::vector<ad::Var>& v, std::size_t offset, std::size_t layers) {
  MlpVars m;
  for (std::size_t l = 0; l < layers; ++l) {
    m.weights.push_back(v[offset + 2 * l]);
    m.biases.push_back(v[offset + 2 * l + 1]);
  }
  return m;
}

std::vector<Eigen::MatrixXd> copies(const MlpParams& p) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto* t : p.tensors()) out.push_back(*t);
  return out;
}

struct LossFixture {
  VaeModel vae;
  ScoreNet net;
  Eigen::MatrixXd x;
  DiffusionSpec spec;
  LossConfig cfg;
};

LossFixture loss_fixture(CeMode mode) {
  Rng rng(2024);
  LossFixture f;
  f.vae = VaeModel::init(2, 2, 12, 2, Likelihood::GaussianFixedVar, 0.5, rng);
  f.net = random_score_net(2, mode == CeMode::LSGM ? 1.0 : 1.5, 12, rng);
  f.x = rng.normal_matrix(8, 2);
  f.cfg.mode = mode;
  f.cfg.grid = TimeGrid::uniform(f.net.horizon, 10);
  f.spec = mode == CeMode::LSGM ? DiffusionSpec::vp(0.1, 20.0, 1.0, 2) : DiffusionSpec::langevin(fixture_gmm(), 1.5);
  if (mode == CeMode::LSGM)
    f.net.set_base(ScoreBase::StandardNormal);
  else
    f.net.set_base(ScoreBase::Reference, f.spec.reference, 1.0);
  return f;
}

// Full objective as a function of (encoder, decoder, score) tensors, with fixed randomness.
ad::Var total_loss_of(const LossFixture& f, const std::vector<ad::Var>& v) {
  const std::size_t ne = f.vae.encoder.weights.size(), nd = f.vae.decoder.weights.size();
  const VaeVars vae_vars{vars_from(v, 0, ne), vars_from(v, 2 * ne, nd)};
  const MlpVars score_vars = vars_from(v, 2 * (ne + nd), f.net.mlp.weights.size());
  Rng rng(99);
  return vae_total_loss(vae_vars, f.vae, score_vars, f.net, f.x, f.spec, f.cfg, rng).total;
}

std::vector<Eigen::MatrixXd> all_tensors(const LossFixture& f) {
  auto v = copies(f.vae.encoder);
  for (auto& m : copies(f.vae.decoder)) v.push_back(m);
  for (auto& m : copies(f.net.mlp)) v.push_back(m);
  return v;
}

ad::Var reduce(ad::Tape& tape, const ad::Var& v, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(v * tape.constant(rng.normal_matrix(v.rows(), v.cols())));
}

// ---------------------------------------------------------------------------
// sde_core

PropertyOutcome sde_reconstruction() {
  Rng rng(11);
  const TimeGrid grid = TimeGrid::uniform(1.5, 50);
  double worst = 0.0;
  for (const DiffusionSpec& spec : {DiffusionSpec::vp(0.1, 20.0, 1.5, 2), DiffusionSpec::langevin(fixture_gmm(), 1.5)}) {
    const EmBatch b = em_simulate(spec, 2.0 * rng.normal_matrix(200, 2), grid, rng);
    for (int n = 1; n <= grid.steps(); ++n) {
      const auto k = static_cast<std::size_t>(n);
      worst = std::max(worst, (b.z[k] - (b.mu[k - 1] + b.sigma(n - 1) * b.u[k - 1])).cwiseAbs().maxCoeff());
    }
  }
  return verdict(worst <= 1e-12, "max |z[n] - (mu + sigma u)| = " + fmt(worst));
}

PropertyOutcome sde_vp_moments() {
  Rng rng(12);
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const TimeGrid grid = TimeGrid::uniform(1.0, 1000);
  Eigen::RowVector2d start(1.0, -0.5);
  const Eigen::MatrixXd z0 = start.replicate(10000, 1);
  const std::vector<int> steps{100, 300, 1000};
  const auto states = em_states(spec, z0, grid, steps, rng, 1000);
  double worst = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const double m = vp_mean_factor_by_quadrature(spec, grid.t(steps[k]));
    for (Eigen::Index j = 0; j < 2; ++j) {
      const MeanSe s = mean_se(states[k].col(j));
      worst = std::max(worst, std::abs(s.mean - m * start(j)) / s.se);
      worst = std::max(worst, variance_z(states[k].col(j), 1.0 - m * m));
    }
  }
  return verdict(worst <= 3.0, "worst deviation " + fmt(worst) + " SE (limit 3) over 10^4 trajectories");
}

PropertyOutcome sde_langevin_invariance() {
  Rng rng(13);
  const Gmm pi = fixture_gmm();
  const DiffusionSpec spec = DiffusionSpec::langevin(pi, 1.0);
  const Eigen::MatrixXd z0 = gmm_sample(pi, 10000, rng);
  const auto states = em_states(spec, z0, TimeGrid::uniform(1.0, 200), {200}, rng);
  Eigen::VectorXd mean;
  Eigen::MatrixXd second;
  mixture_moments(pi, mean, second);
  const double worst = moment_z(states[0], mean, second);
  return verdict(worst <= 3.0, "moments at T deviate by at most " + fmt(worst) + " SE (limit 3)");
}

PropertyOutcome sde_grid_refinement() {
  Rng rng(14);
  const double horizon = 2.0;
  const DiffusionSpec spec = DiffusionSpec::vp(2.0, 2.0, horizon, 1);
  const Eigen::MatrixXd z0 = Eigen::MatrixXd::Ones(100000, 1);
  const double mean_exact = std::exp(-horizon);
  const double var_exact = 1.0 - std::exp(-2.0 * horizon);
  std::vector<double> log_dt, log_err;
  for (int n : {4, 8, 16, 32}) {
    const auto zt = em_states(spec, z0, TimeGrid::uniform(horizon, n), {n}, rng, 20000)[0];
    const double m = zt.mean();
    const double v = (zt.array() - m).square().mean();
    log_dt.push_back(std::log(horizon / n));
    log_err.push_back(std::log(std::abs(m - mean_exact) + std::abs(v - var_exact)));
  }
  const double xb = std::accumulate(log_dt.begin(), log_dt.end(), 0.0) / 4.0;
  const double yb = std::accumulate(log_err.begin(), log_err.end(), 0.0) / 4.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxy += (log_dt[i] - xb) * (log_err[i] - yb);
    sxx += (log_dt[i] - xb) * (log_dt[i] - xb);
  }
  const double slope = sxy / sxx;
  return verdict(slope >= 0.8, "log-log slope of terminal-moment error vs dt = " + fmt(slope) + " (limit 0.8)");
}

// ---------------------------------------------------------------------------
// reference_gmm

PropertyOutcome gmm_score_fd() {
  Rng rng(21);
  const Gmm g = fixture_gmm();
  const double h = 1e-5;
  double worst = 0.0;
  for (int p = 0; p < 100; ++p) {
    const Eigen::Vector2d z = 2.0 * Eigen::Vector2d(rng.normal(), rng.normal());
    const Eigen::VectorXd s = gmm_score(g, z);
    Eigen::Vector2d fd;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d a = z, b = z;
      a(j) += h;
      b(j) -= h;
      fd(j) = (gmm_log_density(g, a) - gmm_log_density(g, b)) / (2 * h);
    }
    worst = std::max(worst, (s - fd).cwiseAbs().maxCoeff() / std::max({fd.cwiseAbs().maxCoeff(), 1e-3}));
  }
  return verdict(worst < 1e-6, "max relative error vs central differences " + fmt(worst));
}

PropertyOutcome gmm_responsibilities_simplex() {
  Rng rng(22);
  const Gmm g = fixture_gmm();
  double worst = 0.0;
  bool in_range = true;
  for (int p = 0; p < 1000; ++p) {
    const double scale = p % 10 == 0 ? 50.0 : 2.0;
    const Eigen::Vector2d z = scale * Eigen::Vector2d(rng.normal(), rng.normal());
    const Eigen::VectorXd r = gmm_responsibilities(g, z);
    worst = std::max(worst, std::abs(r.sum() - 1.0));
    in_range = in_range && (r.array() >= 0.0).all() && (r.array() <= 1.0).all();
  }
  return verdict(worst <= 1e-12 && in_range, "max |sum - 1| = " + fmt(worst) + (in_range ? "" : "; entry outside [0,1]"));
}

PropertyOutcome gmm_fit_monotone() {
  Rng rng(23);
  const Eigen::MatrixXd data = gmm_sample(fixture_gmm(), 3000, rng);
  const GmmFitResult fit = gmm_fit(data, 3, rng);
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
    worst_drop = std::max(worst_drop, fit.log_likelihood[i - 1] - fit.log_likelihood[i]);
  const bool ok = worst_drop <= 1e-12 * std::abs(fit.log_likelihood.back()) && fit.reseeds == 0;
  return verdict(ok, std::to_string(fit.iterations) + " iterations, largest decrease " + fmt(worst_drop) +
                         ", reseeds " + std::to_string(fit.reseeds));
}

PropertyOutcome gmm_sampling_law() {
  Rng rng(24);
  const Gmm g = fixture_gmm();
  Eigen::VectorXd mean;
  Eigen::MatrixXd second;
  mixture_moments(g, mean, second);
  const double worst = moment_z(gmm_sample(g, 100000, rng), mean, second);
  return verdict(worst <= 4.0, "10^5 samples: worst moment deviation " + fmt(worst) + " SE (limit 4)");
}

// ---------------------------------------------------------------------------
// tensor_autodiff

PropertyOutcome ad_primitives() {
  Rng rng(31);
  const auto g = std::make_shared<const Gmm>(fixture_gmm());
  auto R = [&](Eigen::Index r, Eigen::Index c) { return rng.normal_matrix(r, c); };
  const Eigen::MatrixXd pos = R(4, 3).cwiseAbs().array() + 0.5;
  struct Case {
    std::string name;
    TapeFunction f;
    std::vector<Eigen::MatrixXd> in;
  };
  const std::vector<Case> cases = {
      {"add", [](ad::Tape& t, const auto& v) { return reduce(t, v[0] + v[1], 1); }, {R(4, 3), R(4, 3)}},
      {"sub", [](ad::Tape& t, const auto& v) { return reduce(t, v[0] - v[1], 2); }, {R(4, 3), R(4, 3)}},
      {"mul", [](ad::Tape& t, const auto& v) { return reduce(t, v[0] * v[1], 3); }, {R(4, 3), R(4, 3)}},
      {"neg", [](ad::Tape& t, const auto& v) { return reduce(t, -v[0], 4); }, {R(4, 3)}},
      {"scalar ops", [](ad::Tape& t, const auto& v) { return reduce(t, (v[0] * 1.7 + 0.3) - 2.0, 5); }, {R(4, 3)}},
      {"matmul", [](ad::Tape& t, const auto& v) { return reduce(t, ad::matmul(v[0], v[1]), 6); }, {R(4, 3), R(3, 5)}},
      {"add_row", [](ad::Tape& t, const auto& v) { return reduce(t, ad::add_row(v[0], v[1]), 7); }, {R(4, 3), R(1, 3)}},
      {"scale_rows", [](ad::Tape& t, const auto& v) { return reduce(t, ad::scale_rows(v[0], v[1]), 8); },
       {R(4, 3), R(4, 1)}},
      {"sum/mean", [](ad::Tape&, const auto& v) { return ad::sum(v[0]) * 0.5 + ad::mean(ad::square(v[0])); }, {R(4, 3)}},
      {"row_sum", [](ad::Tape& t, const auto& v) { return reduce(t, ad::row_sum(v[0]), 9); }, {R(4, 3)}},
      {"dot_rows", [](ad::Tape& t, const auto& v) { return reduce(t, ad::dot_rows(v[0], v[1]), 10); },
       {R(4, 3), R(4, 3)}},
      {"square", [](ad::Tape& t, const auto& v) { return reduce(t, ad::square(v[0]), 11); }, {R(4, 3)}},
      {"exp", [](ad::Tape& t, const auto& v) { return reduce(t, ad::exp(v[0]), 12); }, {R(4, 3)}},
      {"log", [](ad::Tape& t, const auto& v) { return reduce(t, ad::log(v[0]), 13); }, {pos}},
      {"swish", [](ad::Tape& t, const auto& v) { return reduce(t, ad::swish(v[0]), 14); }, {R(4, 3)}},
      {"softplus", [](ad::Tape& t, const auto& v) { return reduce(t, ad::softplus(v[0]), 15); }, {R(4, 3)}},
      {"clamp", [](ad::Tape& t, const auto& v) { return reduce(t, ad::clamp(v[0], -0.5, 0.5), 16); },
       {(Eigen::MatrixXd(2, 3) << -1.0, -0.2, 0.1, 0.3, 0.9, -0.4).finished()}},
      {"concat/slice",
       [](ad::Tape& t, const auto& v) { return reduce(t, ad::slice_cols(ad::concat_cols(v[0], v[1]), 1, 3), 17); },
       {R(4, 2), R(4, 3)}},
      {"gather_rows",
       [](ad::Tape& t, const auto& v) { return reduce(t, ad::gather_rows({v[0], v[1]}, {1, 0, 1, 1}), 18); },
       {R(4, 3), R(4, 3)}},
      {"gmm_score", [g](ad::Tape& t, const auto& v) { return reduce(t, ad::gmm_score(g, v[0]), 19); }, {R(5, 2)}},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const double e = check_gradient(c.f, c.in, 1e-5, 0, nullptr, 1.0).max_rel_error;
    if (e > worst) {
      worst = e;
      worst_name = c.name;
    }
  }
  return verdict(worst < 1e-6, std::to_string(cases.size()) + " primitives, worst relative error " + fmt(worst) +
                                   " (" + worst_name + ")");
}

PropertyOutcome ad_whole_loss() {
  double worst = 0.0;
  std::size_t coords = 0;
  for (CeMode mode : {CeMode::LSGM, CeMode::LNDSM}) {
    const LossFixture f = loss_fixture(mode);
    const auto tensors = all_tensors(f);
    const std::size_t ne = 2 * f.vae.encoder.weights.size(), nd = 2 * f.vae.decoder.weights.size();
    const std::vector<std::pair<std::size_t, std::size_t>> groups{{0, ne}, {ne, ne + nd}, {ne + nd, tensors.size()}};
    Rng pick(7);
    for (const auto& [lo, hi] : groups) {
      // Only this group's tensors vary; the rest enter as constants.
      const TapeFunction fn = [&, lo = lo, hi = hi](ad::Tape& tape, const std::vector<ad::Var>& v) {
        std::vector<ad::Var> all;
        for (std::size_t i = 0; i < tensors.size(); ++i)
          all.push_back(i >= lo && i < hi ? v[i - lo] : tape.constant(tensors[i]));
        return total_loss_of(f, all);
      };
      const std::vector<Eigen::MatrixXd> group(tensors.begin() + static_cast<std::ptrdiff_t>(lo),
                                               tensors.begin() + static_cast<std::ptrdiff_t>(hi));
      // Ten coordinates spread over the group's tensors.
      GradientCheck gc;
      for (int c = 0; c < 10; ++c) {
        const auto which = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(group.size()) - 1));
        const TapeFunction single = [&, which](ad::Tape& tape, const std::vector<ad::Var>& v) {
          std::vector<ad::Var> full;
          for (std::size_t i = 0; i < group.size(); ++i) full.push_back(i == which ? v[0] : tape.constant(group[i]));
          return fn(tape, full);
        };
        const auto one = check_gradient(single, {group[which]}, 1e-5, 1, &pick);
        gc.max_rel_error = std::max(gc.max_rel_error, one.max_rel_error);
        gc.coordinates += one.coordinates;
      }
      worst = std::max(worst, gc.max_rel_error);
      coords += gc.coordinates;
    }
  }
  return verdict(worst < 1e-4, std::to_string(coords) + " coordinates over 3 groups x 2 modes, worst relative error " +
                                   fmt(worst));
}

PropertyOutcome ad_replay() {
  const LossFixture f = loss_fixture(CeMode::LNDSM);
  const auto tensors = all_tensors(f);
  auto grads = [&] {
    ad::Tape tape;
    std::vector<ad::Var> v;
    for (const auto& m : tensors) v.push_back(tape.parameter(m));
    tape.backward(total_loss_of(f, v));
    std::vector<Eigen::MatrixXd> g;
    for (const auto& x : v) g.push_back(x.grad());
    return g;
  };
  const auto a = grads(), b = grads();
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i)
    same = same && std::memcmp(a[i].data(), b[i].data(), sizeof(double) * static_cast<std::size_t>(a[i].size())) == 0;
  return verdict(same, same ? "two replays gave bit-identical gradients" : "gradients differ between replays");
}

// ---------------------------------------------------------------------------
// objectives

PropertyOutcome obj_cv_zero_mean() {
  Rng rng(41);
  const DiffusionSpec spec = DiffusionSpec::langevin(fixture_gmm(), 1.5);
  const ScoreFn score = score_fn(random_score_net(2, 1.5, 32, rng));
  const Eigen::MatrixXd z0 = 1.5 * rng.normal_matrix(20000, 2);
  double worst = 0.0;
  for (int steps : {15, 50, 100}) {
    const TimeGrid grid = TimeGrid::uniform(1.5, steps);
    Eigen::VectorXd sc(z0.rows()), dc(z0.rows());
    for (Eigen::Index lo = 0; lo < z0.rows(); lo += 5000) {
      const EmBatch b = em_simulate(spec, z0.middleRows(lo, 5000), grid, rng);
      const LndsmSamples s = lndsm_ce_samples(score, b, spec, rng);
      sc.segment(lo, 5000) = s.score_control;
      dc.segment(lo, 5000) = s.drift_control;
    }
    for (const auto& v : {sc, dc}) {
      const MeanSe m = mean_se(v);
      worst = std::max(worst, std::abs(m.mean) / m.se);
    }
  }
  return verdict(worst <= 4.0, "dt in {0.1, 0.03, 0.015}: worst |mean| = " + fmt(worst) + " SE (limit 4)");
}

PropertyOutcome obj_mean_invariance() {
  Rng rng(42);
  const DiffusionSpec spec = DiffusionSpec::langevin(fixture_gmm(), 1.5);
  const ScoreFn score = score_fn(random_score_net(2, 1.5, 32, rng));
  const TimeGrid grid = TimeGrid::uniform(1.5, 50);
  const Eigen::MatrixXd z0 = 1.5 * rng.normal_matrix(20000, 2);
  Rng a(421), b(422);
  const ProbeResult with = variance_probe(score, spec, grid, true, z0, a);
  const ProbeResult without = variance_probe(score, spec, grid, false, z0, b);
  const double joint = std::sqrt(with.std_error * with.std_error + without.std_error * without.std_error);
  const double z = std::abs(with.mean - without.mean) / joint;
  return verdict(z <= 4.0, "means " + fmt(with.mean) + " vs " + fmt(without.mean) + ": " + fmt(z) +
                               " joint SE (limit 4)");
}

PropertyOutcome obj_marginal_conditional() {
  Rng rng(43);
  const DiffusionSpec spec = DiffusionSpec::vp(2.0, 2.0, 1.0, 2);
  const TimeGrid grid = TimeGrid::uniform(1.0, 50);
  const Eigen::RowVector2d a0(0.5, -1.0);
  const Eigen::MatrixXd z0 = (std::sqrt(0.5) * rng.normal_matrix(20000, 2)).rowwise() + a0;
  Eigen::Matrix2d B;
  B << 1.0, 0.3, -0.2, 0.5;
  const Eigen::RowVector2d c(0.1, 0.2);
  Eigen::VectorXd vals(z0.rows());
  for (Eigen::Index lo = 0; lo < z0.rows(); lo += 5000) {
    const EmBatch b = em_simulate(spec, z0.middleRows(lo, 5000), grid, rng);
    const std::vector<int> steps = draw_step_indices(rng, 5000, grid.steps());
    for (Eigen::Index i = 0; i < 5000; ++i) {
      const int n = steps[static_cast<std::size_t>(i)];
      const Eigen::RowVector2d zn = b.z[static_cast<std::size_t>(n)].row(i);
      const Eigen::RowVector2d h = c + zn * B.transpose();
      vals(lo + i) = -h.dot(b.u[static_cast<std::size_t>(n - 1)].row(i)) / b.sigma(n - 1);
    }
  }
  // E[h . grad log q] = -E[div h] = -tr(B) for any smooth q.
  const double closed = -B.trace();
  const MeanSe m = mean_se(vals);
  const double z = std::abs(m.mean - closed) / m.se;
  return verdict(z <= 4.0, "MC " + fmt(m.mean) + " vs closed form " + fmt(closed) + ": " + fmt(z) + " SE (limit 4)");
}

PropertyOutcome obj_additivity() {
  double worst = 0.0;
  for (CeMode mode : {CeMode::LSGM, CeMode::LNDSM}) {
    const LossFixture f = loss_fixture(mode);
    ad::Tape tape;
    const VaeVars vv = bind_parameters(tape, f.vae);
    const MlpVars sv = bind_parameters(tape, f.net.mlp);
    Rng rng(5);
    const TotalLoss t = vae_total_loss(vv, f.vae, sv, f.net, f.x, f.spec, f.cfg, rng);
    const auto& b = t.breakdown;
    worst = std::max(worst, std::abs(b.total - (b.recon + b.neg_entropy + b.ce)));
    worst = std::max(worst, std::abs(b.total - t.total.scalar()));
    if (mode == CeMode::LNDSM)
      worst = std::max(worst, std::abs(b.ce - (b.ce_terms.sq_norm + b.ce_terms.score_cv - b.ce_terms.drift_cv)));
  }
  return verdict(worst <= 1e-10, "largest additivity gap " + fmt(worst));
}

PropertyOutcome obj_lemma1() {
  const Lemma1Result r = lemma1_oracle(1.0, 0.25, DiffusionSpec::vp(2.0, 2.0, 8.0), 64);
  const double gap = std::abs(r.lhs - r.rhs);
  return verdict(gap < 1e-3, "lhs " + fmt(r.lhs) + ", rhs " + fmt(r.rhs) + ", |gap| " + fmt(gap));
}

std::vector<Eigen::MatrixXd> score_gradient(const ScoreNet& net, const std::function<ad::Var(const MlpVars&, ad::Tape&)>& loss) {
  ad::Tape tape;
  const MlpVars vars = bind_parameters(tape, net.mlp);
  tape.backward(loss(vars, tape));
  return copies(collect_gradients(vars));
}

double cosine(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i].cwiseProduct(b[i]).sum();
    aa += a[i].squaredNorm();
    bb += b[i].squaredNorm();
  }
  return ab / std::sqrt(aa * bb);
}

PropertyOutcome obj_linear_drift_consistency() {
  Rng rng(44);
  const double horizon = 1.0;
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, horizon, 2);
  const ScoreNet net = random_score_net(2, horizon, 16, rng);
  const TimeGrid grid = TimeGrid::uniform(horizon, 100);
  const Eigen::MatrixXd z0 = (0.5 * rng.normal_matrix(20000, 2)).rowwise() + Eigen::RowVector2d(1.0, -0.5);
  Rng a(441), b(442);
  const auto g_lndsm = score_gradient(net, [&](const MlpVars& v, ad::Tape& t) {
    return lndsm_ce_estimate(v, net, t.constant(z0), spec, grid, a).loss;
  });
  DsmOptions opts;
  opts.t_min = grid.t(1);
  const auto g_dsm = score_gradient(net, [&](const MlpVars& v, ad::Tape& t) {
    return dsm_vp_loss(v, net, t.constant(z0), spec, b, opts);
  });
  const double c = cosine(g_lndsm, g_dsm);
  return verdict(c > 0.9, "cosine(grad lndsm, grad dsm) = " + fmt(c) + " at dt = 0.01 (limit 0.9)");
}

// ---------------------------------------------------------------------------
// samplers

PropertyOutcome samplers_affine_exact() {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const Eigen::RowVector2d a0(1.0, -0.5);
  const double s0 = 0.25;
  const ScoreFn score = vp_gaussian_exact_score(spec, a0, s0);
  const auto coeffs = ForwardCoefficients::from(spec);
  double worst_mean = 0.0, worst_var = 0.0;
  for (SamplerMethod m : {SamplerMethod::ReverseSDE, SamplerMethod::ProbabilityFlowODE}) {
    SamplerConfig cfg;
    cfg.method = m;
    cfg.steps = m == SamplerMethod::ReverseSDE ? 1000 : 200;
    cfg.t_end = 0.0;
    const Eigen::MatrixXd zT = draw_terminal(spec, 10000, 2, 51);
    const Eigen::MatrixXd z = m == SamplerMethod::ReverseSDE ? reverse_sde_sample(score, coeffs, zT, cfg, 52)
                                                             : pf_ode_sample(score, coeffs, zT, cfg);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const MeanSe s = mean_se(z.col(j));
      worst_mean = std::max(worst_mean, std::abs(s.mean - a0(j)) / s.se);
      const double var = (z.col(j).array() - s.mean).square().mean();
      worst_var = std::max(worst_var, std::abs(var / s0 - 1.0));
    }
  }
  return verdict(worst_mean <= 4.0 && worst_var <= 0.05,
                 "worst mean deviation " + fmt(worst_mean) + " SE (limit 4), worst variance error " +
                     fmt(100 * worst_var) + "% (limit 5%)");
}

PropertyOutcome samplers_sde_vs_ode() {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const ScoreFn score = vp_gmm_exact_score(spec, fixture_gmm());
  const auto coeffs = ForwardCoefficients::from(spec);
  SamplerConfig sde{SamplerMethod::ReverseSDE, 1000, 0.0}, ode{SamplerMethod::ProbabilityFlowODE, 200, 0.0};
  const Eigen::MatrixXd a = reverse_sde_sample(score, coeffs, draw_terminal(spec, 10000, 2, 53), sde, 54);
  const Eigen::MatrixXd b = pf_ode_sample(score, coeffs, draw_terminal(spec, 10000, 2, 55), ode);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = -1; j < 2; ++j) {
      // j = -1: first moment of coordinate i; otherwise E[z_i z_j].
      const Eigen::VectorXd va = j < 0 ? Eigen::VectorXd(a.col(i)) : Eigen::VectorXd(a.col(i).cwiseProduct(a.col(j)));
      const Eigen::VectorXd vb = j < 0 ? Eigen::VectorXd(b.col(i)) : Eigen::VectorXd(b.col(i).cwiseProduct(b.col(j)));
      const MeanSe ma = mean_se(va), mb = mean_se(vb);
      worst = std::max(worst, std::abs(ma.mean - mb.mean) / std::sqrt(ma.se * ma.se + mb.se * mb.se));
    }
  }
  return verdict(worst <= 4.0, "reverse SDE vs PF-ODE: worst moment gap " + fmt(worst) + " joint SE (limit 4)");
}

// ---------------------------------------------------------------------------
// trainer

std::pair<std::string, std::string> tiny_run(const ExperimentConfig& c, TrainState* final_state = nullptr) {
  const Dataset data = make_dataset(c.data);
  std::string log, evals;
  TrainCallbacks cb;
  cb.on_step = [&](const TrainLogRow& r) { log += train_csv_row(r); };
  cb.on_eval = [&](const EvalRow& r) { evals += eval_csv_row(r); };
  TrainResult r = train(c.train, c.eval, data, initial_state(c.train, data), cb);
  if (final_state) *final_state = std::move(r.state);
  return {log, evals};
}

PropertyOutcome trainer_determinism() {
  const ExperimentConfig c = tiny_config();
  const auto a = tiny_run(c), b = tiny_run(c);
  const bool ok = a == b && !a.first.empty() && !a.second.empty();
  return verdict(ok, ok ? "two single-threaded runs logged identical rows" : "logs differ between identical runs");
}

PropertyOutcome trainer_frozen_vae() {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 1;
  c.train.lr_vae = 0.0;
  const Dataset data = make_dataset(c.data);
  const TrainState before = initial_state(c.train, data);
  const TrainResult r = train(c.train, c.eval, data, before);
  const auto same = [](const MlpParams& a, const MlpParams& b) {
    const auto ta = a.tensors(), tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (std::memcmp(ta[i]->data(), tb[i]->data(), sizeof(double) * static_cast<std::size_t>(ta[i]->size())) != 0)
        return false;
    return true;
  };
  const bool frozen = same(before.vae.encoder, r.state.vae.encoder) && same(before.vae.decoder, r.state.vae.decoder);
  const bool moved = !same(before.score.mlp, r.state.score.mlp);
  return verdict(frozen && moved, std::string(frozen ? "encoder/decoder bit-unchanged" : "VAE moved with lr_vae = 0") +
                                      (moved ? ", score network updated" : ", score network did not move"));
}

PropertyOutcome trainer_checkpoint_roundtrip() {
  ExperimentConfig c = tiny_config();
  c.train.epochs = 1;
  TrainState s;
  tiny_run(c, &s);
  const std::string bytes = checkpoint_encode(s);
  const TrainState back = checkpoint_decode(bytes);
  Rng r1(0), r2(0);
  r1.load(s.rng_state);
  r2.load(back.rng_state);
  const bool ok = checkpoint_encode(back) == bytes && r1.next_u64() == r2.next_u64() && r1.normal() == r2.normal();
  return verdict(ok, std::to_string(bytes.size()) + "-byte checkpoint " + (ok ? "round-trips bit-exactly" : "differs"));
}

// ---------------------------------------------------------------------------
// eval_metrics

PropertyOutcome metrics_mf_kl() {
  Rng rng(61);
  bool ok = true;
  double smallest_positive = 1e300;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd p(4), q(4);
    for (int k = 0; k < 4; ++k) {
      p(k) = -std::log(1.0 - rng.uniform());
      q(k) = -std::log(1.0 - rng.uniform());
    }
    p /= p.sum();
    q /= q.sum();
    const double kl = mode_fraction_kl(p, q);
    ok = ok && kl > 0.0 && mode_fraction_kl(p, p) == 0.0;
    smallest_positive = std::min(smallest_positive, kl);
  }
  return verdict(ok, "100 random pairs: KL > 0 for unequal (min " + fmt(smallest_positive) + "), exactly 0 for equal");
}

PropertyOutcome metrics_sw_pseudometric() {
  Rng rng(62);
  double worst_tri = -1e300, worst_sym = 0.0, worst_self = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd a = rng.normal_matrix(40 + trial, 3);
    const Eigen::MatrixXd b = rng.normal_matrix(55, 3).array() + 0.5;
    const Eigen::MatrixXd c = 2.0 * rng.normal_matrix(31, 3);
    auto sw = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
      Rng proj(7);
      return sliced_wasserstein(x, y, 32, proj);
    };
    worst_tri = std::max(worst_tri, sw(a, c) - sw(a, b) - sw(b, c));
    worst_sym = std::max(worst_sym, std::abs(sw(a, b) - sw(b, a)));
    worst_self = std::max(worst_self, sw(a, a.colwise().reverse()));
  }
  const bool ok = worst_tri <= 1e-9 && worst_sym <= 1e-12 && worst_self == 0.0;
  return verdict(ok, "triangle excess " + fmt(worst_tri) + ", asymmetry " + fmt(worst_sym) + ", self distance " +
                         fmt(worst_self));
}

PropertyOutcome metrics_frechet_self() {
  Rng rng(63);
  const Gmm g = fixture_gmm();
  const Eigen::MatrixXd a = gmm_sample(g, 10000, rng), b = gmm_sample(g, 10000, rng);
  const Eigen::MatrixXd shifted = b.rowwise() + Eigen::RowVector2d(1.0, 0.0);
  const auto features = FixedRandomFeatures::make(2);
  const double self = frechet_surrogate(a, b, features);
  const double shift = frechet_surrogate(a, shifted, features);
  return verdict(self < 0.05 * shift, "self " + fmt(self) + " vs unit shift " + fmt(shift) + " (ratio limit 0.05)");
}

// ---------------------------------------------------------------------------
// cli_app

PropertyOutcome cli_config_roundtrip() {
  ExperimentConfig c = tiny_config();
  c.train.mode = TrainMode::LSGM;
  c.train.lr_vae = 2.5e-5;
  c.train.beta1 = 12.345678901234567;
  c.train.score_param = "plain";
  c.data.weights = {0.6, 0.25, 0.15};
  c.eval.method = SamplerMethod::ProbabilityFlowODE;
  c.eval.t_end = 0.02;
  const std::string text = echo_config(c);
  const ExperimentConfig back = parse_config(text);
  const bool ok = back == c && echo_config(back) == text && back.train.beta1 == c.train.beta1;
  return verdict(ok, ok ? "echoed config re-parses to an equal config" : "round-trip mismatch");
}

PropertyOutcome cli_manifests() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() /
                        ("lndsm_check_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  ExperimentConfig c = tiny_config();
  c.train.epochs = 1;
  std::string missing;
  std::size_t artifacts = 0;
  try {
    make_data_command(c, root);
    train_command(c, root);
    sample_command(c, root);
    eval_command(c, root);
    const RunPaths paths = RunPaths::under(root, c.run.name);
    for (const auto& e : fs::recursive_directory_iterator(paths.dir)) {
      if (!e.is_regular_file()) continue;
      const fs::path p = e.path();
      if (p.extension() == ".manifest") continue;
      const fs::path side = p == paths.manifest ? p : fs::path(p.string() + ".manifest");
      ++artifacts;
      if (!fs::exists(side)) {
        missing += " " + p.filename().string();
        continue;
      }
      const auto kv = read_key_values(side);
      if (!kv.count("seed") || kv.at("seed") != std::to_string(c.train.seed) || !kv.count("build") ||
          kv.at("build") != build_id())
        missing += " " + p.filename().string() + "(fields)";
    }
  } catch (const std::exception& e) {
    fs::remove_all(root);
    return verdict(false, std::string("pipeline failed: ") + e.what());
  }
  fs::remove_all(root);
  return verdict(missing.empty(), std::to_string(artifacts) + " artifacts checked" +
                                      (missing.empty() ? ", all carry seed and build" : "; missing:" + missing));
}

PropertyOutcome cli_coverage() {
  std::map<std::string, int> have;
  for (const auto& c : property_checks()) ++have[c.module];
  std::string gaps;
  for (const auto& [module, need] : documented_invariants())
    if (have[module] < need) gaps += " " + module + "(" + std::to_string(have[module]) + "/" + std::to_string(need) + ")";
  return verdict(gaps.empty(), gaps.empty() ? "every documented invariant has a check" : "under-covered:" + gaps);
}

}  // namespace

const std::vector<std::pair<std::string, int>>& documented_invariants() {
  static const std::vector<std::pair<std::string, int>> table{
      {"sde_core", 4},  {"reference_gmm", 4}, {"tensor_autodiff", 3}, {"objectives", 6},
      {"samplers", 2},  {"trainer", 3},       {"eval_metrics", 3},    {"cli_app", 3}};
  return table;
}

const std::vector<PropertyCheck>& property_checks() {
  static const std::vector<PropertyCheck> checks{
      {"sde_core", "em_reconstruction", sde_reconstruction},
      {"sde_core", "vp_moment_match", sde_vp_moments},
      {"sde_core", "langevin_invariance", sde_langevin_invariance},
      {"sde_core", "grid_refinement_slope", sde_grid_refinement},
      {"reference_gmm", "score_density_consistency", gmm_score_fd},
      {"reference_gmm", "responsibilities_on_simplex", gmm_responsibilities_simplex},
      {"reference_gmm", "fit_loglik_monotone", gmm_fit_monotone},
      {"reference_gmm", "sampling_law", gmm_sampling_law},
      {"tensor_autodiff", "primitive_gradients", ad_primitives},
      {"tensor_autodiff", "whole_loss_gradient", ad_whole_loss},
      {"tensor_autodiff", "replay_determinism", ad_replay},
      {"objectives", "control_variates_zero_mean", obj_cv_zero_mean},
      {"objectives", "estimator_mean_invariance", obj_mean_invariance},
      {"objectives", "marginal_to_conditional", obj_marginal_conditional},
      {"objectives", "breakdown_additivity", obj_additivity},
      {"objectives", "cross_entropy_identity", obj_lemma1},
      {"objectives", "linear_drift_consistency", obj_linear_drift_consistency},
      {"samplers", "exact_affine_score_recovery", samplers_affine_exact},
      {"samplers", "sde_ode_moment_agreement", samplers_sde_vs_ode},
      {"trainer", "determinism", trainer_determinism},
      {"trainer", "per_group_learning_rates", trainer_frozen_vae},
      {"trainer", "checkpoint_roundtrip", trainer_checkpoint_roundtrip},
      {"eval_metrics", "mode_fraction_kl_nonnegative", metrics_mf_kl},
      {"eval_metrics", "sliced_wasserstein_pseudometric", metrics_sw_pseudometric},
      {"eval_metrics", "frechet_self_vs_shift", metrics_frechet_self},
      {"cli_app", "config_roundtrip", cli_config_roundtrip},
      {"cli_app", "artifact_manifests", cli_manifests},
      {"cli_app", "suite_coverage", cli_coverage},
  };
  return checks;
}

bool SuiteReport::passed() const {
  if (stopped_early) return false;
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

std::string SuiteReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  j["stopped_early"] = stopped_early;
  j["build"] = build_id();
  auto& arr = j["results"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json coverage = nlohmann::ordered_json::object();
  for (const auto& r : results) {
    arr.push_back({{"module", r.module}, {"property", r.name}, {"passed", r.passed}, {"detail", r.detail},
                   {"seconds", r.seconds}});
    coverage[r.module].push_back(r.name);
  }
  j["coverage"] = coverage;
  return j.dump(2) + "\n";
}

SuiteReport run_property_suite(const std::string& module, bool stop_on_failure) {
  SuiteReport report;
  bool known = module.empty();
  for (const auto& c : property_checks()) {
    if (!module.empty() && c.module != module) continue;
    known = true;
    PropertyResult r{c.module, c.name, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const PropertyOutcome o = c.run();
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.results.push_back(r);
    if (!r.passed && stop_on_failure) {
      report.stopped_early = true;
      break;
    }
  }
  if (!known) throw ConfigError("unknown module '" + module + "'");
  return report;
}

GradientCheck check_gradient(const TapeFunction& f, const std::vector<Eigen::MatrixXd>& inputs, double eps,
                             int coords_per_input, Rng* rng, double floor) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.parameter(m));
  const ad::Var out = f(tape, vars);
  tape.backward(out);
  std::vector<Eigen::MatrixXd> grads;
  for (const auto& v : vars) grads.push_back(v.grad());

  auto eval = [&](const std::vector<Eigen::MatrixXd>& in) {
    ad::Tape t;
    std::vector<ad::Var> v;
    for (const auto& m : in) v.push_back(t.parameter(m));
    return f(t, v).scalar();
  };

  GradientCheck gc;
  std::vector<Eigen::MatrixXd> work = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<Eigen::Index> entries;
    if (coords_per_input <= 0) {
      for (Eigen::Index i = 0; i < inputs[k].size(); ++i) entries.push_back(i);
    } else {
      if (!rng) throw ConfigError("check_gradient: sampling coordinates needs an rng");
      for (int c = 0; c < coords_per_input; ++c) entries.push_back(rng->uniform_int(0, inputs[k].size() - 1));
    }
    for (Eigen::Index i : entries) {
      const double x = work[k](i);
      work[k](i) = x + eps;
      const double up = eval(work);
      work[k](i) = x - eps;
      const double down = eval(work);
      work[k](i) = x;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grads[k](i);
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      gc.max_rel_error = std::max(gc.max_rel_error, rel);
      ++gc.coordinates;
    }
  }
  return gc;
}

}  // namespace lndsm
