// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
//   lndsm_acceptance            all criteria
//   lndsm_acceptance 2 6        a subset

#include "lndsm/app.hpp"
#include "lndsm/checkpoint.hpp"
#include "lndsm/io.hpp"
#include "lndsm/objectives.hpp"
#include "lndsm/property_suite.hpp"
#include "lndsm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace lndsm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const Eigen::VectorXd& v) {
  const double m = v.mean();
  const double var = (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

double sample_variance(const Eigen::VectorXd& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

ScoreFn affine(double theta) {
  return [theta](const Eigen::MatrixXd& z, const Eigen::VectorXd&) { return Eigen::MatrixXd(-theta * z); };
}

Outcome registered(const std::vector<std::string>& names) {
  Outcome o{true, ""};
  for (const auto& name : names) {
    const auto& checks = property_checks();
    const auto it = std::find_if(checks.begin(), checks.end(), [&](const PropertyCheck& c) { return c.name == name; });
    if (it == checks.end()) return {false, "no check named " + name};
    const PropertyOutcome r = it->run();
    o.passed = o.passed && r.passed;
    o.detail += (o.detail.empty() ? "" : "; ") + name + ": " + r.detail;
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome lemma1() {
  const auto t0 = Clock::now();
  const Lemma1Result r = lemma1_oracle(1.0, 0.25, DiffusionSpec::vp(2.0, 2.0, 8.0), 64);
  const double gap = std::abs(r.lhs - r.rhs);
  const double secs = seconds_since(t0);
  return {gap < 1e-3 && secs < 10.0, "LHS " + fmt(r.lhs, 10) + ", RHS " + fmt(r.rhs, 10) + ", |gap| " + fmt(gap) +
                                         " (limit 1e-3), " + fmt(secs, 3) + " s (limit 10)"};
}

// CE(theta) - CE(1) from the EM estimator against the same difference from
// closed-kernel DSM; the theta-independent parts cancel in the difference.
Outcome linear_drift() {
  const auto t0 = Clock::now();
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const int nf = 1000;
  const Eigen::Index m = 100000, chunk = 2000;
  const TimeGrid grid = TimeGrid::uniform(1.0, nf);
  const Eigen::RowVector2d a0(1.0, -0.5);
  const std::vector<double> thetas{0.5, 1.0, 1.5};
  Rng rng(5);
  std::vector<Eigen::VectorXd> em(3, Eigen::VectorXd(m));
  const Eigen::MatrixXd z0 = (0.5 * rng.normal_matrix(m, 2)).rowwise() + a0;
  for (Eigen::Index lo = 0; lo < m; lo += chunk) {
    const EmBatch b = em_simulate(spec, z0.middleRows(lo, chunk), grid, rng);
    const auto steps = draw_step_indices(rng, chunk, nf);
    for (std::size_t k = 0; k < 3; ++k)
      em[k].segment(lo, chunk) = lndsm_ce_samples(affine(thetas[k]), b, spec, steps).with_control_variates();
  }
  const Eigen::MatrixXd z1 = (0.5 * rng.normal_matrix(m, 2)).rowwise() + a0;
  std::vector<Eigen::VectorXd> dsm(3);
  for (std::size_t k = 0; k < 3; ++k) {
    Rng r(77);
    dsm[k] = dsm_vp_samples_on_grid(affine(thetas[k]), z1, spec, grid, r);
  }
  double worst = 0.0;
  std::string detail;
  for (std::size_t k : {0u, 2u}) {
    const MeanSe a = mean_se(em[k] - em[1]), b = mean_se(dsm[k] - dsm[1]);
    const double z = std::abs(a.mean - b.mean) / std::hypot(a.se, b.se);
    worst = std::max(worst, z);
    detail += "theta " + fmt(thetas[k]) + ": EM " + fmt(a.mean, 6) + " vs DSM " + fmt(b.mean, 6) + " (" + fmt(z, 3) +
              " SE); ";
  }
  const double secs = seconds_since(t0);
  return {worst <= 4.0 && secs < 60.0,
          detail + "M = 1e5, n_f = 1000, limit 4 SE, " + fmt(secs, 3) + " s (limit 60)"};
}

Gmm isotropic_fixture(double v) {
  Eigen::VectorXd w(3);
  w << 0.5, 0.3, 0.2;
  Eigen::MatrixXd mu(3, 2);
  mu << -2.0, 0.0, 2.0, 1.0, 0.0, -2.5;
  return Gmm(w, mu * std::sqrt(v / 0.3), Eigen::MatrixXd::Constant(3, 2, v));
}

struct CvRun {
  Eigen::VectorXd with_cv, without_cv, score_control, drift_control;
};

CvRun cv_samples(const Gmm& reference, int nf, std::uint64_t seed) {
  const double horizon = 1.5;
  const DiffusionSpec spec = DiffusionSpec::langevin(reference, horizon);
  Rng init(3);
  ScoreNet net = ScoreNet::init(2, horizon, 32, 2, init);
  net.mlp.weights.back() = 0.3 * init.normal_matrix(net.mlp.weights.back().rows(), 2);
  const ScoreFn score = score_fn(net);
  const Eigen::Index m = 20000, chunk = 2000;
  Rng rng(seed);
  const Eigen::MatrixXd z0 = gmm_sample(reference, m, rng);
  CvRun out{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index lo = 0; lo < m; lo += chunk) {
    const EmBatch b = em_simulate(spec, z0.middleRows(lo, chunk), TimeGrid::uniform(horizon, nf), rng);
    const LndsmSamples s = lndsm_ce_samples(score, b, spec, rng);
    out.with_cv.segment(lo, chunk) = s.with_control_variates();
    out.without_cv.segment(lo, chunk) = s.without_control_variates();
    out.score_control.segment(lo, chunk) = s.score_control;
    out.drift_control.segment(lo, chunk) = s.drift_control;
  }
  return out;
}

Outcome control_variates() {
  const Gmm reference = isotropic_fixture(1.0);
  const std::vector<int> nfs{15, 50, 100};  // dt = 0.1, 0.03, 0.015 on [0, 1.5]
  double worst = 0.0, ratio = 0.0;
  std::vector<double> log_inv_dt, log_var;
  std::string detail;
  for (int nf : nfs) {
    const CvRun r = cv_samples(reference, nf, 40 + static_cast<std::uint64_t>(nf));
    for (const auto* v : {&r.score_control, &r.drift_control}) {
      const MeanSe s = mean_se(*v);
      worst = std::max(worst, std::abs(s.mean) / s.se);
    }
    const double vw = sample_variance(r.with_cv), vo = sample_variance(r.without_cv);
    log_inv_dt.push_back(std::log(nf / 1.5));
    log_var.push_back(std::log(vo));
    ratio = vo / vw;
    detail += "dt " + fmt(1.5 / nf, 2) + ": var " + fmt(vo) + " -> " + fmt(vw) + "; ";
  }
  const double xb = (log_inv_dt[0] + log_inv_dt[1] + log_inv_dt[2]) / 3.0;
  const double yb = (log_var[0] + log_var[1] + log_var[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    sxy += (log_inv_dt[i] - xb) * (log_var[i] - yb);
    sxx += (log_inv_dt[i] - xb) * (log_inv_dt[i] - xb);
  }
  const double slope = sxy / sxx;
  const CvRun tight = cv_samples(isotropic_fixture(0.3), 100, 140);
  const double tight_ratio = sample_variance(tight.without_cv) / sample_variance(tight.with_cv);
  return {worst <= 4.0 && ratio > 10.0 && slope >= 0.8,
          detail + "control-variate means within " + fmt(worst, 3) + " SE of 0 (limit 4); ratio at dt 0.015 " +
              fmt(ratio, 3) + " (limit > 10); slope " + fmt(slope, 3) +
              " (limit >= 0.8); unit-variance reference, 2e4 draws; context: ratio " + fmt(tight_ratio, 3) +
              " with component variance 0.3"};
}

Outcome gradients() { return registered({"whole_loss_gradient"}); }

Outcome kernels() { return registered({"vp_moment_match", "langevin_invariance", "exact_affine_score_recovery"}); }

Outcome end_to_end() {
  const auto t0 = Clock::now();
  DatasetConfig dc;
  const Dataset data = make_dataset(dc);
  EvalConfig ec;
  ec.n_samples = 10000;

  TrainConfig lndsm;
  lndsm.mode = TrainMode::LNDSM;
  const TrainState s1 = initial_state(lndsm, data);
  const auto t1 = Clock::now();
  const TrainResult a = train(lndsm, ec, data, s1);
  const double budget = seconds_since(t1);

  TrainConfig lsgm;
  lsgm.mode = TrainMode::LSGM;
  lsgm.epochs = 100000;
  lsgm.budget_seconds = budget;
  const TrainResult b = train(lsgm, ec, data, initial_state(lsgm, data));

  const double kl_a = a.evals.back().mf_kl, kl_b = b.evals.back().mf_kl;
  const double secs = seconds_since(t0);
  return {kl_a <= kl_b && kl_a < 0.05 && secs < 900.0,
          "LNDSM mf_kl " + fmt(kl_a) + " after " + std::to_string(a.epochs_completed) + " epochs; LSGM mf_kl " +
              fmt(kl_b) + " after " + std::to_string(b.epochs_completed) + " epochs in the same " + fmt(budget, 3) +
              " s; limits: LNDSM <= LSGM and LNDSM < 0.05; total " + fmt(secs, 3) + " s (limit 900)"};
}

Outcome context_only() {
  return {true,
          "published image-scale FID/IS and figure KLs are not reproduced at this scale; criteria 1-6 stand in, "
          "with the feature-space Frechet and responsibility-based IS surrogates reported in eval.csv"};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "lndsm_acceptance_c8";
  fs::remove_all(root);
  ExperimentConfig c;
  c.data.n_train = 600;
  c.train.epochs = 2;
  c.train.pretrain_epochs = 3;
  c.train.eval_every = 1;
  c.train.threads = 1;
  c.eval.n_samples = 1000;
  auto run = [&](const std::string& name) {
    ExperimentConfig x = c;
    x.run.name = name;
    train_command(x, root);
    const RunPaths p = RunPaths::under(root, name);
    return std::make_pair(read_file(p.train_csv), read_file(p.eval_csv));
  };
  const auto a = run("a"), b = run("b");
  const bool identical = a == b;

  const RunPaths pa = RunPaths::under(root, "a");
  const TrainState s = checkpoint_load(pa.latest());
  const fs::path copy = root / "copy.ckpt";
  checkpoint_save(copy, s);
  const bool roundtrip = bit_equal(s, checkpoint_load(copy)) && read_file(copy) == read_file(pa.latest());

  ExperimentConfig r = c;
  r.run.name = "resumed";
  r.train.epochs = 1;
  train_command(r, root);
  r.train.epochs = 2;
  train_command(r, root, true);
  const RunPaths pr = RunPaths::under(root, "resumed");
  const bool resumed = read_file(pr.train_csv) == a.first && read_file(pr.eval_csv) == a.second &&
                       bit_equal(checkpoint_load(pr.latest()), s);
  fs::remove_all(root);
  return {identical && roundtrip && resumed,
          std::string("train.csv/eval.csv byte-identical across runs: ") + (identical ? "yes" : "no") +
              "; checkpoint round trip bit-exact: " + (roundtrip ? "yes" : "no") +
              "; 1+1 epochs resumed equals 2 epochs (logs and state): " + (resumed ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"cross-entropy identity (1D OU)", lemma1},
      {"linear-drift equivalence with DSM", linear_drift},
      {"control variates", control_variates},
      {"whole-loss gradients", gradients},
      {"SDE kernels and samplers", kernels},
      {"end-to-end mode coverage vs LSGM", end_to_end},
      {"published image metrics (context only)", context_only},
      {"determinism and persistence", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.passed;
    std::cout << "criterion " << id << " " << (o.passed ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
              << o.detail << " (" << fmt(seconds_since(t0), 3) << " s)" << std::endl;
  }
  return all ? 0 : 1;
}
