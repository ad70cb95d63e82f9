#include "lndsm/adam.hpp"
#include "lndsm/checkpoint.hpp"
#include "lndsm/trainer.hpp"

#include <doctest.h>

#include <cmath>

using namespace lndsm;

namespace {

TrainConfig tiny() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 30;
  c.pretrain_epochs = 2;
  c.vae_hidden = 16;
  c.score_hidden = 16;
  c.steps = 10;
  return c;
}

EvalConfig tiny_eval() {
  EvalConfig e;
  e.n_samples = 200;
  e.sampler_steps = 20;
  e.projections = 16;
  e.features = 16;
  return e;
}

Dataset tiny_data() {
  DatasetConfig d;
  d.n_train = 240;
  return make_dataset(d);
}

std::vector<std::string> logged(const TrainConfig& cfg, const Dataset& data, TrainState s, TrainState* out = nullptr) {
  std::vector<std::string> rows;
  TrainCallbacks cb;
  cb.on_step = [&](const TrainLogRow& r) { rows.push_back(train_csv_row(r)); };
  cb.on_eval = [&](const EvalRow& r) { rows.push_back(eval_csv_row(r)); };
  TrainResult r = train(cfg, tiny_eval(), data, std::move(s), cb);
  if (out) *out = std::move(r.state);
  return rows;
}

}  // namespace

TEST_CASE("Adam first steps against the closed form") {
  Eigen::MatrixXd p(1, 2);
  p << 1.0, -2.0;
  AdamGroup g = AdamGroup::zeros_like("p", {&p});
  Eigen::MatrixXd grad(1, 2);
  grad << 0.5, -4.0;
  adam_step(g, {&p}, {grad}, 0.1);
  // bias-corrected moments equal g and g^2 after any number of identical gradients
  CHECK(p(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p(0, 1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)));
  adam_step(g, {&p}, {grad}, 0.1);
  CHECK(p(0, 0) == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(g.step == 2);
  CHECK(g.m[0](0, 1) == doctest::Approx(-4.0 * (1 - 0.81)));

  Eigen::MatrixXd bad = grad;
  bad(0, 0) = std::nan("");
  const Eigen::MatrixXd before = p;
  CHECK_THROWS_AS(adam_step(g, {&p}, {bad}, 0.1), NumericalError);
  CHECK(p == before);
  CHECK(g.step == 2);
}

TEST_CASE("global norm clipping") {
  std::vector<Eigen::MatrixXd> a{Eigen::MatrixXd::Constant(1, 1, 3.0)}, b{Eigen::MatrixXd::Constant(1, 1, 4.0)};
  CHECK(global_norm({&a, &b}) == doctest::Approx(5.0));
  CHECK(clip_global_norm({&a, &b}, 1.0) == doctest::Approx(5.0));
  CHECK(a[0](0, 0) == doctest::Approx(0.6));
  CHECK(b[0](0, 0) == doctest::Approx(0.8));
  CHECK(clip_global_norm({&a, &b}, 10.0) == doctest::Approx(1.0));
  CHECK(a[0](0, 0) == doctest::Approx(0.6));
}

TEST_CASE("configuration defaults per mode") {
  TrainConfig c;
  CHECK(c.effective_lr_vae() == kLrVaeLndsm);
  CHECK(c.effective_horizon() == 1.5);
  c.mode = TrainMode::LSGM;
  CHECK(c.effective_lr_vae() == kLrVaeLsgm);
  CHECK(c.effective_horizon() == 1.0);
  c.score_param = "other";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(train_mode_from(to_string(TrainMode::NDSMAmbient)) == TrainMode::NDSMAmbient);
  CHECK(eval_seed(1, 3) != eval_seed(1, 4));
}

TEST_CASE("checkpoint round trip and corruption") {
  const Dataset data = tiny_data();
  const TrainState s = initial_state(tiny(), data);
  REQUIRE(s.reference.has_value());
  CHECK(s.score.base == ScoreBase::Reference);
  const std::string bytes = checkpoint_encode(s);
  const TrainState back = checkpoint_decode(bytes);
  CHECK(bit_equal(s, back));
  CHECK(back.score.reference != nullptr);
  CHECK(checkpoint_encode(back) == bytes);

  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(checkpoint_decode(flipped), DataError);
  CHECK_THROWS_AS(checkpoint_decode(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(checkpoint_decode("LNDS"), DataError);
}

TEST_CASE("training is deterministic and resumable") {
  const Dataset data = tiny_data();
  const TrainConfig cfg = tiny();
  const TrainState init = initial_state(cfg, data);
  TrainState full;
  const auto a = logged(cfg, data, init, &full);
  CHECK(a == logged(cfg, data, init));
  CHECK(full.epoch == 2);
  CHECK(full.step == 2 * (240 / 30));

  TrainConfig one = cfg;
  one.epochs = 1;
  TrainState half;
  auto rows = logged(one, data, init, &half);
  const TrainState restored = checkpoint_decode(checkpoint_encode(half));
  TrainState resumed;
  // the first leg's end-of-run evaluation is not part of the continuous log
  rows.pop_back();
  const auto rest = logged(cfg, data, restored, &resumed);
  rows.insert(rows.end(), rest.begin(), rest.end());
  CHECK(rows == a);
  CHECK(bit_equal(resumed, full));
}

TEST_CASE("frozen VAE and budget cap") {
  const Dataset data = tiny_data();
  TrainConfig cfg = tiny();
  cfg.epochs = 1;
  cfg.lr_vae = 0.0;
  const TrainState init = initial_state(cfg, data);
  const TrainResult r = train(cfg, tiny_eval(), data, init);
  CHECK(r.state.vae.encoder.weights[0] == init.vae.encoder.weights[0]);
  CHECK(r.state.score.mlp.weights.back() != init.score.mlp.weights.back());

  cfg.epochs = 1000;
  cfg.budget_seconds = 1e-3;
  const TrainResult capped = train(cfg, tiny_eval(), data, init);
  CHECK(capped.budget_exhausted);
  CHECK(capped.epochs_completed < 1000);
}

TEST_CASE("every mode trains to finite losses") {
  const Dataset data = tiny_data();
  for (TrainMode m : {TrainMode::LSGM, TrainMode::LNDSM, TrainMode::NDSMAmbient}) {
    for (const char* param : {"mixed", "plain"}) {
      TrainConfig cfg = tiny();
      cfg.mode = m;
      cfg.epochs = 1;
      cfg.score_param = param;
      const TrainResult r = train(cfg, tiny_eval(), data, initial_state(cfg, data));
      REQUIRE(r.evals.size() == 1);
      CHECK(std::isfinite(r.evals[0].sw));
      CHECK(r.evals[0].mf_kl >= 0.0);
    }
  }
}

TEST_CASE("csv rows") {
  TrainLogRow r;
  r.epoch = 3;
  r.step = 7;
  r.loss.total = 1.5;
  const std::string row = train_csv_row(r), head = train_csv_header();
  const std::string erow = eval_csv_row(EvalRow{}), ehead = eval_csv_header();
  CHECK(row.back() == '\n');
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(head.begin(), head.end(), ','));
  CHECK(std::count(erow.begin(), erow.end(), ',') == std::count(ehead.begin(), ehead.end(), ','));
  CHECK(row.rfind("3,7,", 0) == 0);
}
