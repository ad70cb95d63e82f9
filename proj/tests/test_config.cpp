#include "lndsm/config.hpp"

#include <doctest.h>

#include <set>

using namespace lndsm;

TEST_CASE("defaults echo and parse back") {
  const ExperimentConfig d;
  const std::string text = echo_config(d);
  CHECK(parse_config(text) == d);
  CHECK(echo_config(parse_config(text)) == text);
  validate_config(d);
}

TEST_CASE("every key survives a round trip") {
  const std::string text = R"(# a comment
[run]
name = demo
seed = 9
[data]
kind = rings2d
weights = 0.25, 0.25, 0.5
[train]
mode = lsgm
lr_vae = 0.001
horizon = 1.0
score_param = plain
log_wall_time = true
[gmm]
components = 4
[sampler]
method = pf_ode
t_end = 0.02
n = 500
[eval]
n_samples = 300
)";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.run.name == "demo");
  CHECK(c.train.seed == 9);
  CHECK(c.data.kind == DatasetKind::Rings2D);
  CHECK(c.data.weights == std::vector<double>{0.25, 0.25, 0.5});
  CHECK(c.train.mode == TrainMode::LSGM);
  CHECK(c.train.lr_vae == 0.001);
  CHECK(c.train.score_param == "plain");
  CHECK(c.train.log_wall_time);
  CHECK(c.train.gmm_components == 4);
  CHECK(c.eval.method == SamplerMethod::ProbabilityFlowODE);
  CHECK(c.eval.t_end == 0.02);
  CHECK(c.sample_n == 500);
  CHECK(c.eval.n_samples == 300);
  CHECK(parse_config(echo_config(c)) == c);
  CHECK(echo_config(c).find("[gmm]") != std::string::npos);
}

TEST_CASE("unknown or malformed input is rejected") {
  CHECK_THROWS_AS(parse_config("[nope]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nepochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nmode = fancy\n"), ConfigError);
  ExperimentConfig c;
  c.train.epochs = 0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  apply_override(c, "train.epochs=7");
  CHECK(c.train.epochs == 7);
  apply_override(c, "batch_size = 12");
  CHECK(c.train.batch_size == 12);
  // "seed" lives in [run]; "components" in [data] and [gmm]
  CHECK_THROWS_AS(apply_override(c, "components=5"), ConfigError);
  apply_override(c, "components=5", {"gmm"});
  CHECK(c.train.gmm_components == 5);
  CHECK(c.data.components == 3);
  apply_override(c, "steps=40", {"sampler"});
  CHECK(c.eval.sampler_steps == 40);
  CHECK_THROWS_AS(apply_override(c, "epochs"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.unknown=1"), ConfigError);
}

TEST_CASE("key list is complete") {
  const auto keys = config_keys();
  CHECK(std::find(keys.begin(), keys.end(), "train.score_param") != keys.end());
  CHECK(std::find(keys.begin(), keys.end(), "sampler.n") != keys.end());
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
}
