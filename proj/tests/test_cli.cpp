#include "lndsm/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "lndsm_test_cli";

const char* kConfig = R"([run]
name = smoke
[data]
n_train = 240
[train]
epochs = 2
batch_size = 30
pretrain_epochs = 2
vae_hidden = 16
score_hidden = 16
steps = 10
[sampler]
method = pf_ode
steps = 200
n = 10000
[eval]
n_samples = 200
projections = 16
features = 16
)";

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args) {
  const fs::path log = kRoot / "last_output.txt";
  fs::create_directories(kRoot);
  const std::string cmd = std::string(LNDSM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, lndsm::read_file(log)};
}

std::string with_config(const std::string& sub, const std::string& extra = "") {
  return sub + " -c " + (kRoot / "smoke.cfg").string() + " -o " + kRoot.string() + " " + extra;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("--help").code == 0);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("make-data -o " + kRoot.string() + " train.bogus=1").code == 1);
  CHECK(cli("make-data -o " + kRoot.string() + " epochs=0").code == 1);
  CHECK(cli("check --module nope").code == 1);
}

TEST_CASE("data errors exit with 2") {
  const Run r = cli("pretrain -o " + kRoot.string() + " run.data_path=" + (kRoot / "missing.csv").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("data error") != std::string::npos);
  CHECK(cli("inspect --checkpoint " + (kRoot / "missing.ckpt").string()).code == 2);
}

TEST_CASE("end-to-end pipeline") {
  fs::remove_all(kRoot / "smoke");
  lndsm::write_file(kRoot / "smoke.cfg", kConfig);
  const fs::path run = kRoot / "smoke";

  CHECK(cli(with_config("make-data")).code == 0);
  CHECK(fs::exists(run / "data" / "data.csv"));
  CHECK(fs::exists(run / "data" / "data.csv.manifest"));

  CHECK(cli(with_config("pretrain")).code == 0);
  CHECK(fs::exists(run / "checkpoints" / "pretrained.ckpt"));
  CHECK(fs::exists(run / "pretrain.csv"));

  const Run t = cli(with_config("train", "--threads 1"));
  CHECK(t.code == 0);
  CHECK(t.out.find("trained 2 epochs") != std::string::npos);
  CHECK(fs::exists(run / "checkpoints" / "latest.ckpt"));
  CHECK(fs::exists(run / "config.echo"));
  const std::string train_log = lndsm::read_file(run / "train.csv");
  CHECK(train_log.rfind("epoch,step,mode", 0) == 0);

  const Run s = cli(with_config("sample"));
  REQUIRE(s.code == 0);
  const fs::path samples = run / "samples" / "pf_ode_n10000.csv";
  const auto table = lndsm::parse_csv(lndsm::read_file(samples));
  CHECK(table.rows() == 10000);
  CHECK(table.cols() == 2);
  CHECK(table.allFinite());
  const auto prov = nlohmann::json::parse(lndsm::read_file(run / "samples" / "pf_ode_n10000.json"));
  CHECK(prov.at("sampler") == "pf_ode");
  CHECK(prov.at("steps") == 200);
  CHECK(prov.at("n") == 10000);
  CHECK(prov.at("seed") == 1);
  CHECK(prov.at("checkpoint_crc32").get<std::string>().size() == 8);
  CHECK(prov.at("build") == lndsm::build_id());
  const auto manifest = lndsm::read_key_values(fs::path(samples.string() + ".manifest"));
  CHECK(manifest.at("seed") == "1");

  const Run e = cli(with_config("eval"));
  CHECK(e.code == 0);
  CHECK(e.out.rfind("epoch,mode,mf_kl", 0) == 0);

  const Run i = cli(with_config("inspect"));
  CHECK(i.code == 0);
  CHECK(!i.out.empty());

  CHECK(cli(with_config("train", "--resume epochs=3")).code == 0);
  CHECK(lndsm::read_file(run / "train.csv").size() > train_log.size());

  // a checkpoint from this run does not fit a different latent size
  const Run bad = cli(with_config("sample", "latent_dim=3"));
  CHECK(bad.code == 2);
}

TEST_CASE("check writes a passing JSON report") {
  const fs::path report = kRoot / "report.json";
  const Run r = cli("check --module sde_core --report " + report.string());
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(lndsm::read_file(report));
  CHECK(j.dump().find("sde_core") != std::string::npos);
}
