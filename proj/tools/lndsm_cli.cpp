// Command-line front end: lndsm <subcommand> [options] [key=value ...]

#include "lndsm/app.hpp"
#include "lndsm/config.hpp"
#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"
#include "lndsm/property_suite.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3, kCheckFailed = 4 };

struct Common {
  std::string config_path;
  std::string output_root;
  int threads = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "experiment config (key = value sections)");
  cmd->add_option("-o,--output-root", c.output_root, "root for run directories (default $LNDSM_OUTPUT_ROOT or ./runs)");
  cmd->add_option("-t,--threads", c.threads, "worker threads; 1 is serial and bit-exact");
  cmd->add_option("overrides", c.overrides, "key=value or section.key=value overrides");
}

lndsm::ExperimentConfig load_config(const Common& c, const std::vector<std::string>& preferred) {
  lndsm::ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = lndsm::parse_config(lndsm::read_file(c.config_path), c.config_path);
  for (const auto& o : c.overrides) lndsm::apply_override(cfg, o, preferred);
  if (c.threads > 0) cfg.train.threads = c.threads;
  lndsm::validate_config(cfg);
  return cfg;
}

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent score models with a nonlinear (Langevin-to-GMM) forward process"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, module, report_path;
  bool resume = false;

  auto* make_data = app.add_subcommand("make-data", "synthesise a dataset into the run directory");
  auto* pretrain = app.add_subcommand("pretrain", "pretrain the VAE (and fit the reference GMM)");
  auto* train = app.add_subcommand("train", "joint training with per-epoch checkpoints");
  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  auto* eval = app.add_subcommand("eval", "append sample-quality metrics to eval.csv");
  auto* check = app.add_subcommand("check", "run the property suites");
  auto* inspect = app.add_subcommand("inspect", "summarise a checkpoint");
  for (auto* cmd : {make_data, pretrain, train, sample, eval, inspect}) add_common(cmd, common);
  train->add_flag("--resume", resume, "continue from checkpoints/latest.ckpt");
  for (auto* cmd : {sample, eval, inspect}) cmd->add_option("--checkpoint", checkpoint, "checkpoint file");
  check->add_option("--module", module, "only this module's suite");
  check->add_option("--report", report_path, "also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed()) {
      const lndsm::SuiteReport report = lndsm::run_property_suite(module, true);
      const std::string json = report.to_json();
      std::cout << json;
      if (!report_path.empty()) lndsm::write_file(report_path, json);
      return report.passed() ? kOk : kCheckFailed;
    }
    if (make_data->parsed()) {
      const auto cfg = load_config(common, {"data"});
      const auto r = lndsm::make_data_command(cfg, lndsm::output_root(common.output_root));
      std::cout << "wrote " << r.rows << " rows to " << r.data_file.string() << "\n";
    } else if (pretrain->parsed()) {
      const auto cfg = load_config(common, {"train"});
      std::cout << "wrote " << lndsm::pretrain_command(cfg, lndsm::output_root(common.output_root)).string() << "\n";
    } else if (train->parsed()) {
      const auto cfg = load_config(common, {"train"});
      const auto r = lndsm::train_command(cfg, lndsm::output_root(common.output_root), resume);
      std::cout << "trained " << r.epochs_completed << " epochs in " << r.seconds << " s"
                << (r.budget_exhausted ? " (wall-clock budget reached)" : "") << "; checkpoint "
                << r.checkpoint.string() << "\n";
    } else if (sample->parsed()) {
      const auto cfg = load_config(common, {"sampler", "eval"});
      const auto r = lndsm::sample_command(cfg, lndsm::output_root(common.output_root), optional_path(checkpoint));
      std::cout << "wrote " << r.rows << " samples to " << r.samples.string() << " (provenance "
                << r.provenance.string() << ")\n";
    } else if (eval->parsed()) {
      const auto cfg = load_config(common, {"eval", "sampler"});
      std::cout << lndsm::eval_csv_header()
                << lndsm::eval_command(cfg, lndsm::output_root(common.output_root), optional_path(checkpoint));
    } else if (inspect->parsed()) {
      std::filesystem::path path = checkpoint;
      if (path.empty()) {
        const auto cfg = load_config(common, {});
        path = lndsm::RunPaths::under(lndsm::output_root(common.output_root), cfg.run.name).latest();
      }
      std::cout << lndsm::inspect_checkpoint(path);
    }
  } catch (const lndsm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const lndsm::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kData;
  } catch (const lndsm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const lndsm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
