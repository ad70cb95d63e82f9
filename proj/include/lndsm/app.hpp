#pragma once

#include "lndsm/checkpoint.hpp"
#include "lndsm/config.hpp"
#include "lndsm/datasets.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace lndsm {

/// runs/<name>/{config.echo, data/, train.csv, eval.csv, pretrain.csv, samples/, checkpoints/, manifest}
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config_echo;
  std::filesystem::path data_dir;
  std::filesystem::path train_csv;
  std::filesystem::path eval_csv;
  std::filesystem::path pretrain_csv;
  std::filesystem::path samples_dir;
  std::filesystem::path checkpoints_dir;
  std::filesystem::path manifest;

  static RunPaths under(const std::filesystem::path& root, const std::string& name);
  std::filesystem::path pretrained() const { return checkpoints_dir / "pretrained.ckpt"; }
  std::filesystem::path latest() const { return checkpoints_dir / "latest.ckpt"; }
  std::filesystem::path epoch_checkpoint(std::int64_t epoch) const;
};

inline constexpr const char* kOutputRootEnv = "LNDSM_OUTPUT_ROOT";

/// Explicit flag, else $LNDSM_OUTPUT_ROOT, else ./runs.
std::filesystem::path output_root(const std::optional<std::string>& flag = std::nullopt);

/// Loads run.data_path when set, otherwise synthesises from [data].
Dataset load_data(const ExperimentConfig& cfg);

struct MakeDataResult {
  std::filesystem::path data_file;
  Eigen::Index rows = 0;
};

MakeDataResult make_data_command(const ExperimentConfig& cfg, const std::filesystem::path& root);
/// Writes checkpoints/pretrained.ckpt and pretrain.csv.
std::filesystem::path pretrain_command(const ExperimentConfig& cfg, const std::filesystem::path& root);

struct TrainCommandResult {
  std::int64_t epochs_completed = 0;
  bool budget_exhausted = false;
  double seconds = 0.0;
  std::filesystem::path checkpoint;
};

/// Starts from checkpoints/pretrained.ckpt when present (pretraining first
/// otherwise). With resume, continues from checkpoints/latest.ckpt and appends
/// to the logs.
TrainCommandResult train_command(const ExperimentConfig& cfg, const std::filesystem::path& root, bool resume = false);

struct SampleCommandResult {
  std::filesystem::path samples;
  std::filesystem::path provenance;
  Eigen::Index rows = 0;
};

SampleCommandResult sample_command(const ExperimentConfig& cfg, const std::filesystem::path& root,
                                   const std::optional<std::filesystem::path>& checkpoint = std::nullopt);
/// Appends one eval.csv row for the checkpoint (latest by default).
std::string eval_command(const ExperimentConfig& cfg, const std::filesystem::path& root,
                         const std::optional<std::filesystem::path>& checkpoint = std::nullopt);
/// Human-readable summary of a checkpoint.
std::string inspect_checkpoint(const std::filesystem::path& path);

/// Fails when the checkpoint's shapes do not match the config and data.
void check_compatible(const ExperimentConfig& cfg, const Dataset& data, const TrainState& state);

}  // namespace lndsm
