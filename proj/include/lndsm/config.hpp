#pragma once

#include "lndsm/datasets.hpp"
#include "lndsm/trainer.hpp"

#include <string>
#include <vector>

namespace lndsm {

struct RunConfig {
  std::string name = "run";
  std::string data_path;  // empty: synthesise from [data]
  bool operator==(const RunConfig&) const = default;
};

/// Everything a subcommand can read. Text form:
///
///   # comment
///   [section]
///   key = value
///
/// Sections: run, data, train, gmm, sampler, eval. Every key has a default;
/// unknown sections or keys are errors. Lists are comma separated.
struct ExperimentConfig {
  RunConfig run;
  DatasetConfig data;
  TrainConfig train;
  EvalConfig eval;
  Eigen::Index sample_n = 10000;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
/// Canonical text: every key in a fixed order, doubles in shortest round-trip form.
std::string echo_config(const ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

/// Not validated; call validate_config after the last override.
/// "section.key" or a bare key; a bare key is looked up in `preferred`
/// sections first and must otherwise be unique.
void apply_override(ExperimentConfig& cfg, const std::string& assignment,
                    const std::vector<std::string>& preferred = {});

std::vector<std::string> config_keys();

}  // namespace lndsm
