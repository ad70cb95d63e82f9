#pragma once

#include "lndsm/adam.hpp"
#include "lndsm/gmm.hpp"
#include "lndsm/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace lndsm {

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  VaeModel vae;
  ScoreNet score;
  std::optional<Gmm> reference;
  AdamGroup adam_vae;
  AdamGroup adam_score;
  std::string rng_state;
  std::int64_t epoch = 0;  // completed epochs
  std::int64_t step = 0;   // completed optimizer steps
};

bool bit_equal(const TrainState& a, const TrainState& b);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian):
///   "LNDS" | u32 version | u32 group count
///   per group: u32 name length | name | u32 rows | u32 cols | rows*cols f64 (row-major)
///   u32 rng length | rng text | u32 CRC32 of all preceding bytes
std::string checkpoint_encode(const TrainState& state);
TrainState checkpoint_decode(const std::string& bytes);

void checkpoint_save(const std::filesystem::path& path, const TrainState& state);
TrainState checkpoint_load(const std::filesystem::path& path);

}  // namespace lndsm
