#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

namespace lndsm {

/// Seeded random stream. Wraps a 64-bit Mersenne twister plus a normal
/// distribution; the full state (including the cached normal deviate) can
/// be saved and restored as text, which is what checkpoints store.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream derived from (seed, key). Used to give every
  /// trajectory or sample its own stream so batches can be split across
  /// workers without changing results.
  static Rng substream(std::uint64_t seed, std::uint64_t key);

  double normal();
  double uniform();  // [0, 1)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  std::uint64_t next_u64();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::string save() const;
  void load(const std::string& state);

  bool operator==(const Rng& other) const;

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lndsm
