#pragma once

#include "lndsm/gmm.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace lndsm {

enum class DatasetKind { Gmm2D, Rings2D, TinyDigits8x8 };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Gmm2D;
  Eigen::Index n_train = 6000;
  std::uint64_t seed = 1;
  // Gmm2D / Rings2D
  int components = 3;
  double separation = 4.0;  // Gmm2D: radius of the circle of centres; Rings2D: radius step
  std::vector<double> weights{0.5, 0.3, 0.2};
  double data_std = 0.5;
  // TinyDigits8x8
  int modes = 3;
  double flip_prob = 0.5;
  double pixel_noise = 0.02;

  void validate() const;
  bool operator==(const DatasetConfig&) const = default;
};

struct Dataset {
  DatasetKind kind = DatasetKind::Gmm2D;
  Eigen::MatrixXd x;        // n x D
  std::vector<int> labels;  // mode index per row
  int modes = 0;
  std::vector<char> flipped;  // TinyDigits8x8: rotated by 180 degrees

  bool binary() const { return kind == DatasetKind::TinyDigits8x8; }
  Eigen::VectorXd mode_fractions() const;
};

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from(const std::string& name);

/// Deterministic in (config). Gmm2D centres sit on a circle of radius
/// `separation`; per row one uniform chooses the mode, then two normals.
Dataset make_dataset(const DatasetConfig& cfg);

/// The generating mixture of a Gmm2D config.
Gmm gmm2d_truth(const DatasetConfig& cfg);

/// 16x16 glyph for digit d (0..9), row-major 0/1.
Eigen::VectorXd digit_glyph16(int digit);
/// 2x2 block average thresholded at 0.5: 16x16 -> 8x8.
Eigen::VectorXd half_size(const Eigen::VectorXd& image16);
Eigen::VectorXd rotate180(const Eigen::VectorXd& image);

/// Packed digits file, little-endian:
///   "LNDD" | u32 version | u32 n | u32 side | u32 modes | n x u32 label | n x u8 flipped | n*side*side x u8 pixel
std::string encode_digits(const Dataset& data);
Dataset decode_digits(const std::string& bytes);

/// Writes the dataset next to a manifest: CSV for 2D kinds, packed binary
/// plus a PGM preview grid of the first 64 images for digits. Returns the data path.
std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir, std::uint64_t seed);
Dataset read_dataset(const std::filesystem::path& path);

/// Per-mode diagonal Gaussian fitted to labelled rows; weights are label frequencies.
Gmm label_gmm(const Dataset& data, double variance_floor = 1e-4);

}  // namespace lndsm
