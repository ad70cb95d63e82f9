#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lndsm {

/// Build identifier baked in at configure time (git revision or "unknown").
std::string build_id();

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place; creates parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::uint32_t crc32(std::string_view bytes);
std::string hex32(std::uint32_t value);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

/// Sidecar "<artifact>.manifest" in key = value form; always carries seed and build.
void write_manifest(const std::filesystem::path& artifact, std::uint64_t seed,
                    const std::map<std::string, std::string>& extra = {});
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Matrix as CSV with a header row; values via format_double.
std::string matrix_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header,
                       const std::vector<int>* labels = nullptr);
/// Parses numeric CSV with one header line. A trailing "label" column is split off if present.
Eigen::MatrixXd parse_csv(const std::string& text, std::vector<std::string>* header = nullptr,
                          std::vector<int>* labels = nullptr);

/// Binary PGM (P5, maxval 255). Pixel values in [0, 1] are scaled and rounded.
std::string encode_pgm(const Eigen::MatrixXd& image);
Eigen::MatrixXd decode_pgm(const std::string& bytes);
/// Tiles rows of `images` (each side*side, row-major) into a grid with one-pixel gaps.
Eigen::MatrixXd tile_images(const Eigen::MatrixXd& images, int side, int columns);

}  // namespace lndsm
