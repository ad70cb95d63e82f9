#include "lndsm/io.hpp"

#include "lndsm/errors.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef LNDSM_BUILD_ID
#define LNDSM_BUILD_ID "unknown"
#endif

namespace lndsm {

std::string build_id() { return LNDSM_BUILD_ID; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint32_t crc32(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(c);
}

std::string hex32(std::uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", value);
  return buf;
}

std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, end);
}

void write_manifest(const std::filesystem::path& artifact, std::uint64_t seed,
                    const std::map<std::string, std::string>& extra) {
  std::ostringstream out;
  out << "artifact = " << artifact.filename().string() << "\n";
  out << "seed = " << seed << "\n";
  out << "build = " << build_id() << "\n";
  for (const auto& [k, v] : extra) out << k << " = " << v << "\n";
  auto path = artifact;
  path += ".manifest";
  write_file(path, out.str());
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string matrix_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header,
                       const std::vector<int>* labels) {
  require_dim(static_cast<Eigen::Index>(header.size()) == values.cols() + (labels ? 1 : 0),
              "matrix_csv: header width mismatch");
  if (labels) require_dim(static_cast<Eigen::Index>(labels->size()) == values.rows(), "matrix_csv: label count");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    if (labels) out += ',' + std::to_string((*labels)[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd parse_csv(const std::string& text, std::vector<std::string>* header, std::vector<int>* labels) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  std::vector<std::string> names;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
  }
  const bool has_label = !names.empty() && names.back() == "label";
  const std::size_t width = names.size() - (has_label ? 1 : 0);
  std::vector<double> flat;
  std::vector<int> labs;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size())
        throw DataError("CSV row " + std::to_string(rows + 2) + ": bad number '" + cell + "'");
      if (has_label && col == width) {
        labs.push_back(static_cast<int>(v));
      } else {
        flat.push_back(v);
      }
      ++col;
    }
    if (col != names.size()) throw DataError("CSV row " + std::to_string(rows + 2) + ": wrong column count");
    ++rows;
  }
  if (header) *header = names;
  if (labels) *labels = labs;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < width; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * width + j];
  return out;
}

std::string encode_pgm(const Eigen::MatrixXd& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double v = std::clamp(image(i, j), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  return out;
}

Eigen::MatrixXd decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw DataError("not an 8-bit P5 image");
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() != offset + static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
    throw DataError("PGM payload size mismatch");
  Eigen::MatrixXd img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      img(i, j) = static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i * w + j)]) / 255.0;
  return img;
}

Eigen::MatrixXd tile_images(const Eigen::MatrixXd& images, int side, int columns) {
  require_dim(images.cols() == static_cast<Eigen::Index>(side) * side, "tile_images: image size mismatch");
  require_dim(columns > 0, "tile_images: columns must be positive");
  const auto n = static_cast<int>(images.rows());
  const int rows = std::max(1, (n + columns - 1) / columns);
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(rows * (side + 1) + 1, columns * (side + 1) + 1);
  for (int k = 0; k < n; ++k) {
    const int r0 = (k / columns) * (side + 1) + 1;
    const int c0 = (k % columns) * (side + 1) + 1;
    for (int i = 0; i < side; ++i)
      for (int j = 0; j < side; ++j) grid(r0 + i, c0 + j) = images(k, i * side + j);
  }
  return grid;
}

}  // namespace lndsm
