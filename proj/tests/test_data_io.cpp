#include "lndsm/datasets.hpp"
#include "lndsm/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

using namespace lndsm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lndsm_test_data_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, std::numeric_limits<double>::denorm_min()})
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("CRC32 check value") {
  CHECK(crc32("123456789") == 0xCBF43926u);
  CHECK(hex32(0xCBF43926u) == "cbf43926");
}

TEST_CASE("CSV round trip with labels") {
  Eigen::MatrixXd m(3, 2);
  m << 0.1, -2, 1e-9, 3.25, 7, 1.0 / 3.0;
  const std::vector<int> labels{2, 0, 1};
  std::vector<std::string> header;
  std::vector<int> back_labels;
  const Eigen::MatrixXd back = parse_csv(matrix_csv(m, {"a", "b", "label"}, &labels), &header, &back_labels);
  CHECK(back == m);
  CHECK(back_labels == labels);
  CHECK(header == std::vector<std::string>{"a", "b", "label"});
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n3\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,x\n"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
}

TEST_CASE("PGM round trip and tiling") {
  Eigen::MatrixXd img(2, 3);
  img << 0, 0.5, 1, 1, 0.25, 0;
  const Eigen::MatrixXd back = decode_pgm(encode_pgm(img));
  CHECK((back - img).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
  CHECK(encode_pgm(img).rfind("P5", 0) == 0);
  CHECK_THROWS_AS(decode_pgm("P2 1 1 255\n0"), DataError);

  Eigen::MatrixXd images = Eigen::MatrixXd::Ones(3, 4);
  const Eigen::MatrixXd grid = tile_images(images, 2, 2);
  // one-pixel frame around and between tiles; the fourth slot stays empty
  CHECK(grid.rows() == 2 * 3 + 1);
  CHECK(grid.cols() == 2 * 3 + 1);
  CHECK(grid.sum() == 12.0);
  CHECK(grid(1, 1) == 1.0);
  CHECK(grid(3, 1) == 0.0);
}

TEST_CASE("atomic writes and manifests") {
  const fs::path dir = scratch("manifest");
  const fs::path f = dir / "nested" / "x.txt";
  write_file(f, "hello");
  CHECK(read_file(f) == "hello");
  write_manifest(f, 42, {{"rows", "3"}});
  const auto kv = read_key_values(fs::path(f.string() + ".manifest"));
  CHECK(kv.at("seed") == "42");
  CHECK(kv.at("rows") == "3");
  CHECK(kv.contains("build"));
  CHECK_THROWS_AS(read_file(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("2D mixture data follows its weights and is reproducible") {
  DatasetConfig c;
  c.n_train = 20000;
  const Dataset d = make_dataset(c);
  CHECK(d.x.rows() == 20000);
  const Eigen::VectorXd f = d.mode_fractions();
  for (int k = 0; k < 3; ++k) {
    const double w = c.weights[static_cast<std::size_t>(k)];
    CHECK(std::abs(f(k) - w) < 4.0 * std::sqrt(w * (1 - w) / 20000.0));
  }
  CHECK(make_dataset(c).x == d.x);
  const Gmm truth = gmm2d_truth(c);
  CHECK(truth.means().row(0).norm() == doctest::Approx(c.separation));
  const Gmm fit = label_gmm(d);
  CHECK((fit.means() - truth.means()).cwiseAbs().maxCoeff() < 0.05);
  CHECK((fit.variances().array().sqrt() - c.data_std).abs().maxCoeff() < 0.03);

  c.weights = {0.5, 0.5};
  CHECK_THROWS_AS(make_dataset(c), ConfigError);
}

TEST_CASE("digit glyphs and packed files") {
  const Eigen::VectorXd g = digit_glyph16(3);
  CHECK(g.size() == 256);
  CHECK(((g.array() == 0.0) || (g.array() == 1.0)).all());
  CHECK(rotate180(rotate180(g)) == g);
  CHECK(half_size(g).size() == 64);
  CHECK(half_size(Eigen::VectorXd::Ones(256)) == Eigen::VectorXd::Ones(64));

  DatasetConfig c;
  c.kind = DatasetKind::TinyDigits8x8;
  c.n_train = 50;
  c.pixel_noise = 0.0;
  const Dataset d = make_dataset(c);
  CHECK(d.binary());
  CHECK(d.x.cols() == 64);
  const Dataset back = decode_digits(encode_digits(d));
  CHECK(back.x == d.x);
  CHECK(back.labels == d.labels);
  CHECK(back.flipped == d.flipped);
  std::string bytes = encode_digits(d);
  CHECK_THROWS_AS(decode_digits(bytes.substr(0, bytes.size() - 1)), DataError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_digits(bytes), DataError);
}

TEST_CASE("dataset files round trip") {
  const fs::path dir = scratch("files");
  DatasetConfig c;
  c.n_train = 100;
  const Dataset d = make_dataset(c);
  const Dataset back = read_dataset(write_dataset(d, dir, 1));
  CHECK(back.x == d.x);
  CHECK(back.labels == d.labels);
  CHECK(back.modes == 3);

  c.kind = DatasetKind::TinyDigits8x8;
  const Dataset digits = make_dataset(c);
  const fs::path p = write_dataset(digits, dir / "digits", 1);
  CHECK(read_dataset(p).x == digits.x);
  CHECK(fs::exists(dir / "digits" / "preview.pgm"));
  fs::remove_all(dir);
}
