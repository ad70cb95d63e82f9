#include "lndsm/datasets.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

namespace lndsm {

namespace {

constexpr int kSide = 8;
constexpr int kGlyphSide = 16;

// 8x8 outlines, upscaled 2x to 16x16 before augmentation.
constexpr std::array<std::array<const char*, 8>, 10> kFont{{
    {"..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"},
    {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", ".######.", "........"},
    {"..####..", ".##..##.", ".....##.", "....##..", "...##...", "..##....", ".######.", "........"},
    {"..####..", ".##..##.", ".....##.", "...###..", ".....##.", ".##..##.", "..####..", "........"},
    {"....##..", "...###..", "..#.##..", ".#..##..", ".######.", "....##..", "....##..", "........"},
    {".######.", ".##.....", ".#####..", ".....##.", ".....##.", ".##..##.", "..####..", "........"},
    {"..####..", ".##.....", ".#####..", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"},
    {".######.", ".....##.", "....##..", "...##...", "..##....", "..##....", "..##....", "........"},
    {"..####..", ".##..##.", ".##..##.", "..####..", ".##..##.", ".##..##.", "..####..", "........"},
    {"..####..", ".##..##.", ".##..##.", "..#####.", ".....##.", "....##..", "..###...", "........"},
}};

Eigen::VectorXd shift16(const Eigen::VectorXd& img, int dr, int dc) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(img.size());
  for (int r = 0; r < kGlyphSide; ++r) {
    for (int c = 0; c < kGlyphSide; ++c) {
      const int rr = r - dr, cc = c - dc;
      if (rr >= 0 && rr < kGlyphSide && cc >= 0 && cc < kGlyphSide) out(r * kGlyphSide + c) = img(rr * kGlyphSide + cc);
    }
  }
  return out;
}

std::vector<double> mode_weights(const DatasetConfig& cfg, int modes) {
  if (static_cast<int>(cfg.weights.size()) == modes) return cfg.weights;
  return std::vector<double>(static_cast<std::size_t>(modes), 1.0 / modes);
}

int pick(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& s, std::size_t& pos) {
  if (s.size() - pos < 4) throw DataError("digits file truncated");
  std::uint32_t v = 0;
  std::memcpy(&v, s.data() + pos, 4);
  pos += 4;
  return v;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n_train < 1) throw ConfigError("n_train must be positive");
  switch (kind) {
    case DatasetKind::Gmm2D:
    case DatasetKind::Rings2D: {
      if (components < 1) throw ConfigError("components must be positive");
      if (static_cast<int>(weights.size()) != components) throw ConfigError("need one weight per component");
      const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
      if (std::abs(s - 1.0) > 1e-9 || *std::min_element(weights.begin(), weights.end()) <= 0.0)
        throw ConfigError("component weights must be positive and sum to 1");
      if (!(separation > 0.0) || !(data_std > 0.0)) throw ConfigError("separation and data_std must be positive");
      break;
    }
    case DatasetKind::TinyDigits8x8:
      if (modes < 1 || modes > 10) throw ConfigError("digit modes must be in 1..10");
      if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must lie in [0, 1]");
      if (!(pixel_noise >= 0.0 && pixel_noise < 0.5)) throw ConfigError("pixel_noise must lie in [0, 0.5)");
      break;
  }
}

Eigen::VectorXd Dataset::mode_fractions() const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(modes);
  for (int l : labels) f(l) += 1.0;
  return f / static_cast<double>(labels.size());
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Gmm2D: return "gmm2d";
    case DatasetKind::Rings2D: return "rings2d";
    case DatasetKind::TinyDigits8x8: return "tinydigits8x8";
  }
  return "?";
}

DatasetKind dataset_kind_from(const std::string& name) {
  if (name == "gmm2d") return DatasetKind::Gmm2D;
  if (name == "rings2d") return DatasetKind::Rings2D;
  if (name == "tinydigits8x8") return DatasetKind::TinyDigits8x8;
  throw ConfigError("unknown dataset kind '" + name + "' (gmm2d, rings2d, tinydigits8x8)");
}

Gmm gmm2d_truth(const DatasetConfig& cfg) {
  cfg.validate();
  const int k = cfg.components;
  Eigen::VectorXd w(k);
  Eigen::MatrixXd mu(k, 2);
  for (int c = 0; c < k; ++c) {
    w(c) = cfg.weights[static_cast<std::size_t>(c)];
    const double a = 2.0 * std::numbers::pi * c / k;
    mu(c, 0) = cfg.separation * std::cos(a);
    mu(c, 1) = cfg.separation * std::sin(a);
  }
  w /= w.sum();
  return Gmm(w, mu, Eigen::MatrixXd::Constant(k, 2, cfg.data_std * cfg.data_std));
}

Eigen::VectorXd digit_glyph16(int digit) {
  require_dim(digit >= 0 && digit <= 9, "digit out of range");
  Eigen::VectorXd img(kGlyphSide * kGlyphSide);
  for (int r = 0; r < kGlyphSide; ++r)
    for (int c = 0; c < kGlyphSide; ++c)
      img(r * kGlyphSide + c) = kFont[static_cast<std::size_t>(digit)][static_cast<std::size_t>(r / 2)][c / 2] == '#';
  return img;
}

Eigen::VectorXd half_size(const Eigen::VectorXd& image16) {
  require_dim(image16.size() == kGlyphSide * kGlyphSide, "half_size expects a 16x16 image");
  Eigen::VectorXd out(kSide * kSide);
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      const double avg = (image16((2 * r) * kGlyphSide + 2 * c) + image16((2 * r) * kGlyphSide + 2 * c + 1) +
                          image16((2 * r + 1) * kGlyphSide + 2 * c) + image16((2 * r + 1) * kGlyphSide + 2 * c + 1)) /
                         4.0;
      out(r * kSide + c) = avg >= 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

Eigen::VectorXd rotate180(const Eigen::VectorXd& image) { return image.reverse(); }

Dataset make_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Dataset d;
  d.kind = cfg.kind;
  d.labels.resize(static_cast<std::size_t>(cfg.n_train));
  switch (cfg.kind) {
    case DatasetKind::Gmm2D: {
      const Gmm truth = gmm2d_truth(cfg);
      d.modes = cfg.components;
      d.x.resize(cfg.n_train, 2);
      for (Eigen::Index i = 0; i < cfg.n_train; ++i) {
        const int c = pick(cfg.weights, rng.uniform());
        d.labels[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < 2; ++j) d.x(i, j) = truth.means()(c, j) + cfg.data_std * rng.normal();
      }
      break;
    }
    case DatasetKind::Rings2D: {
      d.modes = cfg.components;
      d.x.resize(cfg.n_train, 2);
      for (Eigen::Index i = 0; i < cfg.n_train; ++i) {
        const int c = pick(cfg.weights, rng.uniform());
        d.labels[static_cast<std::size_t>(i)] = c;
        const double angle = 2.0 * std::numbers::pi * rng.uniform();
        const double radius = cfg.separation * (c + 1) / cfg.components + 0.25 * cfg.data_std * rng.normal();
        d.x(i, 0) = radius * std::cos(angle);
        d.x(i, 1) = radius * std::sin(angle);
      }
      break;
    }
    case DatasetKind::TinyDigits8x8: {
      d.modes = cfg.modes;
      const auto weights = mode_weights(cfg, cfg.modes);
      d.x.resize(cfg.n_train, kSide * kSide);
      d.flipped.resize(static_cast<std::size_t>(cfg.n_train));
      for (Eigen::Index i = 0; i < cfg.n_train; ++i) {
        const int c = pick(weights, rng.uniform());
        const bool flip = rng.uniform() < cfg.flip_prob;
        const int dr = static_cast<int>(rng.uniform_int(-1, 1));
        const int dc = static_cast<int>(rng.uniform_int(-1, 1));
        Eigen::VectorXd img = shift16(digit_glyph16(c), dr, dc);
        if (flip) img = rotate180(img);
        img = half_size(img);
        for (Eigen::Index p = 0; p < img.size(); ++p)
          if (rng.uniform() < cfg.pixel_noise) img(p) = 1.0 - img(p);
        d.x.row(i) = img.transpose();
        d.labels[static_cast<std::size_t>(i)] = c;
        d.flipped[static_cast<std::size_t>(i)] = flip;
      }
      break;
    }
  }
  return d;
}

std::string encode_digits(const Dataset& data) {
  require_dim(data.x.cols() == kSide * kSide, "encode_digits expects 8x8 images");
  std::string out = "LNDD";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(data.x.rows()));
  put_u32(out, kSide);
  put_u32(out, static_cast<std::uint32_t>(data.modes));
  for (int l : data.labels) put_u32(out, static_cast<std::uint32_t>(l));
  for (Eigen::Index i = 0; i < data.x.rows(); ++i)
    out.push_back(data.flipped.empty() ? 0 : data.flipped[static_cast<std::size_t>(i)]);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i)
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out.push_back(data.x(i, j) >= 0.5 ? 1 : 0);
  return out;
}

Dataset decode_digits(const std::string& bytes) {
  if (bytes.size() < 20 || bytes.compare(0, 4, "LNDD") != 0) throw DataError("not a digits file");
  std::size_t pos = 4;
  if (get_u32(bytes, pos) != 1) throw DataError("unsupported digits file version");
  const std::uint32_t n = get_u32(bytes, pos);
  const std::uint32_t side = get_u32(bytes, pos);
  Dataset d;
  d.kind = DatasetKind::TinyDigits8x8;
  d.modes = static_cast<int>(get_u32(bytes, pos));
  if (side != kSide) throw DataError("digits file must hold 8x8 images");
  const std::size_t need = std::size_t{n} * (4 + 1 + side * side);
  if (bytes.size() - pos != need) throw DataError("digits file size mismatch");
  for (std::uint32_t i = 0; i < n; ++i) {
    d.labels.push_back(static_cast<int>(get_u32(bytes, pos)));
    if (d.labels.back() < 0 || d.labels.back() >= d.modes) throw DataError("digit label out of range");
  }
  for (std::uint32_t i = 0; i < n; ++i) d.flipped.push_back(bytes[pos++]);
  d.x.resize(n, side * side);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < side * side; ++j) d.x(i, j) = bytes[pos++] ? 1.0 : 0.0;
  return d;
}

std::filesystem::path write_dataset(const Dataset& data, const std::filesystem::path& dir, std::uint64_t seed) {
  std::map<std::string, std::string> info{{"kind", to_string(data.kind)},
                                          {"rows", std::to_string(data.x.rows())},
                                          {"modes", std::to_string(data.modes)}};
  if (data.binary()) {
    const auto path = dir / "data.bin";
    write_file(path, encode_digits(data));
    write_manifest(path, seed, info);
    const auto preview = dir / "preview.pgm";
    write_file(preview, encode_pgm(tile_images(data.x.topRows(std::min<Eigen::Index>(64, data.x.rows())), kSide, 8)));
    write_manifest(preview, seed, info);
    return path;
  }
  const auto path = dir / "data.csv";
  write_file(path, matrix_csv(data.x, {"x0", "x1", "label"}, &data.labels));
  write_manifest(path, seed, info);
  return path;
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.compare(0, 4, "LNDD") == 0) return decode_digits(bytes);
  Dataset d;
  std::vector<std::string> header;
  d.x = parse_csv(bytes, &header, &d.labels);
  if (d.x.cols() != 2) throw DataError("2D dataset CSV must have columns x0,x1[,label]");
  if (d.labels.empty()) d.labels.assign(static_cast<std::size_t>(d.x.rows()), 0);
  d.modes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  return d;
}

Gmm label_gmm(const Dataset& data, double variance_floor) {
  const Eigen::Index dim = data.x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(data.modes);
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(data.modes, dim);
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(data.modes, dim);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const int l = data.labels[static_cast<std::size_t>(i)];
    w(l) += 1.0;
    mu.row(l) += data.x.row(i);
  }
  if ((w.array() <= 0.0).any()) throw DataError("every mode needs at least one labelled row");
  mu = w.cwiseInverse().asDiagonal() * mu;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const int l = data.labels[static_cast<std::size_t>(i)];
    var.row(l) += (data.x.row(i) - mu.row(l)).cwiseAbs2();
  }
  var = (w.cwiseInverse().asDiagonal() * var).cwiseMax(variance_floor);
  w /= w.sum();
  return Gmm(w, mu, var);
}

}  // namespace lndsm
