#include "lndsm/checkpoint.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"

#include <bit>
#include <cstring>
#include <map>

namespace lndsm {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_group(std::string& out, const std::string& name, const Eigen::MatrixXd& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      char b[8];
      std::memcpy(b, &x, 8);
      out.append(b, 8);
    }
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }
  std::string text(std::size_t n) { return std::string(take(n)); }
  Eigen::MatrixXd matrix(std::uint32_t rows, std::uint32_t cols) {
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        double x = 0.0;
        std::memcpy(&x, take(8).data(), 8);
        m(i, j) = x;
      }
    }
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

using Groups = std::map<std::string, Eigen::MatrixXd>;

void put_mlp(Groups& g, const std::string& prefix, const MlpParams& p) {
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    g[prefix + ".w" + std::to_string(i)] = p.weights[i];
    g[prefix + ".b" + std::to_string(i)] = p.biases[i];
  }
}

const Eigen::MatrixXd& need(const Groups& g, const std::string& name) {
  auto it = g.find(name);
  if (it == g.end()) throw DataError("checkpoint missing group '" + name + "'");
  return it->second;
}

MlpParams get_mlp(const Groups& g, const std::string& prefix) {
  MlpParams p;
  for (std::size_t i = 0; g.count(prefix + ".w" + std::to_string(i)); ++i) {
    p.weights.push_back(g.at(prefix + ".w" + std::to_string(i)));
    p.biases.push_back(need(g, prefix + ".b" + std::to_string(i)));
  }
  if (p.weights.empty()) throw DataError("checkpoint missing network '" + prefix + "'");
  return p;
}

void put_adam(Groups& g, const AdamGroup& a) {
  for (std::size_t i = 0; i < a.m.size(); ++i) {
    g["adam." + a.name + ".m" + std::to_string(i)] = a.m[i];
    g["adam." + a.name + ".v" + std::to_string(i)] = a.v[i];
  }
}

AdamGroup get_adam(const Groups& g, const std::string& name, double step) {
  AdamGroup a;
  a.name = name;
  a.step = static_cast<std::int64_t>(step);
  for (std::size_t i = 0; g.count("adam." + name + ".m" + std::to_string(i)); ++i) {
    a.m.push_back(g.at("adam." + name + ".m" + std::to_string(i)));
    a.v.push_back(need(g, "adam." + name + ".v" + std::to_string(i)));
  }
  return a;
}

Eigen::MatrixXd row(std::initializer_list<double> values) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

}  // namespace

bool bit_equal(const TrainState& a, const TrainState& b) {
  return checkpoint_encode(a) == checkpoint_encode(b);
}

std::string checkpoint_encode(const TrainState& s) {
  Groups g;
  put_mlp(g, "vae.encoder", s.vae.encoder);
  put_mlp(g, "vae.decoder", s.vae.decoder);
  put_mlp(g, "score", s.score.mlp);
  g["meta.vae"] = row({static_cast<double>(s.vae.data_dim), static_cast<double>(s.vae.latent_dim),
                       static_cast<double>(s.vae.likelihood), s.vae.sigma_x});
  g["meta.score"] = row({static_cast<double>(s.score.dim), s.score.horizon, static_cast<double>(s.score.base),
                         s.score.base_scale});
  g["meta.progress"] = row({static_cast<double>(s.epoch), static_cast<double>(s.step),
                            static_cast<double>(s.adam_vae.step), static_cast<double>(s.adam_score.step)});
  put_adam(g, s.adam_vae);
  put_adam(g, s.adam_score);
  if (s.reference) {
    g["gmm.weights"] = s.reference->weights().transpose();
    g["gmm.means"] = s.reference->means();
    g["gmm.variances"] = s.reference->variances();
  }

  std::string out = "LNDS";
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(g.size()));
  for (const auto& [name, m] : g) put_group(out, name, m);
  put_u32(out, static_cast<std::uint32_t>(s.rng_state.size()));
  out += s.rng_state;
  put_u32(out, crc32(out));
  return out;
}

TrainState checkpoint_decode(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "LNDS") != 0) throw DataError("not a checkpoint (bad magic)");
  const std::string_view body(bytes.data(), bytes.size() - 4);
  Reader tail(std::string_view(bytes).substr(bytes.size() - 4));
  if (tail.u32() != crc32(body)) throw DataError("checkpoint checksum mismatch");

  Reader r(body);
  r.text(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported");
  Groups g;
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.text(r.u32());
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    g[name] = r.matrix(rows, cols);
  }
  TrainState s;
  s.rng_state = r.text(r.u32());
  if (!r.done()) throw DataError("checkpoint has trailing bytes");

  const auto& mv = need(g, "meta.vae");
  const auto& ms = need(g, "meta.score");
  const auto& mp = need(g, "meta.progress");
  if (mv.cols() != 4 || ms.cols() != 4 || mp.cols() != 4) throw DataError("checkpoint metadata malformed");
  s.vae.encoder = get_mlp(g, "vae.encoder");
  s.vae.decoder = get_mlp(g, "vae.decoder");
  s.vae.data_dim = static_cast<Eigen::Index>(mv(0, 0));
  s.vae.latent_dim = static_cast<Eigen::Index>(mv(0, 1));
  s.vae.likelihood = static_cast<Likelihood>(static_cast<int>(mv(0, 2)));
  s.vae.sigma_x = mv(0, 3);
  s.score.mlp = get_mlp(g, "score");
  s.score.dim = static_cast<Eigen::Index>(ms(0, 0));
  s.score.horizon = ms(0, 1);
  s.epoch = static_cast<std::int64_t>(mp(0, 0));
  s.step = static_cast<std::int64_t>(mp(0, 1));
  s.adam_vae = get_adam(g, "vae", mp(0, 2));
  s.adam_score = get_adam(g, "score", mp(0, 3));
  if (g.count("gmm.weights")) {
    s.reference.emplace(need(g, "gmm.weights").transpose(), need(g, "gmm.means"), need(g, "gmm.variances"));
  }
  const auto base = static_cast<ScoreBase>(static_cast<int>(ms(0, 2)));
  if (base == ScoreBase::Reference && !s.reference) throw DataError("checkpoint score uses a missing reference GMM");
  s.score.base = base;
  s.score.base_scale = ms(0, 3);
  if (base == ScoreBase::Reference) s.score.reference = std::make_shared<const Gmm>(*s.reference);
  s.vae.validate();
  s.score.validate();
  return s;
}

void checkpoint_save(const std::filesystem::path& path, const TrainState& state) {
  write_file(path, checkpoint_encode(state));
}

TrainState checkpoint_load(const std::filesystem::path& path) { return checkpoint_decode(read_file(path)); }

}  // namespace lndsm
