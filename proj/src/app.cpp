#include "lndsm/app.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"
#include "lndsm/trainer.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace lndsm {

namespace fs = std::filesystem;

RunPaths RunPaths::under(const fs::path& root, const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("run.name must be a plain directory name");
  RunPaths p;
  p.dir = root / name;
  p.config_echo = p.dir / "config.echo";
  p.data_dir = p.dir / "data";
  p.train_csv = p.dir / "train.csv";
  p.eval_csv = p.dir / "eval.csv";
  p.pretrain_csv = p.dir / "pretrain.csv";
  p.samples_dir = p.dir / "samples";
  p.checkpoints_dir = p.dir / "checkpoints";
  p.manifest = p.dir / "manifest";
  return p;
}

fs::path RunPaths::epoch_checkpoint(std::int64_t epoch) const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04lld.ckpt", static_cast<long long>(epoch));
  return checkpoints_dir / buf;
}

fs::path output_root(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

Dataset load_data(const ExperimentConfig& cfg) {
  if (!cfg.run.data_path.empty()) return read_dataset(cfg.run.data_path);
  return make_dataset(cfg.data);
}

namespace {

std::map<std::string, std::string> run_info(const ExperimentConfig& cfg) {
  return {{"run", cfg.run.name}, {"mode", to_string(cfg.train.mode)}};
}

void write_artifact(const fs::path& path, const std::string& bytes, const ExperimentConfig& cfg,
                    std::map<std::string, std::string> extra = {}) {
  write_file(path, bytes);
  auto info = run_info(cfg);
  info.merge(extra);
  write_manifest(path, cfg.train.seed, info);
}

void write_run_files(const ExperimentConfig& cfg, const RunPaths& paths) {
  write_artifact(paths.config_echo, echo_config(cfg), cfg);
  std::ostringstream m;
  m << "run = " << cfg.run.name << "\n"
    << "seed = " << cfg.train.seed << "\n"
    << "build = " << build_id() << "\n"
    << "mode = " << to_string(cfg.train.mode) << "\n"
    << "threads = " << cfg.train.threads << "\n"
    << "bit_exact = " << (cfg.train.threads == 1 ? "true" : "false") << "\n";
  write_file(paths.manifest, m.str());
}

// Keeps the header and rows whose leading epoch field is at most `epoch`.
std::string truncate_log(const std::string& text, std::int64_t epoch) {
  std::istringstream in(text);
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      out += line + "\n";
      header = false;
      continue;
    }
    if (std::stoll(line.substr(0, line.find(','))) <= epoch) out += line + "\n";
  }
  return out;
}

std::string checkpoint_hash(const fs::path& path) { return hex32(crc32(read_file(path))); }

TrainState load_checkpoint_for(const ExperimentConfig& cfg, const Dataset& data, const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string());
  TrainState s = checkpoint_load(path);
  check_compatible(cfg, data, s);
  return s;
}

}  // namespace

void check_compatible(const ExperimentConfig& cfg, const Dataset& data, const TrainState& state) {
  const auto& t = cfg.train;
  const bool ambient = t.mode == TrainMode::NDSMAmbient;
  const Eigen::Index score_dim = ambient ? data.x.cols() : t.latent_dim;
  if (state.vae.data_dim != data.x.cols())
    throw DimensionError("checkpoint data dimension " + std::to_string(state.vae.data_dim) + " != dataset dimension " +
                         std::to_string(data.x.cols()));
  if (state.vae.latent_dim != t.latent_dim) throw DimensionError("checkpoint latent dimension differs from config");
  if (state.score.dim != score_dim) throw DimensionError("checkpoint score dimension differs from config");
  if (state.score.horizon != t.effective_horizon())
    throw DimensionError("checkpoint score horizon differs from config (made for another mode?)");
  if (t.mode != TrainMode::LSGM && state.reference && state.reference->dim() != score_dim)
    throw DimensionError("checkpoint reference GMM dimension differs from config");
  // An untrained score net (fresh or pretrained checkpoint) is re-based on load.
  if (state.adam_score.step > 0) {
    const bool mixed = state.score.base != ScoreBase::None;
    if (mixed != (t.score_param == "mixed"))
      throw ConfigError("checkpoint score parameterization is " + std::string(mixed ? "mixed" : "plain") +
                        ", config says " + t.score_param);
  }
}

MakeDataResult make_data_command(const ExperimentConfig& cfg, const fs::path& root) {
  const RunPaths paths = RunPaths::under(root, cfg.run.name);
  const Dataset data = make_dataset(cfg.data);
  MakeDataResult r;
  r.data_file = write_dataset(data, paths.data_dir, cfg.data.seed);
  r.rows = data.x.rows();
  write_run_files(cfg, paths);
  return r;
}

fs::path pretrain_command(const ExperimentConfig& cfg, const fs::path& root) {
  const RunPaths paths = RunPaths::under(root, cfg.run.name);
  const Dataset data = load_data(cfg);
  std::vector<double> losses;
  const TrainState state = initial_state(cfg.train, data, &losses);
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) csv += std::to_string(e + 1) + "," + format_double(losses[e]) + "\n";
  write_run_files(cfg, paths);
  write_artifact(paths.pretrain_csv, csv, cfg);
  checkpoint_save(paths.pretrained(), state);
  write_manifest(paths.pretrained(), cfg.train.seed, run_info(cfg));
  return paths.pretrained();
}

TrainCommandResult train_command(const ExperimentConfig& cfg, const fs::path& root, bool resume) {
  const RunPaths paths = RunPaths::under(root, cfg.run.name);
  const Dataset data = load_data(cfg);
  TrainState state;
  std::string train_log = train_csv_header();
  std::string eval_log = eval_csv_header();
  if (resume) {
    state = load_checkpoint_for(cfg, data, paths.latest());
    if (fs::exists(paths.train_csv)) train_log = truncate_log(read_file(paths.train_csv), state.epoch);
    if (fs::exists(paths.eval_csv)) eval_log = truncate_log(read_file(paths.eval_csv), state.epoch);
  } else if (fs::exists(paths.pretrained())) {
    state = load_checkpoint_for(cfg, data, paths.pretrained());
    if (cfg.train.mode != TrainMode::LSGM && !state.reference) {
      // Pretrained without a reference: fit it now from encoder samples.
      Rng rng(cfg.train.seed);
      if (!state.rng_state.empty()) rng.load(state.rng_state);
      const Encoding enc = vae_encode(state.vae, data.x, rng);
      state.reference = gmm_fit(enc.z0, cfg.train.gmm_components, rng, cfg.train.gmm).model;
      state.rng_state = rng.save();
    }
    attach_score_base(cfg.train, state);
  } else {
    std::vector<double> losses;
    state = initial_state(cfg.train, data, &losses);
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e)
      csv += std::to_string(e + 1) + "," + format_double(losses[e]) + "\n";
    write_artifact(paths.pretrain_csv, csv, cfg);
  }
  write_run_files(cfg, paths);

  TrainCallbacks cb;
  cb.on_step = [&](const TrainLogRow& row) { train_log += train_csv_row(row); };
  cb.on_epoch = [&](const TrainState& s) {
    checkpoint_save(paths.epoch_checkpoint(s.epoch), s);
    checkpoint_save(paths.latest(), s);
    write_file(paths.train_csv, train_log);
  };
  cb.on_eval = [&](const EvalRow& row) {
    eval_log += eval_csv_row(row);
    write_file(paths.eval_csv, eval_log);
  };
  TrainResult result = train(cfg.train, cfg.eval, data, std::move(state), cb);

  const std::map<std::string, std::string> extra{{"epochs_completed", std::to_string(result.epochs_completed)}};
  write_artifact(paths.train_csv, train_log, cfg, extra);
  write_artifact(paths.eval_csv, eval_log, cfg, extra);
  if (result.budget_exhausted) {
    // The partially trained epoch is kept under its own name.
    checkpoint_save(paths.checkpoints_dir / "budget_stop.ckpt", result.state);
  }
  for (const auto& entry : fs::directory_iterator(paths.checkpoints_dir)) {
    if (entry.path().extension() == ".ckpt") write_manifest(entry.path(), cfg.train.seed, run_info(cfg));
  }
  TrainCommandResult r;
  r.epochs_completed = result.epochs_completed;
  r.budget_exhausted = result.budget_exhausted;
  r.seconds = result.seconds;
  r.checkpoint = result.budget_exhausted ? paths.checkpoints_dir / "budget_stop.ckpt" : paths.latest();
  return r;
}

SampleCommandResult sample_command(const ExperimentConfig& cfg, const fs::path& root,
                                   const std::optional<fs::path>& checkpoint) {
  const RunPaths paths = RunPaths::under(root, cfg.run.name);
  const Dataset data = load_data(cfg);
  const fs::path ckpt = checkpoint.value_or(paths.latest());
  const TrainState state = load_checkpoint_for(cfg, data, ckpt);
  const SamplerConfig sampler = cfg.eval.sampler_for(make_spec(cfg.train, state));
  const std::uint64_t seed = Rng::substream(cfg.train.seed, 0x73616d70ULL).next_u64();
  Rng rng(seed);
  const GeneratedSamples gen = generate(cfg.train, state, sampler, cfg.sample_n, rng);

  const std::string stem = to_string(sampler.method) + "_n" + std::to_string(cfg.sample_n);
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < gen.data.cols(); ++j) header.push_back("x" + std::to_string(j));
  std::vector<std::string> latent_header;
  for (Eigen::Index j = 0; j < gen.latents.cols(); ++j) latent_header.push_back("z" + std::to_string(j));

  const std::map<std::string, std::string> extra{{"sampler", to_string(sampler.method)},
                                                 {"sample_seed", std::to_string(seed)},
                                                 {"checkpoint_crc32", checkpoint_hash(ckpt)}};
  SampleCommandResult r;
  r.samples = paths.samples_dir / (stem + ".csv");
  r.rows = gen.data.rows();
  write_artifact(r.samples, matrix_csv(gen.data, header), cfg, extra);
  const fs::path latents = paths.samples_dir / (stem + "_latents.csv");
  write_artifact(latents, matrix_csv(gen.latents, latent_header), cfg, extra);
  std::vector<std::string> files{r.samples.filename().string(), latents.filename().string()};
  if (data.binary()) {
    const fs::path grid = paths.samples_dir / (stem + ".pgm");
    write_artifact(grid, encode_pgm(tile_images(gen.data.topRows(std::min<Eigen::Index>(64, gen.data.rows())), 8, 8)),
                   cfg, extra);
    files.push_back(grid.filename().string());
  }

  nlohmann::ordered_json prov;
  prov["sampler"] = to_string(sampler.method);
  prov["steps"] = sampler.steps;
  prov["t_end"] = sampler.t_end;
  prov["n"] = cfg.sample_n;
  prov["seed"] = cfg.train.seed;
  prov["sample_seed"] = seed;
  prov["checkpoint"] = ckpt.string();
  prov["checkpoint_crc32"] = checkpoint_hash(ckpt);
  prov["mode"] = to_string(cfg.train.mode);
  prov["build"] = build_id();
  prov["files"] = files;
  r.provenance = paths.samples_dir / (stem + ".json");
  write_artifact(r.provenance, prov.dump(2) + "\n", cfg, extra);
  return r;
}

std::string eval_command(const ExperimentConfig& cfg, const fs::path& root, const std::optional<fs::path>& checkpoint) {
  const RunPaths paths = RunPaths::under(root, cfg.run.name);
  const Dataset data = load_data(cfg);
  const fs::path ckpt = checkpoint.value_or(paths.latest());
  const TrainState state = load_checkpoint_for(cfg, data, ckpt);
  const EvalRow row = evaluate(cfg.train, cfg.eval, data, state, state.epoch);
  std::string log = fs::exists(paths.eval_csv) ? read_file(paths.eval_csv) : eval_csv_header();
  const std::string line = eval_csv_row(row);
  log += line;
  write_artifact(paths.eval_csv, log, cfg, {{"checkpoint_crc32", checkpoint_hash(ckpt)}});
  return line;
}

std::string inspect_checkpoint(const fs::path& path) {
  const TrainState s = checkpoint_load(path);
  std::ostringstream out;
  out << "checkpoint " << path.string() << " (crc32 " << checkpoint_hash(path) << ")\n";
  out << "  epoch " << s.epoch << ", step " << s.step << "\n";
  out << "  vae: data_dim " << s.vae.data_dim << ", latent_dim " << s.vae.latent_dim << ", likelihood "
      << (s.vae.likelihood == Likelihood::BernoulliLogits ? "bernoulli" : "gaussian") << ", parameters "
      << s.vae.encoder.parameter_count() + s.vae.decoder.parameter_count() << "\n";
  out << "  score: dim " << s.score.dim << ", horizon " << format_double(s.score.horizon) << ", parameters "
      << s.score.mlp.parameter_count() << "\n";
  if (s.reference) {
    out << "  reference GMM: " << s.reference->components() << " components in " << s.reference->dim() << "D\n";
    for (Eigen::Index k = 0; k < s.reference->components(); ++k) {
      out << "    w=" << format_double(s.reference->weights()(k)) << " mean=(";
      for (Eigen::Index j = 0; j < s.reference->dim(); ++j)
        out << (j ? ", " : "") << format_double(s.reference->means()(k, j));
      out << ")\n";
    }
  } else {
    out << "  reference GMM: none\n";
  }
  out << "  adam steps: vae " << s.adam_vae.step << ", score " << s.adam_score.step << "\n";
  return out.str();
}

}  // namespace lndsm
