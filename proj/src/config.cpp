#include "lndsm/config.hpp"

#include "lndsm/errors.hpp"
#include "lndsm/io.hpp"

#include <charconv>
#include <functional>
#include <sstream>

namespace lndsm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

template <typename Int>
Int to_int(const std::string& v, const std::string& key) {
  Int x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_double(trim(item), key));
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

struct Entry {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define LNDSM_DOUBLE(sec, name, field)                                                                   \
  Entry {                                                                                                \
    sec, name, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(v, sec "." name); }, \
        [](const ExperimentConfig& c) { return format_double(c.field); }                                 \
  }
#define LNDSM_INT(sec, name, field)                                                                      \
  Entry {                                                                                                \
    sec, name,                                                                                           \
        [](ExperimentConfig& c, const std::string& v) {                                                  \
          c.field = to_int<std::decay_t<decltype(c.field)>>(v, sec "." name);                            \
        },                                                                                               \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                                \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"run", "name", [](ExperimentConfig& c, const std::string& v) { c.run.name = v; },
       [](const ExperimentConfig& c) { return c.run.name; }},
      LNDSM_INT("run", "seed", train.seed),
      LNDSM_INT("run", "threads", train.threads),
      {"run", "data_path", [](ExperimentConfig& c, const std::string& v) { c.run.data_path = v; },
       [](const ExperimentConfig& c) { return c.run.data_path; }},

      {"data", "kind", [](ExperimentConfig& c, const std::string& v) { c.data.kind = dataset_kind_from(v); },
       [](const ExperimentConfig& c) { return to_string(c.data.kind); }},
      LNDSM_INT("data", "n_train", data.n_train),
      LNDSM_INT("data", "seed", data.seed),
      LNDSM_INT("data", "components", data.components),
      LNDSM_DOUBLE("data", "separation", data.separation),
      {"data", "weights", [](ExperimentConfig& c, const std::string& v) { c.data.weights = to_list(v, "data.weights"); },
       [](const ExperimentConfig& c) { return list_text(c.data.weights); }},
      LNDSM_DOUBLE("data", "data_std", data.data_std),
      LNDSM_INT("data", "modes", data.modes),
      LNDSM_DOUBLE("data", "flip_prob", data.flip_prob),
      LNDSM_DOUBLE("data", "pixel_noise", data.pixel_noise),

      {"train", "mode", [](ExperimentConfig& c, const std::string& v) { c.train.mode = train_mode_from(v); },
       [](const ExperimentConfig& c) { return to_string(c.train.mode); }},
      LNDSM_INT("train", "epochs", train.epochs),
      LNDSM_INT("train", "batch_size", train.batch_size),
      {"train", "lr_vae",
       [](ExperimentConfig& c, const std::string& v) { c.train.lr_vae = v == "auto" ? -1.0 : to_double(v, "train.lr_vae"); },
       [](const ExperimentConfig& c) { return c.train.lr_vae >= 0.0 ? format_double(c.train.lr_vae) : "auto"; }},
      LNDSM_DOUBLE("train", "lr_score", train.lr_score),
      LNDSM_DOUBLE("train", "lr_pretrain", train.lr_pretrain),
      LNDSM_INT("train", "pretrain_epochs", train.pretrain_epochs),
      {"train", "horizon",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.horizon = v == "auto" ? 0.0 : to_double(v, "train.horizon");
       },
       [](const ExperimentConfig& c) { return c.train.horizon > 0.0 ? format_double(c.train.horizon) : "auto"; }},
      LNDSM_INT("train", "steps", train.steps),
      LNDSM_DOUBLE("train", "beta0", train.beta0),
      LNDSM_DOUBLE("train", "beta1", train.beta1),
      LNDSM_DOUBLE("train", "g", train.g_const),
      LNDSM_INT("train", "latent_dim", train.latent_dim),
      LNDSM_INT("train", "vae_hidden", train.vae_hidden),
      LNDSM_INT("train", "vae_layers", train.vae_layers),
      LNDSM_INT("train", "score_hidden", train.score_hidden),
      LNDSM_INT("train", "score_layers", train.score_layers),
      {"train", "score_param", [](ExperimentConfig& c, const std::string& v) { c.train.score_param = v; },
       [](const ExperimentConfig& c) { return c.train.score_param; }},
      {"train", "likelihood", [](ExperimentConfig& c, const std::string& v) { c.train.likelihood = v; },
       [](const ExperimentConfig& c) { return c.train.likelihood; }},
      LNDSM_DOUBLE("train", "sigma_x", train.sigma_x),
      LNDSM_DOUBLE("train", "grad_clip", train.grad_clip),
      LNDSM_DOUBLE("train", "ce_weight", train.ce_weight),
      LNDSM_DOUBLE("train", "t_min", train.t_min),
      LNDSM_INT("train", "eval_every", train.eval_every),
      LNDSM_DOUBLE("train", "budget_seconds", train.budget_seconds),
      {"train", "log_wall_time",
       [](ExperimentConfig& c, const std::string& v) { c.train.log_wall_time = to_bool(v, "train.log_wall_time"); },
       [](const ExperimentConfig& c) { return std::string(c.train.log_wall_time ? "true" : "false"); }},

      LNDSM_INT("gmm", "components", train.gmm_components),
      LNDSM_INT("gmm", "max_iters", train.gmm.max_iters),
      LNDSM_DOUBLE("gmm", "tol", train.gmm.tol),
      LNDSM_DOUBLE("gmm", "variance_floor", train.gmm.variance_floor),

      {"sampler", "method", [](ExperimentConfig& c, const std::string& v) { c.eval.method = sampler_method_from(v); },
       [](const ExperimentConfig& c) { return to_string(c.eval.method); }},
      LNDSM_INT("sampler", "steps", eval.sampler_steps),
      {"sampler", "t_end",
       [](ExperimentConfig& c, const std::string& v) { c.eval.t_end = v == "auto" ? -1.0 : to_double(v, "sampler.t_end"); },
       [](const ExperimentConfig& c) { return c.eval.t_end >= 0.0 ? format_double(c.eval.t_end) : "auto"; }},
      LNDSM_INT("sampler", "n", sample_n),

      LNDSM_INT("eval", "n_samples", eval.n_samples),
      LNDSM_INT("eval", "projections", eval.projections),
      LNDSM_INT("eval", "features", eval.features),
      LNDSM_INT("eval", "feature_seed", eval.feature_seed),
  };
  return table;
}

#undef LNDSM_DOUBLE
#undef LNDSM_INT

const Entry& find(const std::string& section, const std::string& key) {
  for (const auto& e : entries())
    if (e.section == section && e.key == key) return e;
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  cfg.data.validate();
  cfg.train.validate();
  cfg.eval.validate();
  if (cfg.sample_n < 1) throw ConfigError("sampler.n must be positive");
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return echo_config(a) == echo_config(b); }

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.section + "." + e.key);
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> known{"run", "data", "train", "gmm", "sampler", "eval"};
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ConfigError(where + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    try {
      find(section, trim(line.substr(0, eq))).set(cfg, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::string out, section;
  for (const auto& e : entries()) {
    if (e.section != section) {
      if (!section.empty()) out += '\n';
      section = e.section;
      out += "[" + section + "]\n";
    }
    out += e.key + " = " + e.get(cfg) + "\n";
  }
  return out;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment, const std::vector<std::string>& preferred) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string name = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = name.find('.');
  if (dot != std::string::npos) {
    find(name.substr(0, dot), name.substr(dot + 1)).set(cfg, value);
  } else {
    const Entry* hit = nullptr;
    for (const auto& sec : preferred) {
      for (const auto& e : entries())
        if (e.section == sec && e.key == name) hit = &e;
      if (hit) break;
    }
    if (!hit) {
      for (const auto& e : entries()) {
        if (e.key != name) continue;
        if (hit) throw ConfigError("override key '" + name + "' is ambiguous; use section." + name);
        hit = &e;
      }
    }
    if (!hit) throw ConfigError("unknown config key '" + name + "'");
    hit->set(cfg, value);
  }
}

}  // namespace lndsm
