#include "invmih/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

namespace invmih {

namespace {

template <typename I>
I parse_int(const std::string& key, const std::string& v) {
  I out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string real_str(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(name, field, type)                                                          \
  Key {                                                                                     \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_int<type>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                          \
  }
#define REAL_KEY(name, field)                                                          \
  Key {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_real(name, v); }, \
        [](const RunConfig& c) { return real_str(c.field); }                           \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"stage",
       [](RunConfig& c, const std::string& v) {
         if (v != "all") stage_from_string(v);
         c.stage = v;
       },
       [](const RunConfig& c) { return c.stage; }},
      INT_KEY("iir_warmup_iterations", iir_warmup_iterations, int64_t),
      INT_KEY("iih_warmup_iterations", iih_warmup_iterations, int64_t),
      INT_KEY("joint_iterations", joint_iterations, int64_t),
      {"num_secrets",
       [](RunConfig& c, const std::string& v) {
         const auto [m, n] = grid_for_count(parse_int<int>("num_secrets", v));
         c.model.rows = m;
         c.model.cols = n;
       },
       [](const RunConfig& c) { return std::to_string(c.model.num_secrets()); }},
      INT_KEY("grid_rows", model.rows, int),
      INT_KEY("grid_cols", model.cols, int),
      INT_KEY("channels", model.channels, int),
      INT_KEY("iir_blocks", model.iir_blocks, int),
      INT_KEY("iih_blocks", model.iih_blocks, int),
      {"rescaler", [](RunConfig& c, const std::string& v) { c.model.rescaler = rescaler_from_string(v); },
       [](const RunConfig& c) { return to_string(c.model.rescaler); }},
      INT_KEY("init_seed", model.init_seed, uint64_t),
      INT_KEY("subnet_layers", model.subnet.n_layers, int),
      INT_KEY("growth_channels", model.subnet.growth_channels, int),
      INT_KEY("kernel_size", model.subnet.kernel_size, int),
      REAL_KEY("clamp_constant", model.subnet.clamp_constant),
      REAL_KEY("leaky_slope", model.subnet.leaky_slope),
      REAL_KEY("lambda_rec", train.loss_weights.lambda1),
      REAL_KEY("lambda_guide", train.loss_weights.lambda2),
      REAL_KEY("lambda_msi", train.loss_weights.lambda3),
      INT_KEY("batch_size", train.batch_size, int),
      INT_KEY("patch_size", train.patch_size, int64_t),
      REAL_KEY("base_lr", train.base_lr),
      INT_KEY("lr_halving_period", train.lr_halving_period, int64_t),
      INT_KEY("seed", train.seed, uint64_t),
      INT_KEY("histogram_bins", train.histogram_bins, int),
      REAL_KEY("grad_clip", train.grad_clip),
      REAL_KEY("adam_beta1", train.adam_beta1),
      REAL_KEY("adam_beta2", train.adam_beta2),
      REAL_KEY("adam_eps", train.adam_eps),
      {"latent_mode",
       [](RunConfig& c, const std::string& v) {
         if (v == "normal") {
           c.train.latent_mode = LatentMode::kNormal;
         } else if (v == "zeros") {
           c.train.latent_mode = LatentMode::kZeros;
         } else {
           throw std::invalid_argument("latent_mode: expected normal or zeros, got '" + v + "'");
         }
       },
       [](const RunConfig& c) { return std::string(c.train.latent_mode == LatentMode::kZeros ? "zeros" : "normal"); }},
      INT_KEY("checkpoint_interval", train.checkpoint_interval, int64_t),
      {"deterministic", [](RunConfig& c, const std::string& v) { c.train.deterministic = parse_bool("deterministic", v); },
       [](const RunConfig& c) { return std::string(c.train.deterministic ? "true" : "false"); }},
  };
  return table;
}

#undef INT_KEY
#undef REAL_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

}  // namespace

ConfigError::ConfigError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::vector<Stage> RunConfig::stages() const {
  if (stage == "all") return {Stage::kIIRWarmup, Stage::kIIHWarmup, Stage::kJoint};
  return {stage_from_string(stage)};
}

int64_t RunConfig::iterations_for(Stage s) const {
  switch (s) {
    case Stage::kIIRWarmup:
      return iir_warmup_iterations;
    case Stage::kIIHWarmup:
      return iih_warmup_iterations;
    case Stage::kJoint:
      return joint_iterations;
  }
  return 0;
}

TrainConfig RunConfig::train_config(Stage s) const {
  TrainConfig t = train;
  t.stage = s;
  t.iterations = iterations_for(s);
  return t;
}

void RunConfig::validate() const {
  try {
    model.validate();
    for (Stage s : stages()) {
      train_config(s).validate(model.rows, model.cols);
      if (s == Stage::kIIRWarmup && model.rescaler == Rescaler::kBicubic && iterations_for(s) > 0) {
        throw std::invalid_argument("iir_warmup has nothing to train with the bicubic rescaler");
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(0, e.what());
  }
}

void apply_run_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError(0, "unknown key '" + key + "'");
  try {
    k->set(cfg, value);
  } catch (const std::exception& e) {
    throw ConfigError(0, e.what());
  }
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::optional<std::pair<int, std::string>> num_secrets;  // (line, value)
  bool explicit_grid = false;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "missing key before '='");
    if (value.empty()) throw ConfigError(line_no, "missing value for '" + key + "'");
    const Key* k = find_key(key);
    if (!k) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (key == "num_secrets") {
      num_secrets.emplace(line_no, value);
      continue;
    }
    if (key == "grid_rows" || key == "grid_cols") explicit_grid = true;
    try {
      k->set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(line_no, e.what());
    }
  }
  if (num_secrets) {
    const auto& [ln, value] = *num_secrets;
    int n = 0;
    try {
      n = parse_int<int>("num_secrets", value);
      if (n < 1) throw std::invalid_argument("num_secrets must be positive");
    } catch (const std::exception& e) {
      throw ConfigError(ln, e.what());
    }
    if (explicit_grid) {
      if (cfg.model.num_secrets() != n) {
        throw ConfigError(ln, "num_secrets = " + value + " disagrees with grid " + std::to_string(cfg.model.rows) +
                                  "x" + std::to_string(cfg.model.cols));
      }
    } else {
      std::tie(cfg.model.rows, cfg.model.cols) = grid_for_count(n);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) {
    if (k.name == "num_secrets") continue;  // implied by the grid
    out += k.name + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> names;
  for (const auto& k : keys()) names.push_back(k.name);
  return names;
}

}  // namespace invmih
