#include "scenediff/serve/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace scenediff::serve {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) { return (c >= 'a' && c <= 'z') || c == '_' || (c >= '0' && c <= '9'); });
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

Config parse_config(const std::string& text) {
  Config out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError("line " + std::to_string(number) + ": bad key '" + key + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(number) + ": empty value for '" + key + "'");
    if (!out.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(number) + ": repeated key '" + key + "'");
    }
  }
  return out;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

const std::map<std::string, std::string>& config_schema() {
  static const std::map<std::string, std::string> schema = {
      {"preset", "desk or large; applied before the other keys (default desk)"},
      {"points", "points per cloud N"},
      {"max_objects", "largest object count M the model accepts"},
      {"d_embed", "token embedding width"},
      {"d_text", "text feature width"},
      {"d_encoder", "point encoder hidden width"},
      {"d_v", "translation attention width"},
      {"d_f", "transform attention width"},
      {"d_time", "time feature width"},
      {"d_latent", "denoiser latent width (>= 3)"},
      {"d_hidden", "denoiser hidden width"},
      {"attention_layers", "transform attention layers"},
      {"heads", "attention heads; divides d_v and d_f"},
      {"steps", "diffusion steps T"},
      {"learning_rate", "Adam step size"},
      {"batch_size", "samples per update"},
      {"epochs", "training epochs"},
      {"max_updates", "stop after this many updates (0 = no limit)"},
      {"ablation", "full, no_v, no_F, objects_only, human_only or no_text"},
      {"seed", "initialization and shuffling seed"},
      {"schedule", "noise schedule: linear or cosine"},
      {"beta1", "Adam first moment decay"},
      {"beta2", "Adam second moment decay"},
      {"epsilon", "Adam denominator offset"},
  };
  return schema;
}

train::TrainConfig to_train_config(const Config& config) {
  for (const auto& [k, v] : config) {
    if (!config_schema().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  train::TrainConfig c;
  if (const auto it = config.find("preset"); it != config.end()) {
    if (it->second == "large") c.hp = net::HyperParams::large();
    else if (it->second != "desk") throw ConfigError("preset: expected desk or large, got '" + it->second + "'");
  }
  auto& hp = c.hp;
  const std::map<std::string, std::size_t*> sizes = {
      {"points", &hp.points},       {"max_objects", &hp.max_objects}, {"d_embed", &hp.d_embed},
      {"d_text", &hp.d_text},       {"d_encoder", &hp.d_encoder},     {"d_v", &hp.d_v},
      {"d_f", &hp.d_f},             {"d_time", &hp.d_time},           {"d_latent", &hp.d_latent},
      {"d_hidden", &hp.d_hidden},   {"attention_layers", &hp.attention_layers},
      {"heads", &hp.heads},         {"batch_size", &hp.batch_size},   {"max_updates", &c.max_updates}};
  for (const auto& [k, v] : config) {
    if (k == "preset") continue;
    if (const auto it = sizes.find(k); it != sizes.end()) {
      *it->second = to_size(k, v);
    } else if (k == "steps") {
      hp.steps = static_cast<int>(to_size(k, v));
    } else if (k == "epochs") {
      c.epochs = static_cast<int>(to_size(k, v));
    } else if (k == "seed") {
      c.seed = to_size(k, v);
    } else if (k == "learning_rate") {
      hp.learning_rate = to_double(k, v);
    } else if (k == "beta1") {
      c.beta1 = to_double(k, v);
    } else if (k == "beta2") {
      c.beta2 = to_double(k, v);
    } else if (k == "epsilon") {
      c.epsilon = to_double(k, v);
    } else if (k == "ablation") {
      try {
        c.ablation = net::parse_ablation(v);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("ablation: ") + e.what());
      }
    } else if (k == "schedule") {
      try {
        c.schedule = diffusion::parse_schedule_kind(v);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
      }
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace scenediff::serve
