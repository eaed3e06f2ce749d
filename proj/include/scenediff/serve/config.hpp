#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "scenediff/train/train.hpp"

namespace scenediff::serve {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` pairs. Blank lines and lines starting with '#' are
/// skipped. Keys are lower case words with underscores.
using Config = std::map<std::string, std::string>;

/// Throws ConfigError naming the 1-based line on a malformed or repeated key.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Builds a training configuration. `preset` (desk or large) is applied
/// first, then every other key. Unknown keys and bad values throw.
train::TrainConfig to_train_config(const Config& config);

/// Every recognized key with its meaning, one per line.
const std::map<std::string, std::string>& config_schema();

}  // namespace scenediff::serve
