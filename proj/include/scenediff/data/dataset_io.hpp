#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenediff/data/interaction.hpp"

namespace scenediff::data {

inline constexpr int kSchemaVersion = 1;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const Solid& solid);
Solid solid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Interaction& interaction);
Interaction interaction_from_json(const nlohmann::json& j);

/// Writes a schema header line followed by one interaction per line.
void save_dataset(const std::filesystem::path& path, const std::vector<Interaction>& interactions);
/// Throws DatasetError naming the 1-based line on malformed input.
std::vector<Interaction> load_dataset(const std::filesystem::path& path);

}  // namespace scenediff::data
