#pragma once

#include <random>
#include <string>
#include <vector>

#include "scenediff/data/interaction.hpp"

namespace scenediff::data {

struct NounSpec {
  std::string noun;
  std::vector<std::string> adjectives;
  /// Flat floor coverings; the only targets allowed for Under.
  bool flat = false;
};

const std::vector<NounSpec>& catalog();
const NounSpec& noun_spec(const std::string& noun);
bool is_flat(const std::string& noun);

/// Object in its local frame (base on z = 0, centered in xy) with small
/// seeded size jitter. Throws on an unknown noun or adjective.
Solid build_object(const std::string& noun, const std::string& adjective, std::mt19937_64& rng);

/// Capsule skeleton standing on the floor and facing local +x.
Solid build_human(std::mt19937_64& rng);

/// Phrase naming an entity in a prompt: "me" for the human, "the <label>"
/// otherwise.
std::string reference(const Entity& e);

std::string render_prompt(int template_index, const std::string& adjective, const std::string& noun, Relation relation,
                          const std::vector<std::string>& references);
int template_count();

/// Lowercased words of a prompt; hyphens are kept inside words.
std::vector<std::string> tokenize(const std::string& text);

/// Every token the grammar can produce, sorted.
const std::vector<std::string>& grammar_vocabulary();

}  // namespace scenediff::data
