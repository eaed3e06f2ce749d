#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "scenediff/geometry/solid.hpp"

namespace scenediff::data {

using geometry::PointCloud;
using geometry::Solid;
using geometry::Vec3;

enum class Relation { LeftOf, RightOf, InFrontOf, Behind, NextTo, Under, Between };

inline constexpr std::array<Relation, 7> kRelations = {Relation::LeftOf, Relation::RightOf, Relation::InFrontOf,
                                                       Relation::Behind, Relation::NextTo,  Relation::Under,
                                                       Relation::Between};

std::string to_string(Relation r);
Relation parse_relation(const std::string& name);
/// Number of anchors the relation refers to (1 or 2).
std::size_t arity(Relation r);

enum class EntityKind { Human, Object };

struct Entity {
  EntityKind kind = EntityKind::Object;
  std::string label;
  PointCloud cloud;
  Solid solid;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct InteractionMeta {
  std::uint64_t seed = 0;
  Relation relation = Relation::LeftOf;
  std::vector<std::size_t> anchors;  // indices into Interaction::entities
  std::string adjective;

  friend bool operator==(const InteractionMeta&, const InteractionMeta&) = default;
};

/// One scene: entities[0] is the human, followed by M objects, plus the
/// object to synthesize.
struct Interaction {
  std::string id;
  std::string prompt;
  std::vector<Entity> entities;
  Entity target;
  InteractionMeta meta;

  const Entity& human() const { return entities.front(); }
  std::size_t object_count() const { return entities.size() - 1; }

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Direction vectors in the xy plane derived from the human's facing.
struct SpeakerFrame {
  Vec3 forward = Vec3::UnitY();
  Vec3 right = Vec3::UnitX();

  Vec3 left() const { return -right; }
  Vec3 back() const { return -forward; }
  /// Unit direction for a directional relation (not Under/Between).
  Vec3 axis(Relation r) const;
};

/// Human local +x is the facing direction; the frame follows its yaw.
SpeakerFrame speaker_frame(const Solid& human);

/// Checks the relation against a placed target centroid. Directional
/// relations test the sign of the projection onto the speaker axis from the
/// anchor position.
bool relation_holds(Relation r, const Vec3& target_centroid, const std::vector<Vec3>& anchor_positions,
                    const SpeakerFrame& frame);

}  // namespace scenediff::data
