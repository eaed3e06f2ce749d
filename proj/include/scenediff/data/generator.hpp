#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "scenediff/data/interaction.hpp"

namespace scenediff::data {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorConfig {
  std::size_t points = 256;
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  double room_half_extent = 2.5;  // m
  double gap = 0.1;               // m, directional relations
  double next_to_gap = 0.05;      // m
  double facing_jitter_deg = 30.0;
};

/// Floor pose for the target under a relation. `anchors` are entity solids;
/// the target keeps the speaker's yaw. `attempt` pushes the target further out
/// along the relation axis (0.15 m per attempt).
geometry::Pose place_target(Relation relation, const std::vector<const Solid*>& anchors, const Solid& target,
                            const SpeakerFrame& frame, const GeneratorConfig& config, int attempt = 0);

/// Support distance of a posed solid along a world direction, measured from
/// its pose position.
double extent_along(const Solid& solid, const Vec3& direction);

/// True when the two solids' oriented bounding boxes overlap (with margin).
bool solids_overlap(const Solid& a, const Solid& b, double margin = 0.0);

Interaction gen_interaction(std::uint64_t seed, const GeneratorConfig& config = {});

/// Seeds [first, first + count).
std::vector<Interaction> gen_dataset(std::uint64_t first_seed, std::size_t count, const GeneratorConfig& config = {});

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

/// Train seeds [0, train), test seeds [train, train + test).
Split gen_split(std::size_t train = 180, std::size_t test = 20, const GeneratorConfig& config = {});

/// Rounds to 9 significant digits so text serialization round-trips.
double snap(double v);

}  // namespace scenediff::data
