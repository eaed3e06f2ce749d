#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenediff/data/interaction.hpp"
#include "scenediff/geometry/icp.hpp"
#include "scenediff/metrics/metrics.hpp"
#include "scenediff/train/train.hpp"

namespace scenediff::edit {

using data::Interaction;
using geometry::PointCloud;

class EditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EditOp { Replace, AlterShape, Displace };

std::string to_string(EditOp op);
EditOp parse_edit_op(const std::string& name);
inline constexpr EditOp kEditOps[] = {EditOp::Replace, EditOp::AlterShape, EditOp::Displace};

/// What the grammar recognizes in a prompt. Fields are empty when absent.
struct ParsedPrompt {
  std::string noun;
  std::string adjective;
  std::optional<data::Relation> relation;
};

/// The noun is the earliest catalog noun (longest match at that position).
ParsedPrompt parse_prompt(const std::string& prompt);

struct EditRequest {
  std::string interaction_id;
  EditOp op = EditOp::Replace;
  std::string prompt;
  std::size_t target_id = 0;  // index into Interaction::entities, objects only
};

/// Throws EditError when the prompt does not fit the operation: replace needs
/// a different noun, alter_shape the same noun with an adjective, displace the
/// same noun with a relation.
void validate_request(const Interaction& scene, const EditRequest& request);

struct EditResult {
  PointCloud points;   // world frame
  PointCloud guiding;  // world frame
  std::vector<double> w;
  /// Rows kept from the original object (alter_shape only).
  std::vector<bool> fixed;
  std::vector<std::string> warnings;
};

/// The scene without entity `target_id`.
Interaction without_entity(const Interaction& scene, std::size_t target_id);

/// The scene with its target object appended as a regular entity; returns the
/// new entity's index through `index`.
Interaction with_target(const Interaction& scene, std::size_t* index = nullptr);

/// Regenerates entity `target_id` from the rest of the scene and the new
/// prompt. alter_shape keeps the lowest quarter of the original points (by z,
/// ties by index) and diffuses the rest.
EditResult edit(const Interaction& scene, const EditRequest& request, const train::GuidingPointsNet& net,
                std::uint64_t seed, diffusion::ScheduleKind schedule = diffusion::ScheduleKind::Cosine);

struct ReplacementGt {
  PointCloud aligned;
  geometry::AlignmentReport report;
};

/// Aligns `candidate` onto `original` with z-locked ICP. Throws EditError when
/// the alignment finds no inliers.
ReplacementGt build_replacement_gt(const PointCloud& original, const PointCloud& candidate,
                                   const geometry::IcpOptions& options = {});

/// One held-out editing problem with its constructed ground truth.
struct EditCase {
  EditOp op = EditOp::Replace;
  Interaction scene;  // target appended as the last entity
  std::size_t target_id = 0;
  std::string prompt;
  PointCloud truth;
  std::optional<geometry::AlignmentReport> alignment;
  data::Relation relation = data::Relation::LeftOf;
  std::vector<std::size_t> anchors;
};

/// Builds up to `count` cases for `op` from the split, skipping interactions
/// the operation cannot apply to or whose ground truth is rejected.
std::vector<EditCase> build_edit_cases(const std::vector<Interaction>& split, EditOp op, std::size_t count = 10,
                                       std::uint64_t seed = 0);

/// Produces a cloud for an edit case (world frame).
using EditGenerator = std::function<PointCloud(const EditCase& c, std::size_t index)>;

EditGenerator model_editor(const train::GuidingPointsNet& net, std::uint64_t seed);

struct EditEvalRow {
  EditOp op = EditOp::Replace;
  std::size_t cases = 0;
  metrics::MetricReport mean;
  /// Fraction of outputs whose centroid satisfies the case relation.
  double relation_rate = 0.0;
};

EditEvalRow evaluate_edit_cases(const std::vector<EditCase>& cases, const EditGenerator& generate);

/// Runs every operation on `count` cases from the split.
std::vector<EditEvalRow> evaluate_editing(const std::vector<Interaction>& split, const train::GuidingPointsNet& net,
                                          std::size_t count = 10, std::uint64_t seed = 0);

/// True when the centroid of `points` satisfies `relation` to the anchors in
/// the scene's speaker frame.
bool satisfies(const Interaction& scene, data::Relation relation, const std::vector<std::size_t>& anchors,
               const PointCloud& points);

}  // namespace scenediff::edit
