#include "scenediff/edit/edit.hpp"

#include <algorithm>
#include <random>

#include "scenediff/data/generator.hpp"
#include "scenediff/data/grammar.hpp"
#include "scenediff/diffusion/sampler.hpp"

namespace scenediff::edit {

namespace {

std::vector<std::string> split_words(const std::string& s) { return data::tokenize(s); }

std::uint64_t case_seed(std::uint64_t seed, std::size_t index) { return seed * 1000003ULL + index * 7919ULL + 17; }

std::vector<std::string> references(const Interaction& scene, const std::vector<std::size_t>& anchors) {
  std::vector<std::string> refs;
  for (std::size_t a : anchors) refs.push_back(data::reference(scene.entities[a]));
  return refs;
}

PointCloud move_cloud(const PointCloud& cloud, const geometry::Pose& from, const geometry::Pose& to) {
  PointCloud out;
  for (const auto& p : cloud) out.push_back(to.to_world(from.to_local(p)));
  return out;
}

}  // namespace

std::string to_string(EditOp op) {
  switch (op) {
    case EditOp::Replace: return "replace";
    case EditOp::AlterShape: return "alter_shape";
    case EditOp::Displace: return "displace";
  }
  return "?";
}

EditOp parse_edit_op(const std::string& name) {
  for (EditOp op : kEditOps) {
    if (to_string(op) == name) return op;
  }
  throw EditError("unknown edit op '" + name + "'");
}

ParsedPrompt parse_prompt(const std::string& prompt) {
  const auto tokens = split_words(prompt);
  ParsedPrompt out;
  std::size_t best_len = 0;
  std::size_t noun_at = tokens.size();
  for (const auto& spec : data::catalog()) {
    const auto words = split_words(spec.noun);
    for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i) {
      const bool earlier = i < noun_at || (i == noun_at && words.size() > best_len);
      if (earlier && std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        best_len = words.size();
        out.noun = spec.noun;
        noun_at = i;
      }
    }
  }
  if (!out.noun.empty() && noun_at > 0) {
    const auto& adjs = data::noun_spec(out.noun).adjectives;
    if (std::find(adjs.begin(), adjs.end(), tokens[noun_at - 1]) != adjs.end()) out.adjective = tokens[noun_at - 1];
  }
  for (std::size_t i = 0; i < tokens.size() && !out.relation; ++i) {
    const std::string& t = tokens[i];
    const bool followed_by_of = i + 1 < tokens.size() && tokens[i + 1] == "of";
    if (t == "left" && followed_by_of) out.relation = data::Relation::LeftOf;
    else if (t == "right" && followed_by_of) out.relation = data::Relation::RightOf;
    else if (t == "front" && followed_by_of) out.relation = data::Relation::InFrontOf;
    else if (t == "behind") out.relation = data::Relation::Behind;
    else if (t == "next" && i + 1 < tokens.size() && tokens[i + 1] == "to") out.relation = data::Relation::NextTo;
    else if (t == "under") out.relation = data::Relation::Under;
    else if (t == "between") out.relation = data::Relation::Between;
  }
  return out;
}

void validate_request(const Interaction& scene, const EditRequest& request) {
  if (request.target_id == 0 || request.target_id >= scene.entities.size()) {
    throw EditError("unknown object id " + std::to_string(request.target_id) + " (scene has objects 1.." +
                    std::to_string(scene.entities.size() - 1) + ")");
  }
  const std::string& label = scene.entities[request.target_id].label;
  const ParsedPrompt p = parse_prompt(request.prompt);
  switch (request.op) {
    case EditOp::Replace:
      if (p.noun.empty()) throw EditError("replace: prompt names no known object");
      if (p.noun == label) throw EditError("replace: prompt names the same object ('" + label + "')");
      break;
    case EditOp::AlterShape:
      if (p.noun != label) throw EditError("alter_shape: prompt must name the same object ('" + label + "')");
      if (p.adjective.empty()) throw EditError("alter_shape: prompt has no shape adjective for '" + label + "'");
      break;
    case EditOp::Displace:
      if (p.noun != label) throw EditError("displace: prompt must name the same object ('" + label + "')");
      if (!p.relation) throw EditError("displace: prompt has no spatial relation");
      break;
  }
}

Interaction without_entity(const Interaction& scene, std::size_t target_id) {
  Interaction out = scene;
  out.entities.erase(out.entities.begin() + static_cast<std::ptrdiff_t>(target_id));
  return out;
}

Interaction with_target(const Interaction& scene, std::size_t* index) {
  Interaction out = scene;
  out.entities.push_back(scene.target);
  if (index) *index = out.entities.size() - 1;
  return out;
}

EditResult edit(const Interaction& scene, const EditRequest& request, const train::GuidingPointsNet& net,
                std::uint64_t seed, diffusion::ScheduleKind schedule) {
  validate_request(scene, request);
  const Interaction context = without_entity(scene, request.target_id);
  const auto& hp = net.hyper();
  const auto cond = net::make_conditioning(context, request.prompt, net.vocabulary(), hp.points);
  EditResult out;
  for (const auto& t : cond.unknown_tokens) out.warnings.push_back("token '" + t + "' is not in the vocabulary");

  const auto gp = net.guide(cond);
  const auto sched = diffusion::make_schedule(schedule, hp.steps);
  const auto denoiser = net.denoiser(gp.s_tilde);
  if (request.op == EditOp::AlterShape) {
    const PointCloud original = net::resample(scene.entities[request.target_id].cloud, hp.points);
    const auto mask = diffusion::lowest_z_mask(original.to_array(), 0.25);
    const auto known = cond.frame.to_local(original).to_array();
    const auto x = diffusion::inpaint_loop(denoiser, sched, mask, known, seed);
    out.points = cond.frame.to_world(PointCloud::from_array(x));
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) out.points[i] = original[i];
    }
    out.fixed = mask;
  } else {
    const auto x = diffusion::p_sample_loop(denoiser, hp.points, sched, seed);
    out.points = cond.frame.to_world(PointCloud::from_array(x));
    out.fixed.assign(hp.points, false);
  }
  out.guiding = cond.frame.to_world(PointCloud::from_array(gp.s_tilde));
  out.w = gp.w;
  return out;
}

ReplacementGt build_replacement_gt(const PointCloud& original, const PointCloud& candidate,
                                   const geometry::IcpOptions& options) {
  if (original.empty() || candidate.empty()) throw EditError("build_replacement_gt: empty cloud");
  ReplacementGt out;
  out.report = geometry::icp_align_z_locked(candidate, original, options);
  if (out.report.fitness == 0.0) throw EditError("ground truth rejected: alignment fitness is 0");
  out.aligned = out.report.transform.apply(candidate);
  return out;
}

std::vector<EditCase> build_edit_cases(const std::vector<Interaction>& split, EditOp op, std::size_t count,
                                       std::uint64_t seed) {
  std::vector<EditCase> cases;
  for (std::size_t idx = 0; idx < split.size() && cases.size() < count; ++idx) {
    const Interaction& src = split[idx];
    std::mt19937_64 rng(case_seed(seed, idx));
    EditCase c;
    c.op = op;
    c.scene = with_target(src, &c.target_id);
    c.relation = src.meta.relation;
    c.anchors = src.meta.anchors;
    const auto& target = src.target;
    const auto& spec = data::noun_spec(target.label);

    if (op == EditOp::Displace) {
      if (spec.flat) continue;
      const std::vector<data::Relation> options{data::Relation::LeftOf, data::Relation::RightOf,
                                                data::Relation::InFrontOf, data::Relation::Behind};
      std::vector<data::Relation> fresh;
      for (auto r : options) {
        if (r != src.meta.relation || src.meta.anchors != std::vector<std::size_t>{0}) fresh.push_back(r);
      }
      c.relation = fresh[rng() % fresh.size()];
      c.anchors = {0};
      const auto frame = data::speaker_frame(src.human().solid);
      const auto pose = data::place_target(c.relation, {&src.human().solid}, target.solid, frame, {}, 0);
      c.truth = move_cloud(target.cloud, target.solid.pose, pose);
      c.prompt = data::render_prompt(0, src.meta.adjective, target.label, c.relation, references(c.scene, c.anchors));
      cases.push_back(std::move(c));
      continue;
    }

    std::string noun = target.label;
    std::string adjective;
    if (op == EditOp::Replace) {
      std::vector<std::string> nouns;
      for (const auto& n : data::catalog()) {
        if (n.flat == spec.flat && n.noun != target.label) nouns.push_back(n.noun);
      }
      noun = nouns[rng() % nouns.size()];
      const auto& adjs = data::noun_spec(noun).adjectives;
      adjective = adjs[rng() % adjs.size()];
    } else {
      std::vector<std::string> adjs;
      for (const auto& a : spec.adjectives) {
        if (a != src.meta.adjective) adjs.push_back(a);
      }
      if (adjs.empty()) continue;
      adjective = adjs[rng() % adjs.size()];
    }
    geometry::Solid candidate = data::build_object(noun, adjective, rng);
    candidate.pose = target.solid.pose;
    const PointCloud cloud = geometry::sample_interior(candidate, target.cloud.size(), rng());
    try {
      auto gt = build_replacement_gt(target.cloud, cloud);
      c.truth = std::move(gt.aligned);
      c.alignment = gt.report;
    } catch (const EditError&) {
      continue;
    }
    c.prompt = data::render_prompt(0, adjective, noun, src.meta.relation, references(c.scene, c.anchors));
    cases.push_back(std::move(c));
  }
  return cases;
}

EditGenerator model_editor(const train::GuidingPointsNet& net, std::uint64_t seed) {
  return [&net, seed](const EditCase& c, std::size_t index) {
    EditRequest req{c.scene.id, c.op, c.prompt, c.target_id};
    return edit(c.scene, req, net, case_seed(seed, index)).points;
  };
}

bool satisfies(const Interaction& scene, data::Relation relation, const std::vector<std::size_t>& anchors,
               const PointCloud& points) {
  std::vector<geometry::Vec3> positions;
  for (std::size_t a : anchors) positions.push_back(scene.entities.at(a).solid.pose.position);
  return data::relation_holds(relation, points.centroid(), positions, data::speaker_frame(scene.human().solid));
}

EditEvalRow evaluate_edit_cases(const std::vector<EditCase>& cases, const EditGenerator& generate) {
  EditEvalRow row;
  if (cases.empty()) return row;
  row.op = cases.front().op;
  row.cases = cases.size();
  std::size_t held = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const PointCloud out = generate(c, i);
    row.mean.cd += metrics::chamfer(out, c.truth);
    row.mean.emd += metrics::emd(out, net::resample(c.truth, out.size())).distance;
    row.mean.f1 += metrics::f1(out, c.truth);
    const Interaction context = without_entity(c.scene, c.target_id);
    if (satisfies(context, c.relation, c.anchors, out)) ++held;
  }
  const double n = static_cast<double>(cases.size());
  row.mean.cd /= n;
  row.mean.emd /= n;
  row.mean.f1 /= n;
  row.relation_rate = static_cast<double>(held) / n;
  return row;
}

std::vector<EditEvalRow> evaluate_editing(const std::vector<Interaction>& split, const train::GuidingPointsNet& net,
                                          std::size_t count, std::uint64_t seed) {
  std::vector<EditEvalRow> rows;
  for (EditOp op : kEditOps) {
    auto row = evaluate_edit_cases(build_edit_cases(split, op, count, seed), model_editor(net, seed));
    row.op = op;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace scenediff::edit
