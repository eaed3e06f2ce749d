#include <doctest.h>

#include <cmath>
#include <numbers>

#include "scenediff/data/generator.hpp"
#include "scenediff/data/grammar.hpp"
#include "scenediff/edit/edit.hpp"

using namespace scenediff;
using namespace scenediff::edit;

namespace {

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.hp.points = 32;
  c.hp.d_embed = 8;
  c.hp.d_text = 8;
  c.hp.d_encoder = 8;
  c.hp.d_v = 8;
  c.hp.d_f = 8;
  c.hp.d_time = 4;
  c.hp.d_hidden = 8;
  c.hp.heads = 2;
  c.hp.steps = 10;
  c.max_updates = 2;
  c.epochs = 1;
  return c;
}

const std::vector<data::Interaction>& scenes() {
  static const auto s = [] {
    data::GeneratorConfig g;
    g.points = 64;
    return data::gen_dataset(300, 30, g);
  }();
  return s;
}

const train::GuidingPointsNet& tiny_net() {
  static const auto net = train::train(scenes(), tiny_config()).net;
  return net;
}

std::size_t object_with_two_adjectives(const data::Interaction& scene) {
  for (std::size_t i = 1; i < scene.entities.size(); ++i) {
    if (data::noun_spec(scene.entities[i].label).adjectives.size() > 1) return i;
  }
  return 0;
}

}  // namespace

TEST_CASE("edit op names round trip") {
  for (EditOp op : kEditOps) CHECK(parse_edit_op(to_string(op)) == op);
  CHECK_THROWS_AS(parse_edit_op("move"), EditError);
}

TEST_CASE("prompt parsing finds noun, adjective and relation") {
  auto p = parse_prompt("place a round coffee table in front of me");
  CHECK(p.noun == "coffee table");
  CHECK(p.adjective == "round");
  REQUIRE(p.relation);
  CHECK(*p.relation == data::Relation::InFrontOf);

  p = parse_prompt("put a l-shaped sofa between the bed and the desk");
  CHECK(p.noun == "sofa");
  CHECK(p.adjective == "l-shaped");
  CHECK(*p.relation == data::Relation::Between);

  p = parse_prompt("a purple chair next to me");
  CHECK(p.noun == "chair");
  CHECK(p.adjective.empty());
  CHECK(*p.relation == data::Relation::NextTo);

  p = parse_prompt("put a tall cabinet left of the desk");
  CHECK(p.noun == "cabinet");
  CHECK(p.adjective == "tall");

  p = parse_prompt("something nice");
  CHECK(p.noun.empty());
  CHECK_FALSE(p.relation);
}

TEST_CASE("requests are validated against the scene") {
  const auto& scene = scenes()[0];
  REQUIRE(scene.entities.size() >= 2);
  const std::string label = scene.entities[1].label;
  const std::string other = label == "bed" ? "chair" : "bed";

  EditRequest r{scene.id, EditOp::Replace, "place a " + other + " left of me", 1};
  CHECK_NOTHROW(validate_request(scene, r));
  r.target_id = 0;
  CHECK_THROWS_AS(validate_request(scene, r), EditError);
  r.target_id = scene.entities.size();
  CHECK_THROWS_AS(validate_request(scene, r), EditError);
  r.target_id = 1;
  r.prompt = "place a " + label + " left of me";
  CHECK_THROWS_AS(validate_request(scene, r), EditError);

  r.op = EditOp::Displace;
  CHECK_NOTHROW(validate_request(scene, r));
  r.prompt = "place a " + label;
  CHECK_THROWS_AS(validate_request(scene, r), EditError);

  r.op = EditOp::AlterShape;
  r.prompt = "place a " + data::noun_spec(label).adjectives[0] + " " + label;
  CHECK_NOTHROW(validate_request(scene, r));
  r.prompt = "place a " + label;
  CHECK_THROWS_AS(validate_request(scene, r), EditError);
}

TEST_CASE("replacement ground truth undoes a z-locked motion") {
  const auto& original = scenes()[1].target.cloud;
  geometry::ZLockedTransform t;
  t.angle = 0.2;
  t.translation = geometry::Vec3(0.05, -0.03, 0.0);
  const auto gt = build_replacement_gt(original, t.apply(original));
  CHECK(gt.report.fitness == doctest::Approx(1.0));
  double worst = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) worst = std::max(worst, (gt.aligned[i] - original[i]).norm());
  CHECK(worst < 1e-6);
  CHECK_THROWS_AS(build_replacement_gt(original, {}), EditError);

  geometry::PointCloud far;
  for (const auto& p : original) far.push_back(100.0 * p);
  geometry::IcpOptions opts;
  opts.inlier_radius = 1e-9;
  CHECK_THROWS_AS(build_replacement_gt(original, far, opts), EditError);
}

TEST_CASE("edit cases carry consistent ground truth") {
  for (EditOp op : kEditOps) {
    const auto cases = build_edit_cases(scenes(), op, 10, 5);
    CHECK(cases.size() == 10);
    for (const auto& c : cases) {
      CHECK(c.target_id == c.scene.entities.size() - 1);
      CHECK(c.truth.size() == c.scene.entities[c.target_id].cloud.size());
      const auto parsed = parse_prompt(c.prompt);
      const std::string& label = c.scene.entities[c.target_id].label;
      if (op == EditOp::Replace) {
        CHECK(parsed.noun != label);
        CHECK(data::is_flat(parsed.noun) == data::is_flat(label));
      } else {
        CHECK(parsed.noun == label);
      }
      if (op == EditOp::Displace) {
        CHECK(c.anchors == std::vector<std::size_t>{0});
        CHECK_FALSE(c.alignment);
        CHECK(satisfies(without_entity(c.scene, c.target_id), c.relation, c.anchors, c.truth));
      } else {
        REQUIRE(c.alignment);
        CHECK(c.alignment->fitness > 0.0);
      }
      CHECK_NOTHROW(validate_request(c.scene, {c.scene.id, op, c.prompt, c.target_id}));
    }
  }
  CHECK(build_edit_cases(scenes(), EditOp::Replace, 4, 5).size() == 4);
}

TEST_CASE("oracle editor scores perfectly") {
  for (EditOp op : kEditOps) {
    const auto cases = build_edit_cases(scenes(), op, 5, 1);
    const auto row = evaluate_edit_cases(cases, [](const EditCase& c, std::size_t) { return c.truth; });
    CHECK(row.op == op);
    CHECK(row.cases == 5);
    CHECK(row.mean.cd == 0.0);
    CHECK(row.mean.f1 == 1.0);
    if (op == EditOp::Displace) CHECK(row.relation_rate == 1.0);
  }
}

TEST_CASE("alter_shape keeps the base rows bit-exact") {
  const auto& scene = scenes()[2];
  const std::size_t id = object_with_two_adjectives(scene);
  REQUIRE(id > 0);
  const auto& e = scene.entities[id];
  const auto& spec = data::noun_spec(e.label);
  const EditRequest r{scene.id, EditOp::AlterShape, "place a " + spec.adjectives[1] + " " + e.label + " zzz", id};
  const auto out = edit::edit(scene, r, tiny_net(), 3);
  const auto original = net::resample(e.cloud, tiny_net().hyper().points);
  REQUIRE(out.points.size() == original.size());
  REQUIRE(out.fixed.size() == original.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < out.fixed.size(); ++i) {
    if (!out.fixed[i]) continue;
    ++kept;
    CHECK(out.points[i] == original[i]);
  }
  CHECK(kept == original.size() / 4);
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0].find("zzz") != std::string::npos);
  CHECK(out.w.size() == scene.entities.size() - 1);
}

TEST_CASE("replace and displace regenerate the object deterministically") {
  const auto& scene = scenes()[3];
  const std::string label = scene.entities[1].label;
  const std::string other = label == "bed" ? "chair" : "bed";
  const EditRequest replace{scene.id, EditOp::Replace, "place a " + other + " behind me", 1};
  const auto a = edit::edit(scene, replace, tiny_net(), 8);
  const auto b = edit::edit(scene, replace, tiny_net(), 8);
  CHECK(a.points == b.points);
  CHECK(a.points.size() == tiny_net().hyper().points);
  for (bool f : a.fixed) CHECK_FALSE(f);
  CHECK(edit::edit(scene, replace, tiny_net(), 9).points != a.points);
  CHECK(a.warnings.empty());

  const EditRequest displace{scene.id, EditOp::Displace, "move the " + label + " left of me", 1};
  CHECK(edit::edit(scene, displace, tiny_net(), 8).points.size() == tiny_net().hyper().points);
  EditRequest bad = displace;
  bad.target_id = 42;
  CHECK_THROWS_AS(edit::edit(scene, bad, tiny_net(), 8), EditError);
}

TEST_CASE("model editing evaluation covers every operation") {
  const auto rows = evaluate_editing(scenes(), tiny_net(), 2, 0);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.cases == 2);
    CHECK(std::isfinite(r.mean.cd));
    CHECK(r.relation_rate >= 0.0);
    CHECK(r.relation_rate <= 1.0);
  }
}
