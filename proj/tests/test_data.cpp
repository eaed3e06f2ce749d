#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "scenediff/data/dataset_io.hpp"
#include "scenediff/data/generator.hpp"
#include "scenediff/data/grammar.hpp"
#include "scenediff/geometry/hull.hpp"
#include "scenediff/metrics/metrics.hpp"

using namespace scenediff::data;
using scenediff::geometry::Box;
using scenediff::geometry::Pose;

namespace {

const std::vector<Interaction>& corpus() {
  static const std::vector<Interaction> c = gen_dataset(0, 200);
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("scenediff_test_" + name);
}

Solid box_solid(double hx, double hy, Pose pose = {}) { return Solid{{Box{Vec3(0, 0, 0.5), Vec3(hx, hy, 0.5)}}, pose}; }

}  // namespace

TEST_CASE("right-of places the target past both half extents plus the gap") {
  // Anchor faces +y, so its local y half extent (0.5) lies along world x.
  const Solid anchor = box_solid(0.2, 0.5, Pose{Vec3::Zero(), M_PI / 2});
  const Solid target = box_solid(0.2, 0.3);
  const SpeakerFrame frame;
  CHECK(extent_along(anchor, Vec3::UnitX()) == doctest::Approx(0.5));
  const Pose p = place_target(Relation::RightOf, {&anchor}, target, frame, GeneratorConfig{});
  // The target takes the speaker yaw, so its 0.3 half extent also lies along x.
  // Yaw is stored with 9 significant digits, hence the 1e-8 tolerance.
  CHECK(std::abs(p.position.x() - 0.9) < 1e-8);
  CHECK(std::abs(p.position.y()) < 1e-8);
  CHECK(p.yaw == doctest::Approx(M_PI / 2));
}

TEST_CASE("between lands on the midpoint and under on the anchor") {
  const Solid a = box_solid(0.2, 0.2, Pose{Vec3(0, 0, 0), 0.3});
  const Solid b = box_solid(0.3, 0.2, Pose{Vec3(2, 0, 0), 1.0});
  const Solid t = box_solid(0.1, 0.1);
  const SpeakerFrame frame;
  const Pose mid = place_target(Relation::Between, {&a, &b}, t, frame, GeneratorConfig{});
  CHECK(mid.position.x() == doctest::Approx(1.0));
  CHECK(std::abs(mid.position.y()) < 1e-12);
  const Solid human = box_solid(0.2, 0.2, Pose{Vec3(0.4, -0.7, 0), 0.0});
  const Pose under = place_target(Relation::Under, {&human}, t, frame, GeneratorConfig{});
  CHECK(under.position.x() == doctest::Approx(0.4));
  CHECK(under.position.y() == doctest::Approx(-0.7));
  CHECK(under.position.z() == 0.0);
  CHECK_THROWS(place_target(Relation::Between, {&a}, t, frame, GeneratorConfig{}));
}

TEST_CASE("generation is a pure function of the seed") {
  const Interaction a = gen_interaction(7);
  const Interaction b = gen_interaction(7);
  CHECK(a == b);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK_FALSE(a == gen_interaction(8));
}

TEST_CASE("generated interactions respect the data model") {
  for (const Interaction& it : corpus()) {
    REQUIRE(it.entities.size() >= 2);
    CHECK(it.entities.size() <= 9);
    CHECK(it.entities[0].kind == EntityKind::Human);
    for (std::size_t i = 1; i < it.entities.size(); ++i) CHECK(it.entities[i].kind == EntityKind::Object);
    for (const Entity& e : it.entities) {
      CHECK(e.cloud.size() == 256);
      CHECK(e.cloud.all_finite());
    }
    CHECK(it.target.cloud.size() == 256);
    CHECK(it.meta.anchors.size() == arity(it.meta.relation));
    for (const auto& tok : tokenize(it.prompt)) {
      const auto& vocab = grammar_vocabulary();
      CHECK(std::binary_search(vocab.begin(), vocab.end(), tok));
    }
  }
}

TEST_CASE("generated targets never penetrate their scene") {
  for (const Interaction& it : corpus()) {
    std::vector<PointCloud> clouds;
    for (const Entity& e : it.entities) clouds.push_back(e.cloud);
    CHECK(scenediff::metrics::ip_3d(it.target.cloud, clouds).fraction == 0.0);
  }
}

TEST_CASE("every placement satisfies its relation predicate") {
  for (const Interaction& it : corpus()) {
    std::vector<Vec3> anchors;
    for (std::size_t a : it.meta.anchors) anchors.push_back(it.entities[a].solid.pose.position);
    const SpeakerFrame frame = speaker_frame(it.human().solid);
    CHECK_MESSAGE(relation_holds(it.meta.relation, it.target.cloud.centroid(), anchors, frame), it.id);
    CHECK(relation_holds(it.meta.relation, it.target.solid.pose.position, anchors, frame));
  }
}

TEST_CASE("relation histogram covers all seven relations") {
  std::map<Relation, int> counts;
  for (const Interaction& it : corpus()) ++counts[it.meta.relation];
  CHECK(counts.size() == 7);
  for (const auto& [r, n] : counts) CHECK_MESSAGE(n >= 10, to_string(r));
}

TEST_CASE("prompt mentions the noun, adjective and anchor") {
  for (const Interaction& it : corpus()) {
    CHECK(it.prompt.find(it.target.label) != std::string::npos);
    CHECK(it.prompt.find(it.meta.adjective) != std::string::npos);
    for (std::size_t a : it.meta.anchors) CHECK(it.prompt.find(reference(it.entities[a])) != std::string::npos);
  }
}

TEST_CASE("train and test seeds are disjoint") {
  const Split s = gen_split(6, 3);
  std::set<std::uint64_t> train;
  for (const auto& it : s.train) train.insert(it.meta.seed);
  for (const auto& it : s.test) CHECK(train.count(it.meta.seed) == 0);
  CHECK(s.train.size() == 6);
  CHECK(s.test.size() == 3);
}

TEST_CASE("dataset round trip") {
  const auto path = temp_path("roundtrip.jsonl");
  save_dataset(path, corpus());
  CHECK(load_dataset(path) == corpus());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("\"schema_version\":1") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("empty dataset round trip") {
  const auto path = temp_path("empty.jsonl");
  save_dataset(path, {});
  CHECK(load_dataset(path).empty());
  std::ofstream(path, std::ios::trunc).close();
  CHECK(load_dataset(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("truncated file reports the broken line") {
  const auto path = temp_path("truncated.jsonl");
  save_dataset(path, std::vector<Interaction>(corpus().begin(), corpus().begin() + 3));
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 200);
  try {
    load_dataset(path);
    FAIL("expected failure");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("tokenizer and grammar helpers") {
  CHECK(tokenize("Place an L-shaped sofa behind me.") ==
        std::vector<std::string>{"place", "an", "l-shaped", "sofa", "behind", "me"});
  CHECK(parse_relation("in-front-of") == Relation::InFrontOf);
  CHECK_THROWS(parse_relation("above"));
  std::mt19937_64 rng(1);
  CHECK_THROWS(build_object("table", "tall", rng));
  CHECK_THROWS(build_object("spaceship", "round", rng));
  for (const NounSpec& n : catalog()) {
    CHECK(n.adjectives.size() >= 2);
    for (const auto& adj : n.adjectives) {
      const Solid s = build_object(n.noun, adj, rng);
      CHECK(s.local_bounds().first.z() >= -1e-12);
      CHECK_NOTHROW(scenediff::geometry::sample_interior(s, 20, 3));
    }
  }
}
