#include "scenediff/data/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "scenediff/data/grammar.hpp"
#include "scenediff/metrics/metrics.hpp"

namespace scenediff::data {

namespace {

using geometry::Pose;

struct FootprintBox {
  Vec3 center;  // world, z is the middle of the vertical extent
  Vec3 half;    // local half extents
  double yaw = 0.0;
};

FootprintBox footprint(const Solid& s) {
  const auto [lo, hi] = s.local_bounds();
  const Vec3 mid = (lo + hi) / 2.0;
  FootprintBox b;
  b.center = s.pose.to_world(mid);
  b.half = (hi - lo) / 2.0;
  b.yaw = s.pose.yaw;
  return b;
}

double projected_radius(const FootprintBox& b, const Vec3& axis) {
  const Vec3 ux(std::cos(b.yaw), std::sin(b.yaw), 0.0);
  const Vec3 uy(-std::sin(b.yaw), std::cos(b.yaw), 0.0);
  return b.half.x() * std::abs(ux.dot(axis)) + b.half.y() * std::abs(uy.dot(axis));
}

std::uint64_t draw_seed(std::mt19937_64& rng) { return rng(); }

}  // namespace

double snap(double v) {
  if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

double extent_along(const Solid& solid, const Vec3& direction) {
  const auto [lo, hi] = solid.local_bounds();
  double best = -std::numeric_limits<double>::infinity();
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 c((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(), (corner & 4) ? hi.z() : lo.z());
    Vec3 d = solid.pose.to_world(c) - solid.pose.position;
    d.z() = 0.0;
    best = std::max(best, d.dot(direction));
  }
  return best;
}

bool solids_overlap(const Solid& a, const Solid& b, double margin) {
  const FootprintBox fa = footprint(a);
  const FootprintBox fb = footprint(b);
  if (std::abs(fa.center.z() - fb.center.z()) >= fa.half.z() + fb.half.z() + margin) return false;
  const Vec3 d(fb.center.x() - fa.center.x(), fb.center.y() - fa.center.y(), 0.0);
  for (double yaw : {fa.yaw, fa.yaw + std::numbers::pi / 2, fb.yaw, fb.yaw + std::numbers::pi / 2}) {
    const Vec3 axis(std::cos(yaw), std::sin(yaw), 0.0);
    if (std::abs(d.dot(axis)) >= projected_radius(fa, axis) + projected_radius(fb, axis) + margin) return false;
  }
  return true;
}

Pose place_target(Relation relation, const std::vector<const Solid*>& anchors, const Solid& target,
                  const SpeakerFrame& frame, const GeneratorConfig& config, int attempt) {
  if (anchors.size() != arity(relation)) {
    throw std::invalid_argument("place_target: " + to_string(relation) + " needs " + std::to_string(arity(relation)) +
                                " anchor(s)");
  }
  Pose pose;
  pose.yaw = snap(std::atan2(frame.forward.y(), frame.forward.x()));
  Solid oriented = target;
  oriented.pose = Pose{Vec3::Zero(), pose.yaw};
  const double push = 0.15 * attempt;
  Vec3 p;
  switch (relation) {
    case Relation::Under: p = anchors[0]->pose.position; break;
    case Relation::Between:
      p = (anchors[0]->pose.position + anchors[1]->pose.position) / 2.0 + push * frame.forward;
      break;
    default: {
      const Vec3 axis = frame.axis(relation);
      const double gap = relation == Relation::NextTo ? config.next_to_gap : config.gap;
      p = anchors[0]->pose.position + axis * (extent_along(*anchors[0], axis) + extent_along(oriented, -axis) + gap + push);
    }
  }
  pose.position = Vec3(snap(p.x()), snap(p.y()), 0.0);
  return pose;
}

Interaction gen_interaction(std::uint64_t seed, const GeneratorConfig& config) {
  if (config.points == 0) throw std::invalid_argument("generator: points must be positive");
  if (config.max_objects > 8 || config.min_objects > config.max_objects) {
    throw std::invalid_argument("generator: object counts must satisfy min <= max <= 8");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const double pi = std::numbers::pi;

  for (int round = 0; round < 20; ++round) {
    Interaction it;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06llu", static_cast<unsigned long long>(seed));
    it.id = id;
    it.meta.seed = seed;

    Entity human{EntityKind::Human, "human", {}, build_human(rng)};
    const double jitter = config.facing_jitter_deg * pi / 180.0;
    human.solid.pose = Pose{Vec3(snap(unit(rng) - 0.5), snap(unit(rng) - 0.5), 0.0),
                            snap(pi / 2 + (2.0 * unit(rng) - 1.0) * jitter)};
    const SpeakerFrame frame = speaker_frame(human.solid);
    it.entities.push_back(std::move(human));

    const Relation relation = kRelations[pick(kRelations.size())];
    it.meta.relation = relation;

    std::vector<std::string> flat_nouns, solid_nouns;
    for (const NounSpec& n : catalog()) (n.flat ? flat_nouns : solid_nouns).push_back(n.noun);
    const std::string target_noun =
        relation == Relation::Under ? flat_nouns[pick(flat_nouns.size())] : solid_nouns[pick(solid_nouns.size())];
    const auto& target_adjs = noun_spec(target_noun).adjectives;
    const std::string target_adj = target_adjs[pick(target_adjs.size())];

    std::vector<std::string> pool;
    for (const auto& n : solid_nouns) {
      if (n != target_noun) pool.push_back(n);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t m = config.min_objects + pick(config.max_objects - config.min_objects + 1);
    if (relation == Relation::Between) m = std::max<std::size_t>(m, 1);
    m = std::min(m, pool.size());

    int attempts = 0;
    const double room = config.room_half_extent;
    const Vec3 center = it.entities[0].solid.pose.position;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& adjs = noun_spec(pool[k]).adjectives;
      Entity obj{EntityKind::Object, pool[k], {}, build_object(pool[k], adjs[pick(adjs.size())], rng)};
      for (;;) {
        if (++attempts > 100) {
          throw GenerationError("seed " + std::to_string(seed) + ": could not place " + std::to_string(m) +
                                " objects without overlap in 100 attempts");
        }
        obj.solid.pose = Pose{Vec3(snap(center.x() + (2 * unit(rng) - 1) * room),
                                   snap(center.y() + (2 * unit(rng) - 1) * room), 0.0),
                              snap(unit(rng) * 2 * pi)};
        const bool clear = std::none_of(it.entities.begin(), it.entities.end(),
                                        [&](const Entity& e) { return solids_overlap(e.solid, obj.solid, 0.15); });
        if (clear) break;
      }
      it.entities.push_back(std::move(obj));
    }

    if (relation == Relation::Under) {
      it.meta.anchors = {0};
    } else if (relation == Relation::Between) {
      const std::size_t a = pick(it.entities.size());
      std::size_t b = pick(it.entities.size() - 1);
      if (b >= a) ++b;
      it.meta.anchors = {a, b};
    } else {
      it.meta.anchors = {unit(rng) < 0.5 || m == 0 ? std::size_t{0} : 1 + pick(m)};
    }
    it.meta.adjective = target_adj;

    Entity target{EntityKind::Object, target_noun, {}, build_object(target_noun, target_adj, rng)};
    std::vector<const Solid*> anchors;
    for (std::size_t a : it.meta.anchors) anchors.push_back(&it.entities[a].solid);
    bool placed = false;
    for (int attempt = 0; attempt <= 3 && !placed; ++attempt) {
      if (attempt > 0 && relation == Relation::Under) break;
      target.solid.pose = place_target(relation, anchors, target.solid, frame, config, attempt);
      placed = std::none_of(it.entities.begin(), it.entities.end(),
                            [&](const Entity& e) { return solids_overlap(e.solid, target.solid, 0.02); });
    }
    if (!placed) continue;

    std::vector<std::string> refs;
    for (std::size_t a : it.meta.anchors) refs.push_back(reference(it.entities[a]));
    it.prompt = render_prompt(static_cast<int>(pick(static_cast<std::size_t>(template_count()))), target_adj,
                              target_noun, relation, refs);

    auto sample = [&](const Solid& s) {
      PointCloud c = geometry::sample_interior(s, config.points, draw_seed(rng));
      for (Vec3& p : c) p = Vec3(snap(p.x()), snap(p.y()), snap(p.z()));
      return c;
    };
    for (Entity& e : it.entities) e.cloud = sample(e.solid);
    target.cloud = sample(target.solid);

    std::vector<PointCloud> clouds;
    for (const Entity& e : it.entities) clouds.push_back(e.cloud);
    if (metrics::ip_3d(target.cloud, clouds).fraction != 0.0) continue;
    it.target = std::move(target);
    return it;
  }
  throw GenerationError("seed " + std::to_string(seed) + ": no collision-free target placement after 20 rounds");
}

std::vector<Interaction> gen_dataset(std::uint64_t first_seed, std::size_t count, const GeneratorConfig& config) {
  std::vector<Interaction> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gen_interaction(first_seed + i, config));
  return out;
}

Split gen_split(std::size_t train, std::size_t test, const GeneratorConfig& config) {
  return Split{gen_dataset(0, train, config), gen_dataset(train, test, config)};
}

}  // namespace scenediff::data
