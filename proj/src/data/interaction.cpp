#include "scenediff/data/interaction.hpp"

#include <cmath>
#include <stdexcept>

namespace scenediff::data {

std::string to_string(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left-of";
    case Relation::RightOf: return "right-of";
    case Relation::InFrontOf: return "in-front-of";
    case Relation::Behind: return "behind";
    case Relation::NextTo: return "next-to";
    case Relation::Under: return "under";
    case Relation::Between: return "between";
  }
  return "?";
}

Relation parse_relation(const std::string& name) {
  for (Relation r : kRelations) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown relation: " + name);
}

std::size_t arity(Relation r) { return r == Relation::Between ? 2 : 1; }

Vec3 SpeakerFrame::axis(Relation r) const {
  switch (r) {
    case Relation::LeftOf:
    case Relation::NextTo: return left();
    case Relation::RightOf: return right;
    case Relation::InFrontOf: return forward;
    case Relation::Behind: return back();
    default: throw std::invalid_argument("relation " + to_string(r) + " has no single axis");
  }
}

SpeakerFrame speaker_frame(const Solid& human) {
  const double yaw = human.pose.yaw;
  SpeakerFrame f;
  f.forward = Vec3(std::cos(yaw), std::sin(yaw), 0.0);
  f.right = Vec3(std::sin(yaw), -std::cos(yaw), 0.0);
  return f;
}

bool relation_holds(Relation r, const Vec3& c, const std::vector<Vec3>& anchors, const SpeakerFrame& frame) {
  if (anchors.size() != arity(r)) throw std::invalid_argument("relation_holds: wrong anchor count");
  const Vec3 flat_c(c.x(), c.y(), 0.0);
  const Vec3 a(anchors[0].x(), anchors[0].y(), 0.0);
  switch (r) {
    case Relation::Under: return (flat_c - a).norm() < 0.3 && c.z() < 0.1;
    case Relation::Between: {
      const Vec3 b(anchors[1].x(), anchors[1].y(), 0.0);
      const Vec3 ab = b - a;
      const double len2 = ab.squaredNorm();
      if (len2 == 0.0) return false;
      const double t = (flat_c - a).dot(ab) / len2;
      const double off = (flat_c - (a + t * ab)).norm();
      return t > 0.25 && t < 0.75 && off < 0.5;
    }
    case Relation::NextTo: return (flat_c - a).dot(frame.left()) > 0.0 && (flat_c - a).norm() < 2.0;
    default: return (flat_c - a).dot(frame.axis(r)) > 0.0;
  }
}

}  // namespace scenediff::data
