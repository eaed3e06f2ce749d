#include "scenediff/data/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "scenediff/data/generator.hpp"

namespace scenediff::data {

using geometry::Box;
using geometry::Capsule;
using geometry::Cylinder;
using geometry::Prism;
using geometry::Vec2;

namespace {

struct Jitter {
  std::mt19937_64& rng;
  double operator()(double v) {
    std::uniform_real_distribution<double> u(0.9, 1.1);
    return snap(v * u(rng));
  }
};

Box box(double cx, double cy, double cz, double hx, double hy, double hz) {
  return Box{Vec3(snap(cx), snap(cy), snap(cz)), Vec3(snap(hx), snap(hy), snap(hz))};
}

Cylinder cylinder(double z, double r, double h) { return Cylinder{Vec3(0, 0, snap(z)), snap(r), snap(h)}; }

/// Four legs under a rectangular top whose underside sits at `height`.
void add_legs(Solid& s, double hx, double hy, double height, double thick = 0.025) {
  for (int i = 0; i < 4; ++i) {
    const double x = (i & 1 ? 1 : -1) * (hx - thick);
    const double y = (i & 2 ? 1 : -1) * (hy - thick);
    s.parts.push_back(box(x, y, height / 2, thick, thick, height / 2));
  }
}

Prism l_shape(double hx, double hy, double arm, double z_min, double height) {
  // L footprint: full width along the back (-x) edge and along the left (+y) edge.
  std::vector<Vec2> poly = {Vec2(-hx, -hy), Vec2(-hx + arm, -hy), Vec2(-hx + arm, hy - arm),
                            Vec2(hx, hy - arm), Vec2(hx, hy),      Vec2(-hx, hy)};
  for (Vec2& v : poly) v = Vec2(snap(v.x()), snap(v.y()));
  return Prism{poly, snap(z_min), snap(height)};
}

Solid make_table(const std::string& adj, Jitter& j, double top_z, double scale) {
  Solid s;
  if (adj == "round") {
    const double r = j(0.45 * scale);
    s.parts.push_back(cylinder(top_z - 0.04, r, 0.04));
    s.parts.push_back(cylinder(0.0, 0.06, top_z - 0.04));
    return s;
  }
  const double hx = j(adj == "long" || adj == "wide" ? 0.8 * scale : 0.4 * scale);
  const double hy = j(0.4 * scale);
  s.parts.push_back(box(0, 0, top_z - 0.02, hx, hy, 0.02));
  add_legs(s, hx, hy, top_z - 0.04);
  return s;
}

Solid make_chair(const std::string& adj, Jitter& j) {
  Solid s;
  const double hx = j(0.22);
  const double hy = j(adj == "wide" ? 0.32 : adj == "small" ? 0.18 : 0.22);
  const double seat = j(0.45);
  const double back = j(adj == "tall" ? 0.45 : 0.25);
  s.parts.push_back(box(0, 0, seat, hx, hy, 0.03));
  s.parts.push_back(box(-hx + 0.02, 0, seat + 0.03 + back, 0.02, hy, back));
  add_legs(s, hx, hy, seat - 0.03, 0.02);
  return s;
}

Solid make_office_chair(const std::string& adj, Jitter& j) {
  Solid s;
  const double seat = j(adj == "tall" ? 0.55 : 0.45);
  const double h = j(adj == "small" ? 0.2 : 0.25);
  s.parts.push_back(cylinder(0.0, j(0.3), 0.06));
  s.parts.push_back(cylinder(0.06, 0.03, seat - 0.09));
  s.parts.push_back(box(0, 0, seat, h, h, 0.03));
  s.parts.push_back(box(-h + 0.02, 0, seat + 0.33, 0.02, h, 0.3));
  return s;
}

Solid make_armchair(const std::string& adj, Jitter& j) {
  Solid s;
  const double hx = j(0.4);
  const double hy = j(adj == "wide" ? 0.55 : 0.4);
  s.parts.push_back(box(0, 0, 0.2, hx, hy, 0.2));
  s.parts.push_back(box(-hx + 0.08, 0, 0.6, 0.08, hy, 0.2));
  s.parts.push_back(box(0, hy - 0.07, 0.5, hx, 0.07, 0.1));
  s.parts.push_back(box(0, -hy + 0.07, 0.5, hx, 0.07, 0.1));
  return s;
}

Solid make_sofa(const std::string& adj, Jitter& j) {
  Solid s;
  const double hx = j(0.45);
  const double hy = j(adj == "small" ? 0.7 : 1.0);
  if (adj == "l-shaped") {
    s.parts.push_back(l_shape(j(0.9), hy, 2 * hx, 0.0, 0.4));
  } else {
    s.parts.push_back(box(0, 0, 0.2, hx, hy, 0.2));
  }
  s.parts.push_back(box(-hx + 0.1, 0, 0.6, 0.1, hy, 0.2));
  return s;
}

Solid make_desk(const std::string& adj, Jitter& j) {
  Solid s;
  const double hx = j(0.35);
  const double hy = j(adj == "small" ? 0.5 : 0.8);
  const double top = 0.74;
  if (adj == "l-shaped") {
    s.parts.push_back(l_shape(j(0.8), hy, 0.6, top - 0.04, 0.04));
  } else {
    s.parts.push_back(box(0, 0, top - 0.02, hx, hy, 0.02));
  }
  s.parts.push_back(box(-hx + 0.3, hy - 0.02, (top - 0.04) / 2, 0.3, 0.02, (top - 0.04) / 2));
  s.parts.push_back(box(-hx + 0.3, -hy + 0.02, (top - 0.04) / 2, 0.3, 0.02, (top - 0.04) / 2));
  return s;
}

Solid make_cabinet(const std::string& adj, Jitter& j) {
  Solid s;
  const double hz = j(adj == "tall" ? 0.9 : adj == "low" ? 0.3 : 0.5);
  const double hy = j(adj == "wide" ? 0.8 : 0.4);
  s.parts.push_back(box(0, 0, hz, j(0.25), hy, hz));
  return s;
}

Solid make_bookshelf(const std::string& adj, Jitter& j) {
  Solid s;
  const double hz = j(adj == "tall" ? 1.0 : 0.6);
  const double hy = j(adj == "wide" ? 0.7 : adj == "narrow" ? 0.3 : 0.45);
  const double hx = 0.16;
  s.parts.push_back(box(-hx + 0.01, 0, hz, 0.01, hy, hz));
  s.parts.push_back(box(0, hy - 0.015, hz, hx, 0.015, hz));
  s.parts.push_back(box(0, -hy + 0.015, hz, hx, 0.015, hz));
  const int shelves = hz > 0.8 ? 5 : 3;
  for (int i = 0; i < shelves; ++i) {
    const double z = 0.015 + i * (2 * hz - 0.03) / (shelves - 1);
    s.parts.push_back(box(0, 0, z, hx, hy, 0.015));
  }
  return s;
}

Solid make_lamp(const std::string& adj, Jitter& j) {
  Solid s;
  const double h = j(adj == "tall" ? 1.6 : 1.1);
  s.parts.push_back(cylinder(0.0, j(0.15), 0.03));
  s.parts.push_back(cylinder(0.03, 0.02, h - 0.28));
  s.parts.push_back(cylinder(h - 0.25, j(0.2), 0.25));
  return s;
}

Solid make_plant(const std::string& adj, Jitter& j) {
  Solid s;
  const double pot = j(adj == "small" ? 0.2 : 0.3);
  const double r = j(adj == "small" ? 0.12 : 0.16);
  s.parts.push_back(cylinder(0.0, r, pot));
  const double top = j(adj == "tall" ? 1.3 : 0.6);
  s.parts.push_back(Capsule{Vec3(0, 0, snap(pot + r)), Vec3(0, 0, snap(top)), snap(r * 1.4)});
  return s;
}

Solid make_bed(const std::string& adj, Jitter& j) {
  Solid s;
  const double hx = j(1.0);
  const double hy = j(adj == "wide" ? 0.8 : 0.5);
  s.parts.push_back(box(0, 0, 0.25, hx, hy, 0.25));
  s.parts.push_back(box(-hx + 0.04, 0, 0.55, 0.04, hy, 0.55));
  return s;
}

Solid make_rug(const std::string& adj, Jitter& j) {
  Solid s;
  if (adj == "round") {
    s.parts.push_back(cylinder(0.0, j(0.7), 0.02));
  } else if (adj == "long") {
    s.parts.push_back(box(0, 0, 0.01, j(1.2), j(0.5), 0.01));
  } else {
    const double h = j(0.7);
    s.parts.push_back(box(0, 0, 0.01, h, h, 0.01));
  }
  return s;
}

Solid make_mat(const std::string& adj, Jitter& j) {
  Solid s;
  s.parts.push_back(box(0, 0, 0.01, j(0.9), j(adj == "wide" ? 0.45 : 0.3), 0.01));
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"place a", "put a", "add a", "i want a"};
  return v;
}

}  // namespace

const std::vector<NounSpec>& catalog() {
  static const std::vector<NounSpec> c = {
      {"table", {"round", "square", "long"}, false},
      {"coffee table", {"round", "square", "long"}, false},
      {"chair", {"small", "tall", "wide"}, false},
      {"office chair", {"small", "tall"}, false},
      {"armchair", {"small", "wide"}, false},
      {"sofa", {"small", "long", "l-shaped"}, false},
      {"desk", {"small", "long", "l-shaped"}, false},
      {"cabinet", {"low", "tall", "wide"}, false},
      {"bookshelf", {"narrow", "tall", "wide"}, false},
      {"floor lamp", {"short", "tall"}, false},
      {"potted plant", {"small", "tall"}, false},
      {"bed", {"narrow", "wide"}, false},
      {"rug", {"round", "square", "long"}, true},
      {"yoga mat", {"long", "wide"}, true},
  };
  return c;
}

const NounSpec& noun_spec(const std::string& noun) {
  for (const NounSpec& n : catalog()) {
    if (n.noun == noun) return n;
  }
  throw std::invalid_argument("unknown noun: " + noun);
}

bool is_flat(const std::string& noun) { return noun_spec(noun).flat; }

Solid build_object(const std::string& noun, const std::string& adjective, std::mt19937_64& rng) {
  const NounSpec& spec = noun_spec(noun);
  if (std::find(spec.adjectives.begin(), spec.adjectives.end(), adjective) == spec.adjectives.end()) {
    throw std::invalid_argument("adjective '" + adjective + "' does not apply to " + noun);
  }
  Jitter j{rng};
  if (noun == "table") return make_table(adjective, j, 0.74, 1.0);
  if (noun == "coffee table") return make_table(adjective, j, 0.42, 0.85);
  if (noun == "chair") return make_chair(adjective, j);
  if (noun == "office chair") return make_office_chair(adjective, j);
  if (noun == "armchair") return make_armchair(adjective, j);
  if (noun == "sofa") return make_sofa(adjective, j);
  if (noun == "desk") return make_desk(adjective, j);
  if (noun == "cabinet") return make_cabinet(adjective, j);
  if (noun == "bookshelf") return make_bookshelf(adjective, j);
  if (noun == "floor lamp") return make_lamp(adjective, j);
  if (noun == "potted plant") return make_plant(adjective, j);
  if (noun == "bed") return make_bed(adjective, j);
  if (noun == "rug") return make_rug(adjective, j);
  return make_mat(adjective, j);
}

Solid build_human(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.92, 1.08);
  const double s = u(rng);
  auto cap = [](Vec3 a, Vec3 b, double r) {
    return Capsule{Vec3(snap(a.x()), snap(a.y()), snap(a.z())), Vec3(snap(b.x()), snap(b.y()), snap(b.z())), snap(r)};
  };
  Solid h;
  for (double side : {-1.0, 1.0}) {
    h.parts.push_back(cap(Vec3(0.0, side * 0.1, 0.08), Vec3(0.2, side * 0.1, 0.08), 0.04));
    h.parts.push_back(cap(Vec3(0.0, side * 0.1, 0.14), Vec3(0.0, side * 0.1, 0.9 * s), 0.07));
    h.parts.push_back(cap(Vec3(0.0, side * 0.22, 1.35 * s), Vec3(0.35, side * 0.22, 1.1 * s), 0.05));
  }
  h.parts.push_back(cap(Vec3(0, 0, 0.95 * s), Vec3(0, 0, 1.4 * s), 0.16));
  h.parts.push_back(cap(Vec3(0, 0, 1.55 * s), Vec3(0, 0, 1.62 * s), 0.1));
  return h;
}

std::string reference(const Entity& e) { return e.kind == EntityKind::Human ? "me" : "the " + e.label; }

int template_count() { return static_cast<int>(verbs().size()); }

std::string render_prompt(int template_index, const std::string& adjective, const std::string& noun, Relation relation,
                          const std::vector<std::string>& refs) {
  if (template_index < 0 || template_index >= template_count()) throw std::out_of_range("prompt template index");
  if (refs.size() != arity(relation)) throw std::invalid_argument("prompt: wrong number of references");
  std::string verb = verbs()[static_cast<std::size_t>(template_index)];
  const char first = adjective.empty() ? 'x' : adjective.front();
  if (std::string("aeiou").find(first) != std::string::npos || adjective == "l-shaped") verb += "n";
  std::string phrase;
  switch (relation) {
    case Relation::LeftOf: phrase = "to the left of " + refs[0]; break;
    case Relation::RightOf: phrase = "to the right of " + refs[0]; break;
    case Relation::InFrontOf: phrase = "in front of " + refs[0]; break;
    case Relation::Behind: phrase = "behind " + refs[0]; break;
    case Relation::NextTo: phrase = "next to " + refs[0]; break;
    case Relation::Under: phrase = "under " + refs[0]; break;
    case Relation::Between: phrase = "between " + refs[0] + " and " + refs[1]; break;
  }
  return capitalize(verb + " " + adjective + " " + noun + " " + phrase + ".");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || (ch == '-' && !cur.empty())) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

const std::vector<std::string>& grammar_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::set<std::string> words;
    auto add = [&](const std::string& text) {
      for (auto& w : tokenize(text)) words.insert(w);
    };
    for (const auto& v : verbs()) add(v + "n");
    for (const auto& v : verbs()) add(v);
    add("to the left of right in front behind next under between and me the");
    for (const NounSpec& n : catalog()) {
      add(n.noun);
      for (const auto& a : n.adjectives) add(a);
    }
    return std::vector<std::string>(words.begin(), words.end());
  }();
  return vocab;
}

}  // namespace scenediff::data
