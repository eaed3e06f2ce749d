#include "scenediff/data/dataset_io.hpp"

#include <fstream>
#include <sstream>

namespace scenediff::data {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DatasetError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json points(const PointCloud& c) {
  json a = json::array();
  for (const Vec3& p : c) {
    a.push_back(p.x());
    a.push_back(p.y());
    a.push_back(p.z());
  }
  return a;
}

PointCloud points_from(const json& j) {
  if (!j.is_array() || j.size() % 3 != 0) throw DatasetError("points must be a flat array with a multiple of 3 values");
  PointCloud c;
  for (std::size_t i = 0; i < j.size(); i += 3) c.push_back(Vec3(j[i].get<double>(), j[i + 1].get<double>(), j[i + 2].get<double>()));
  return c;
}

json entity(const Entity& e) {
  return json{{"kind", e.kind == EntityKind::Human ? "human" : "object"},
              {"label", e.label},
              {"points", points(e.cloud)},
              {"solid", to_json(e.solid)}};
}

Entity entity_from(const json& j) {
  Entity e;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "human" && kind != "object") throw DatasetError("unknown entity kind: " + kind);
  e.kind = kind == "human" ? EntityKind::Human : EntityKind::Object;
  e.label = j.at("label").get<std::string>();
  e.cloud = points_from(j.at("points"));
  e.solid = solid_from_json(j.at("solid"));
  return e;
}

}  // namespace

json to_json(const Solid& solid) {
  json parts = json::array();
  for (const auto& part : solid.parts) {
    parts.push_back(std::visit(
        overloaded{
            [](const geometry::Box& b) { return json{{"type", "box"}, {"center", vec(b.center)}, {"half_extents", vec(b.half_extents)}}; },
            [](const geometry::Cylinder& c) {
              return json{{"type", "cylinder"}, {"base_center", vec(c.base_center)}, {"radius", c.radius}, {"height", c.height}};
            },
            [](const geometry::Capsule& c) {
              return json{{"type", "capsule"}, {"a", vec(c.a)}, {"b", vec(c.b)}, {"radius", c.radius}};
            },
            [](const geometry::Prism& p) {
              json poly = json::array();
              for (const auto& v : p.polygon) poly.push_back(json::array({v.x(), v.y()}));
              return json{{"type", "prism"}, {"polygon", poly}, {"z_min", p.z_min}, {"height", p.height}};
            },
        },
        part));
  }
  const Vec3& p = solid.pose.position;
  return json{{"pose", json::array({p.x(), p.y(), p.z(), solid.pose.yaw})}, {"parts", parts}};
}

Solid solid_from_json(const json& j) {
  Solid s;
  const json& pose = j.at("pose");
  if (!pose.is_array() || pose.size() != 4) throw DatasetError("pose must be [x, y, z, yaw]");
  s.pose.position = Vec3(pose[0].get<double>(), pose[1].get<double>(), pose[2].get<double>());
  s.pose.yaw = pose[3].get<double>();
  for (const json& part : j.at("parts")) {
    const std::string type = part.at("type").get<std::string>();
    if (type == "box") {
      s.parts.emplace_back(geometry::Box{vec_from(part.at("center")), vec_from(part.at("half_extents"))});
    } else if (type == "cylinder") {
      s.parts.emplace_back(geometry::Cylinder{vec_from(part.at("base_center")), part.at("radius").get<double>(),
                                              part.at("height").get<double>()});
    } else if (type == "capsule") {
      s.parts.emplace_back(geometry::Capsule{vec_from(part.at("a")), vec_from(part.at("b")), part.at("radius").get<double>()});
    } else if (type == "prism") {
      geometry::Prism p;
      for (const json& v : part.at("polygon")) p.polygon.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      p.z_min = part.at("z_min").get<double>();
      p.height = part.at("height").get<double>();
      s.parts.emplace_back(std::move(p));
    } else {
      throw DatasetError("unknown solid part type: " + type);
    }
  }
  return s;
}

json to_json(const Interaction& it) {
  json entities = json::array();
  for (const Entity& e : it.entities) entities.push_back(entity(e));
  return json{{"id", it.id},
              {"prompt", it.prompt},
              {"entities", entities},
              {"target", entity(it.target)},
              {"meta",
               {{"seed", it.meta.seed},
                {"relation", to_string(it.meta.relation)},
                {"anchors", it.meta.anchors},
                {"adjective", it.meta.adjective}}}};
}

Interaction interaction_from_json(const json& j) {
  Interaction it;
  it.id = j.at("id").get<std::string>();
  it.prompt = j.at("prompt").get<std::string>();
  for (const json& e : j.at("entities")) it.entities.push_back(entity_from(e));
  it.target = entity_from(j.at("target"));
  const json& meta = j.at("meta");
  it.meta.seed = meta.at("seed").get<std::uint64_t>();
  it.meta.relation = parse_relation(meta.at("relation").get<std::string>());
  it.meta.anchors = meta.at("anchors").get<std::vector<std::size_t>>();
  it.meta.adjective = meta.at("adjective").get<std::string>();
  if (it.entities.empty() || it.entities.front().kind != EntityKind::Human) {
    throw DatasetError("first entity must be the human");
  }
  for (std::size_t a : it.meta.anchors) {
    if (a >= it.entities.size()) throw DatasetError("anchor index out of range");
  }
  return it;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Interaction>& interactions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << json{{"format", "scenediff-interactions"}, {"schema_version", kSchemaVersion}}.dump() << '\n';
  for (const Interaction& it : interactions) out << to_json(it).dump() << '\n';
  if (!out) throw DatasetError("write failed for " + path.string());
}

std::vector<Interaction> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::vector<Interaction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (number == 1) {
        if (j.value("schema_version", -1) != kSchemaVersion) throw DatasetError("unsupported schema version");
        continue;
      }
      out.push_back(interaction_from_json(j));
    } catch (const std::exception& e) {
      throw DatasetError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace scenediff::data
