#include "scenediff/serve/service.hpp"

#include <algorithm>
#include <random>

#include "scenediff/data/dataset_io.hpp"
#include "scenediff/data/generator.hpp"

namespace scenediff::serve {

namespace {

using nlohmann::json;

struct BadField {
  std::string field;
  std::string message;
};

Response error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

Response bad_field(const BadField& b) { return {400, json{{"error", b.message}, {"field", b.field}}}; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    const auto j = path.find('/', i);
    const auto end = j == std::string::npos ? path.size() : j;
    if (end > i) out.push_back(path.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

const json& require(const json& body, const std::string& field) {
  if (!body.contains(field)) throw BadField{field, "missing field '" + field + "'"};
  return body.at(field);
}

std::string string_field(const json& body, const std::string& field) {
  const json& v = require(body, field);
  if (!v.is_string()) throw BadField{field, "'" + field + "' must be a string"};
  return v.get<std::string>();
}

std::uint64_t seed_field(const json& body, const std::string& field) {
  const json& v = require(body, field);
  if (!v.is_number_unsigned()) throw BadField{field, "'" + field + "' must be a non-negative integer"};
  return v.get<std::uint64_t>();
}

std::uint64_t seed_or_random(const json& body) {
  if (body.contains("seed")) return seed_field(body, "seed");
  std::random_device rd;
  return rd();
}

std::vector<std::string> unknown_token_warnings(const net::Vocabulary& vocab, const std::string& prompt) {
  std::vector<std::string> unknown;
  vocab.bag(prompt, &unknown);
  std::vector<std::string> out;
  for (const auto& t : unknown) out.push_back("token '" + t + "' is not in the vocabulary");
  return out;
}

/// Solid of a generated cloud: no parts, resting on its lowest point under
/// the centroid.
geometry::Solid solid_of(const geometry::PointCloud& cloud, double yaw) {
  geometry::Solid s;
  const auto c = cloud.centroid();
  double z = c.z();
  for (const auto& p : cloud) z = std::min(z, p.z());
  s.pose.position = geometry::Vec3(c.x(), c.y(), z);
  s.pose.yaw = yaw;
  return s;
}

void check_scene(const data::Interaction& scene, const net::HyperParams& hp) {
  if (scene.entities.empty() || scene.entities[0].kind != data::EntityKind::Human) {
    throw BadField{"scene", "the first entity must be the human"};
  }
  if (scene.object_count() > hp.max_objects) {
    throw BadField{"scene", "the model accepts at most " + std::to_string(hp.max_objects) + " objects"};
  }
  for (std::size_t i = 0; i < scene.entities.size(); ++i) {
    if (scene.entities[i].cloud.empty()) throw BadField{"scene", "entity " + std::to_string(i) + " has no points"};
    if (i > 0 && scene.entities[i].kind != data::EntityKind::Object) {
      throw BadField{"scene", "entity " + std::to_string(i) + " must be an object"};
    }
  }
}

}  // namespace

json flatten(const geometry::PointCloud& cloud) {
  json out = json::array();
  for (const auto& p : cloud) {
    out.push_back(p.x());
    out.push_back(p.y());
    out.push_back(p.z());
  }
  return out;
}

Service::Service(train::GuidingPointsNet net, ServiceOptions options) : net_(std::move(net)), options_(std::move(options)) {}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::unique_lock<std::mutex> Service::hold_writer(const std::string& session_id) {
  const auto s = find(session_id);
  if (!s) throw std::out_of_range("unknown session " + session_id);
  return std::unique_lock<std::mutex>(s->writer);
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  const auto parts = split_path(path);
  if (parts.size() < 2 || parts[0] != "api") return error(404, "no route " + path);

  auto parse_body = [&]() {
    json j = body.empty() ? json::object() : json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw BadField{"body", "body must be a JSON object"};
    return j;
  };

  try {
    if (parts.size() == 2 && parts[1] == "health") {
      if (method != "GET") return error(405, "use GET");
      return health();
    }
    if (parts[1] != "sessions" || parts.size() > 4) return error(404, "no route " + path);
    if (parts.size() == 2) {
      if (method != "POST") return error(405, "use POST");
      return create_session(parse_body());
    }
    const auto session = find(parts[2]);
    if (!session) return error(404, "unknown session " + parts[2]);
    if (parts.size() == 3) {
      if (method != "GET") return error(405, "use GET");
      return get_session(*session);
    }
    if (parts[3] != "synthesize" && parts[3] != "edit") return error(404, "no route " + path);
    if (method != "POST") return error(405, "use POST");
    const json j = parse_body();
    std::unique_lock writer(session->writer, std::try_to_lock);
    if (!writer.owns_lock()) return error(409, "session " + session->id + " has a mutation in flight");
    return parts[3] == "synthesize" ? synthesize(*session, j) : apply_edit(*session, j);
  } catch (const BadField& b) {
    return bad_field(b);
  } catch (const edit::EditError& e) {
    return {400, json{{"error", e.what()}, {"field", "prompt"}}};
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

Response Service::create_session(const json& body) {
  data::Interaction scene;
  if (body.contains("scene")) {
    try {
      scene = data::interaction_from_json(body.at("scene"));
    } catch (const std::exception& e) {
      throw BadField{"scene", e.what()};
    }
  } else if (body.contains("seed")) {
    data::GeneratorConfig g;
    g.points = net_.hyper().points;
    g.max_objects = std::min(g.max_objects, net_.hyper().max_objects);
    g.min_objects = std::min(g.min_objects, g.max_objects);
    scene = data::gen_interaction(seed_field(body, "seed"), g);
  } else {
    throw BadField{"seed", "expected 'seed' or 'scene'"};
  }
  check_scene(scene, net_.hyper());

  auto s = std::make_shared<Session>();
  s->scene = std::move(scene);
  std::unique_lock lock(sessions_mutex_);
  s->id = "s" + std::to_string(next_id_++);
  sessions_.emplace(s->id, s);
  return {201, json{{"session_id", s->id}}};
}

Response Service::get_session(Session& s) const {
  std::shared_lock lock(s.state);
  return {200, json{{"session_id", s.id}, {"scene", data::to_json(s.scene)}, {"history", s.history}}};
}

Response Service::synthesize(Session& s, const json& body) {
  const std::string prompt = string_field(body, "prompt");
  const std::uint64_t seed = seed_or_random(body);
  const auto parsed = edit::parse_prompt(prompt);
  if (parsed.noun.empty()) throw BadField{"prompt", "prompt names no known object"};

  data::Interaction scene;
  {
    std::shared_lock lock(s.state);
    scene = s.scene;
  }
  if (scene.object_count() >= net_.hyper().max_objects) {
    throw BadField{"prompt", "the scene already holds " + std::to_string(scene.object_count()) + " objects"};
  }
  const auto gen = train::synthesize(net_, scene, prompt, seed, options_.schedule);

  data::Entity e;
  e.kind = data::EntityKind::Object;
  e.label = parsed.noun;
  e.cloud = gen.points;
  e.solid = solid_of(gen.points, 0.0);
  const std::size_t id = scene.entities.size();

  json out{{"points", flatten(gen.points)},       {"guiding_points", flatten(gen.guiding)},
           {"attention_weights", gen.w},          {"seed", seed},
           {"entity_id", id},                     {"warnings", unknown_token_warnings(net_.vocabulary(), prompt)}};
  std::unique_lock lock(s.state);
  s.scene.entities.push_back(std::move(e));
  s.history.push_back(json{{"kind", "synthesize"}, {"prompt", prompt}, {"seed", seed}, {"entity_id", id}});
  return {200, std::move(out)};
}

Response Service::apply_edit(Session& s, const json& body) {
  edit::EditRequest req;
  try {
    req.op = edit::parse_edit_op(string_field(body, "op"));
  } catch (const edit::EditError& e) {
    throw BadField{"op", e.what()};
  }
  req.prompt = string_field(body, "prompt");
  req.target_id = static_cast<std::size_t>(seed_field(body, "target_id"));
  const std::uint64_t seed = seed_or_random(body);

  data::Interaction scene;
  {
    std::shared_lock lock(s.state);
    scene = s.scene;
  }
  req.interaction_id = scene.id;
  try {
    edit::validate_request(scene, req);
  } catch (const edit::EditError& e) {
    const std::string msg = e.what();
    throw BadField{msg.find("object id") != std::string::npos ? "target_id" : "prompt", msg};
  }
  const auto result = edit::edit(scene, req, net_, seed, options_.schedule);

  json out{{"points", flatten(result.points)}, {"guiding_points", flatten(result.guiding)},
           {"attention_weights", result.w},    {"seed", seed},
           {"entity_id", req.target_id},       {"warnings", result.warnings}};
  if (req.op == edit::EditOp::AlterShape) out["fixed"] = result.fixed;

  std::unique_lock lock(s.state);
  auto& e = s.scene.entities[req.target_id];
  if (req.op == edit::EditOp::Replace) e.label = edit::parse_prompt(req.prompt).noun;
  e.solid = solid_of(result.points, e.solid.pose.yaw);
  e.cloud = result.points;
  s.history.push_back(json{{"kind", "edit"},
                           {"op", edit::to_string(req.op)},
                           {"prompt", req.prompt},
                           {"seed", seed},
                           {"entity_id", req.target_id}});
  return {200, std::move(out)};
}

Response Service::health() const {
  return {200, json{{"status", "ok"},
                    {"checkpoint_hash", options_.checkpoint_hash},
                    {"ablation", net::to_string(net_.ablation())},
                    {"points", net_.hyper().points}}};
}

}  // namespace scenediff::serve
